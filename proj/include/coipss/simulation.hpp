#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coipss/errors.hpp"
#include "coipss/system_model.hpp"
#include "coipss/wams.hpp"

namespace coipss {

enum class EventKind { gen_trip, vref_step, load_step };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::gen_trip;
    std::string target;       // generator name, or bus id for load_step
    double magnitude = 0.0;   // vref step in pu; load step as a fraction
};

/// Sinusoidal exciter-reference perturbation used for loop probing.
struct Probe {
    std::string unit;
    double amplitude = 1e-4;  // pu
    double freq_hz = 1.0;
    double start_time = 0.0;  // s
};

struct Scenario {
    double t_end = 21.0;
    double dt = 0.005;
    std::vector<Event> events;
    std::uint64_t seed = 1;
    std::vector<std::pair<std::string, std::string>> speed_pairs;  // relative speed columns
    std::optional<Probe> probe;
};

struct SimulationRecord {
    std::vector<std::string> columns;            // "time" first
    std::vector<std::vector<double>> data;       // one vector per column
    bool instability = false;
    std::optional<double> failure_time;
    std::string failure_reason;
    std::vector<ChannelAuditEntry> audit;
    Eigen::VectorXd final_state;

    const std::vector<double>& series(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return data[c];
        throw InputError("record has no column '" + name + "'");
    }
    const std::vector<double>& time() const { return data[0]; }
    std::size_t rows() const { return data.empty() ? 0 : data[0].size(); }
};

struct NadirMetric {
    double nadir = 1.0;  // pu
    double time = 0.0;   // s
};

/// Minimum center-of-inertia speed at or after the event time.
inline NadirMetric nadir_metric(const SimulationRecord& rec, double event_time) {
    const auto& t = rec.time();
    const auto& coi = rec.series("coi_exact");
    if (t.empty() || event_time > t.back())
        throw InputError("event time lies beyond the recorded horizon");
    NadirMetric m;
    m.nadir = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < event_time) continue;
        if (coi[k] < m.nadir) {
            m.nadir = coi[k];
            m.time = t[k];
        }
    }
    return m;
}

/// Last time the series leaves the band around its settled value. The settled
/// value is the mean over the final window.
inline double settling_time(const SimulationRecord& rec, const std::string& column,
                            double t_from, double band, double final_window = 2.0) {
    const auto& t = rec.time();
    const auto& x = rec.series(column);
    double x_final = 0.0;
    int n_final = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= t.back() - final_window) {
            x_final += x[k];
            ++n_final;
        }
    x_final /= std::max(1, n_final);
    double t_settle = t_from;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= t_from && std::abs(x[k] - x_final) > band) t_settle = t[k];
    return t_settle;
}

/// Largest absolute deviation of the series from its settled value, at or
/// after t_from.
inline double peak_deviation(const SimulationRecord& rec, const std::string& column,
                             double t_from, double final_window = 2.0) {
    const auto& t = rec.time();
    const auto& x = rec.series(column);
    double x_final = 0.0;
    int n_final = 0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= t.back() - final_window) {
            x_final += x[k];
            ++n_final;
        }
    x_final /= std::max(1, n_final);
    double peak = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= t_from) peak = std::max(peak, std::abs(x[k] - x_final));
    return peak;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Fixed-step classical fourth-order integration with the network solved at
/// every stage evaluation. Events snap to the nearest grid time. In external
/// synthesis mode the emulated measurement channels run between steps and the
/// estimator output is held across each step. Deterministic for a given seed.
inline SimulationRecord run(SystemModel& model, const Scenario& sc) {
    if (sc.dt <= 0.0) throw InputError("scenario: dt must be positive");
    const int n_steps = static_cast<int>(std::llround(sc.t_end / sc.dt));
    for (const auto& ev : sc.events)
        if (ev.time < 0.0 || ev.time > sc.t_end)
            throw InputError("scenario: event time outside [0, t_end]");

    // events by grid index
    std::multimap<int, const Event*> event_at;
    for (const auto& ev : sc.events)
        event_at.insert({static_cast<int>(std::llround(ev.time / sc.dt)), &ev});

    const bool sampled_wams = model.opts.wams == WamsSynthesis::external;
    std::vector<DatagramChannel> channels;
    std::vector<FrequencySensor> sensors;
    std::vector<double> next_sample;
    std::vector<std::int64_t> seq;
    std::unique_ptr<CoiEstimator> estimator;
    if (sampled_wams) {
        if (model.net.sensors.empty())
            throw InputError("sampled measurement mode requires sensors in the case");
        std::vector<double> weights;
        for (const auto& s : model.net.sensors) {
            channels.emplace_back(s, detail::mix_seed(sc.seed, static_cast<std::uint64_t>(
                                                                   s.sensor_id)));
            FrequencyFilterParams fp;
            fp.f0 = model.net.f0;
            fp.sample_period = s.report_period;
            fp.lp_time_const = s.filter_tc;
            sensors.emplace_back(fp);
            next_sample.push_back(0.0);
            seq.push_back(0);
            weights.push_back(s.weight);
        }
        estimator = std::make_unique<CoiEstimator>(weights, model.net.f0);
        model.set_external_reference(1.0);
    }

    int probe_gen = -1;
    double probe_w = 0.0;
    if (sc.probe) {
        probe_gen = model.find_machine(sc.probe->unit);
        probe_w = 2.0 * kPi * sc.probe->freq_hz;
    }
    auto probe_value = [&](double t) {
        if (probe_gen < 0 || t < sc.probe->start_time) return 0.0;
        return sc.probe->amplitude * std::sin(probe_w * (t - sc.probe->start_time));
    };

    // record layout
    SimulationRecord rec;
    rec.columns.push_back("time");
    for (const auto& m : model.machines) {
        rec.columns.push_back("omega_" + m.name);
        rec.columns.push_back("delta_" + m.name);
        rec.columns.push_back("vt_" + m.name);
        rec.columns.push_back("vs_" + m.name);
        rec.columns.push_back("pm_" + m.name);
        rec.columns.push_back("efd_" + m.name);
    }
    rec.columns.push_back("coi_exact");
    rec.columns.push_back("coi_estimate");
    rec.columns.push_back("coi_stale");
    for (const auto& [a, b] : sc.speed_pairs)
        rec.columns.push_back("omega_" + a + "-omega_" + b);
    rec.data.assign(rec.columns.size(), {});

    Eigen::VectorXd x = model.x_eq;

    auto record_row = [&](double t, const SystemModel::Outputs& out,
                          const Eigen::VectorXd& xs) {
        std::size_t c = 0;
        rec.data[c++].push_back(t);
        for (std::size_t i = 0; i < model.machines.size(); ++i) {
            const auto& b = model.mblock[i];
            rec.data[c++].push_back(xs(b.omega));
            rec.data[c++].push_back(xs(b.delta));
            rec.data[c++].push_back(out.vt[i]);
            rec.data[c++].push_back(out.vs[i]);
            rec.data[c++].push_back(b.pm >= 0 ? xs(b.pm) : 0.0);
            rec.data[c++].push_back(b.efd >= 0 ? xs(b.efd) : 0.0);
        }
        rec.data[c++].push_back(out.coi_exact);
        rec.data[c++].push_back(sampled_wams && estimator ? estimator->estimate()
                                                          : out.omega_bar);
        rec.data[c++].push_back(sampled_wams && estimator && estimator->stale() ? 1.0
                                                                                : 0.0);
        for (const auto& [a, b] : sc.speed_pairs) {
            const int ia = model.find_machine(a), ib = model.find_machine(b);
            rec.data[c++].push_back(xs(model.mblock[ia].omega) -
                                    xs(model.mblock[ib].omega));
        }
    };

    try {
        for (int k = 0; k <= n_steps; ++k) {
            const double t = k * sc.dt;

            auto [lo, hi] = event_at.equal_range(k);
            for (auto it = lo; it != hi; ++it) {
                const Event& ev = *it->second;
                switch (ev.kind) {
                    case EventKind::gen_trip:
                        model.apply_trip(model.find_machine(ev.target));
                        break;
                    case EventKind::vref_step:
                        model.machines[static_cast<std::size_t>(
                                           model.find_machine(ev.target))]
                            .vref += ev.magnitude;
                        break;
                    case EventKind::load_step:
                        model.apply_load_step(std::stoi(ev.target), 1.0 + ev.magnitude);
                        break;
                }
            }

            if (sampled_wams) {
                // sensors read the network state before the step is taken
                SystemModel::Outputs pre;
                model.derivative(x, pre);
                for (std::size_t s = 0; s < channels.size(); ++s) {
                    if (t + 1e-9 < next_sample[s]) continue;
                    next_sample[s] += model.net.sensors[s].report_period;
                    const double theta =
                        std::arg(pre.v(model.net.bus_index(model.net.sensors[s].bus)));
                    const double f = sensors[s].push(theta);
                    channels[s].send({model.net.sensors[s].sensor_id, t, f, seq[s]++});
                }
                for (auto& ch : channels)
                    for (const auto& d : ch.collect(t)) estimator->accept(d);
                model.set_external_reference(estimator->update(t));
            }

            SystemModel::Outputs out;
            const Eigen::VectorXd k1 =
                model.derivative(x, out, 0.0, probe_gen, probe_value(t));
            record_row(t, out, x);

            bool diverged = false;
            for (const auto& b : model.mblock)
                if (std::abs(x(b.omega) - 1.0) > 0.2) diverged = true;
            if (diverged) {
                rec.instability = true;
                break;
            }
            if (k == n_steps) break;

            const double h = sc.dt;
            const double tm = t + 0.5 * h, te = t + h;
            const Eigen::VectorXd k2 = model.derivative(
                x + 0.5 * h * k1, 0.0, probe_gen, probe_value(tm));
            const Eigen::VectorXd k3 = model.derivative(
                x + 0.5 * h * k2, 0.0, probe_gen, probe_value(tm));
            const Eigen::VectorXd k4 =
                model.derivative(x + h * k3, 0.0, probe_gen, probe_value(te));
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    } catch (const NumericalError& e) {
        rec.failure_time = rec.time().empty() ? 0.0 : rec.time().back();
        rec.failure_reason = e.what();
    }

    for (const auto& ch : channels)
        for (const auto& e : ch.audit()) rec.audit.push_back(e);
    rec.final_state = x;
    return rec;
}

}  // namespace coipss
