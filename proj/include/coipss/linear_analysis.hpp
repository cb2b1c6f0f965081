#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <future>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "coipss/errors.hpp"
#include "coipss/system_model.hpp"

namespace coipss {

enum class ModeClass { frequency_regulation, inter_area, local, control, other };

inline const char* to_string(ModeClass c) {
    switch (c) {
        case ModeClass::frequency_regulation: return "frequency_regulation";
        case ModeClass::inter_area: return "inter_area";
        case ModeClass::local: return "local";
        case ModeClass::control: return "control";
        case ModeClass::other: return "other";
    }
    return "other";
}

/// State-space model of the closed system about an equilibrium, with the
/// probe input column and the feedback-synthesis output row.
struct LinearModel {
    Eigen::MatrixXd a;
    Eigen::VectorXd b_p;
    Eigen::VectorXd c_nu;
    std::vector<std::string> state_labels;

    std::vector<int> speed_states;       // online machine rotor speeds
    std::vector<std::string> machine_names;
    std::vector<int> machine_areas;
    std::vector<int> sensor_f_states;    // frequency-estimate states, Eq-21 order
    int local_speed_state = -1;          // studied unit's speed entry in c_nu
    double beta1_studied = 0.0;

    int size() const { return static_cast<int>(a.rows()); }
};

struct LinearizeOptions {
    double perturbation = 1e-6;
    double equilibrium_tol = 1e-7;
    /// Sweep count for the frozen network solve during differencing.
    int network_sweeps = 40;
};

/// Central finite differences of the closed-loop derivative about an
/// equilibrium. The probe column is differenced over the compensator input
/// channel of the studied unit; the output row is assembled analytically from
/// the sensor weights and the studied unit's blend parameters.
inline LinearModel linearize(SystemModel& model, const Eigen::VectorXd& x0,
                             const LinearizeOptions& opts = {}) {
    model.set_fixed_sweeps(opts.network_sweeps);
    const Eigen::VectorXd f0 = model.derivative(x0);
    const double residual = f0.cwiseAbs().maxCoeff();
    if (residual > opts.equilibrium_tol) {
        model.set_fixed_sweeps(std::nullopt);
        throw NumericalError(
            "linearization requires an equilibrium (derivative norm " +
            std::to_string(residual) + ")");
    }

    const int n = model.n_states;
    LinearModel lm;
    lm.a.resize(n, n);
    lm.state_labels = model.labels;
    const double h = opts.perturbation;
    Eigen::VectorXd xp = x0, xm = x0;
    for (int j = 0; j < n; ++j) {
        xp(j) = x0(j) + h;
        xm(j) = x0(j) - h;
        const Eigen::VectorXd fp = model.derivative(xp);
        const Eigen::VectorXd fm = model.derivative(xm);
        lm.a.col(j) = (fp - fm) / (2.0 * h);
        xp(j) = x0(j);
        xm(j) = x0(j);
    }

    lm.b_p = Eigen::VectorXd::Zero(n);
    if (model.probe_gen >= 0) {
        const Eigen::VectorXd fp = model.derivative(x0, +h);
        const Eigen::VectorXd fm = model.derivative(x0, -h);
        lm.b_p = (fp - fm) / (2.0 * h);
    }
    model.set_fixed_sweeps(std::nullopt);

    for (std::size_t i = 0; i < model.machines.size(); ++i) {
        if (!model.running[i]) continue;
        lm.speed_states.push_back(model.mblock[i].omega);
        lm.machine_names.push_back(model.machines[i].name);
        const int gi = model.net.generator_index(model.machines[i].name);
        lm.machine_areas.push_back(
            model.net.buses[static_cast<std::size_t>(
                               model.net.bus_index(model.net.generators[
                                   static_cast<std::size_t>(gi)].bus))].area);
    }

    lm.c_nu = Eigen::VectorXd::Zero(n);
    if (model.probe_gen >= 0 && model.pss[static_cast<std::size_t>(model.probe_gen)] &&
        model.opts.wams == WamsSynthesis::sensor_filters) {
        const PssConfig& cfg = *model.pss[static_cast<std::size_t>(model.probe_gen)];
        lm.beta1_studied = cfg.beta1;
        for (std::size_t k = 0; k < model.sensors.size(); ++k) {
            const int idx = model.sensor_state0 + 2 * static_cast<int>(k) + 1;
            lm.sensor_f_states.push_back(idx);
            lm.c_nu(idx) =
                model.sensors[k].weight * (cfg.beta1 - cfg.beta2) / model.net.f0;
        }
        lm.local_speed_state = model.mblock[static_cast<std::size_t>(model.probe_gen)].omega;
        lm.c_nu(lm.local_speed_state) = -cfg.beta1;
    }
    return lm;
}

struct ModalResult {
    std::complex<double> eigenvalue;
    double frequency_hz = 0.0;
    double damping_ratio = 0.0;
    Eigen::VectorXcd mode_shape;  // over machine speed states, unit max magnitude
    ModeClass classification = ModeClass::other;
    double residual = 0.0;
};

/// All eigenpairs of the system matrix with per-pair residual verification.
inline std::vector<ModalResult> eigensolve(const LinearModel& model) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(model.a);
    if (solver.info() != Eigen::Success)
        throw NumericalError("eigensolver failed to converge (matrix norm " +
                             std::to_string(model.a.norm()) + ", size " +
                             std::to_string(model.size()) + ")");
    std::vector<ModalResult> out;
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    for (int k = 0; k < values.size(); ++k) {
        ModalResult r;
        r.eigenvalue = values(k);
        const Eigen::VectorXcd v = vectors.col(k);
        r.residual = (model.a * v - values(k) * v).norm() / v.norm();
        r.frequency_hz = std::abs(values(k).imag()) / (2.0 * kPi);
        const double mag = std::abs(values(k));
        r.damping_ratio = mag > 0.0 ? -values(k).real() / mag : 0.0;

        r.mode_shape.resize(static_cast<Eigen::Index>(model.speed_states.size()));
        for (std::size_t i = 0; i < model.speed_states.size(); ++i)
            r.mode_shape(static_cast<Eigen::Index>(i)) = v(model.speed_states[i]);
        Eigen::Index imax = 0;
        double vmax = 0.0;
        for (Eigen::Index i = 0; i < r.mode_shape.size(); ++i)
            if (std::abs(r.mode_shape(i)) > vmax) {
                vmax = std::abs(r.mode_shape(i));
                imax = i;
            }
        if (vmax > 0.0) r.mode_shape /= r.mode_shape(imax);  // max component -> 1+0j
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const ModalResult& a, const ModalResult& b) {
        return a.frequency_hz < b.frequency_hz;
    });
    return out;
}

/// Attaches a classification to every oscillatory mode:
///  - below 0.1 Hz with every participating machine in phase: frequency regulation
///  - electromechanical band with machine groups anti-phase across areas: inter-area
///  - electromechanical band otherwise: local
///  - everything else oscillatory: control; non-oscillatory: other
inline void classify_modes(std::vector<ModalResult>& modes, const LinearModel& model) {
    for (auto& m : modes) {
        if (std::abs(m.eigenvalue.imag()) < 1e-6) {
            m.classification = ModeClass::other;
            continue;
        }
        const double f = m.frequency_hz;
        std::vector<double> phase(model.speed_states.size(), 0.0);
        std::vector<bool> significant(model.speed_states.size(), false);
        for (std::size_t i = 0; i < model.speed_states.size(); ++i) {
            const auto c = m.mode_shape(static_cast<Eigen::Index>(i));
            significant[i] = std::abs(c) >= 0.1;
            phase[i] = std::arg(c);
        }
        if (f < 0.1) {
            bool in_phase = true;
            for (std::size_t i = 0; i < phase.size(); ++i)
                if (significant[i] && std::abs(phase[i]) > kPi / 6.0) in_phase = false;
            m.classification = in_phase ? ModeClass::frequency_regulation
                                        : ModeClass::control;
        } else if (f <= 3.0) {
            bool cross_area_antiphase = false;
            for (std::size_t i = 0; i < phase.size(); ++i) {
                if (!significant[i] || std::abs(m.mode_shape(static_cast<Eigen::Index>(i))) < 0.2)
                    continue;
                for (std::size_t j = i + 1; j < phase.size(); ++j) {
                    if (!significant[j] ||
                        std::abs(m.mode_shape(static_cast<Eigen::Index>(j))) < 0.2)
                        continue;
                    if (model.machine_areas[i] == model.machine_areas[j]) continue;
                    const double d = std::abs(
                        std::remainder(phase[i] - phase[j], 2.0 * kPi));
                    if (d >= 2.0 * kPi / 3.0) cross_area_antiphase = true;
                }
            }
            m.classification =
                cross_area_antiphase ? ModeClass::inter_area : ModeClass::local;
        } else {
            m.classification = ModeClass::control;
        }
    }
}

enum class SweepParam { beta1, beta2 };

struct SweepPoint {
    double value = 0.0;
    std::vector<ModalResult> modes;
};

struct TrackedMode {
    std::vector<std::complex<double>> path;  // one entry per grid point
    ModeClass initial_class = ModeClass::other;
    bool flagged = false;  // continuation became ambiguous somewhere
};

struct SweepResult {
    SweepParam param = SweepParam::beta1;
    std::vector<SweepPoint> points;
    std::vector<TrackedMode> tracked;
};

/// Root-locus sweep of one blend parameter with the other held fixed, applied
/// to every stabilizer-equipped unit in unison. Grid points are evaluated
/// concurrently over read-only copies and merged by index; oscillatory modes
/// are then tracked across the grid by nearest-neighbor continuation.
inline SweepResult beta_sweep(const NetworkCase& base, SweepParam param,
                              const std::vector<double>& grid, double fixed_other,
                              double gain_k) {
    if (grid.empty()) throw InputError("sweep grid must not be empty");
    SweepResult result;
    result.param = param;

    auto eval_point = [&](double value) {
        NetworkCase net = base;
        for (auto& g : net.generators) {
            if (!g.pss) continue;
            g.pss->beta1 = param == SweepParam::beta1 ? value : fixed_other;
            g.pss->beta2 = param == SweepParam::beta2 ? value : fixed_other;
            g.pss->gain_k = gain_k;
        }
        SystemModel model = build_system_model(net);
        LinearModel lm = linearize(model, model.x_eq);
        auto modes = eigensolve(lm);
        classify_modes(modes, lm);
        SweepPoint p;
        p.value = value;
        p.modes = std::move(modes);
        return p;
    };

    std::vector<std::future<SweepPoint>> futures;
    futures.reserve(grid.size());
    for (double v : grid)
        futures.push_back(std::async(std::launch::async, eval_point, v));
    for (auto& f : futures) result.points.push_back(f.get());

    // continuation over the positive-imaginary half plane
    auto oscillatory = [](const SweepPoint& p) {
        std::vector<std::complex<double>> xs;
        for (const auto& m : p.modes)
            if (m.eigenvalue.imag() > 1e-6) xs.push_back(m.eigenvalue);
        return xs;
    };
    const auto first = oscillatory(result.points.front());
    for (std::size_t k = 0; k < first.size(); ++k) {
        TrackedMode tm;
        tm.path.push_back(first[k]);
        for (const auto& m : result.points.front().modes)
            if (m.eigenvalue == first[k]) tm.initial_class = m.classification;
        result.tracked.push_back(std::move(tm));
    }
    for (std::size_t p = 1; p < result.points.size(); ++p) {
        const auto candidates = oscillatory(result.points[p]);
        std::vector<int> chosen(result.tracked.size(), -1);
        for (std::size_t i = 0; i < result.tracked.size(); ++i) {
            // tracking radius: half the spacing to the closest other mode at
            // the previous grid point
            double neighbor = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < result.tracked.size(); ++j)
                if (j != i)
                    neighbor = std::min(neighbor,
                                        std::abs(result.tracked[i].path.back() -
                                                 result.tracked[j].path.back()));
            const double radius = 0.5 * neighbor;
            double best = std::numeric_limits<double>::infinity();
            int arg = -1;
            for (std::size_t c = 0; c < candidates.size(); ++c) {
                const double d = std::abs(candidates[c] - result.tracked[i].path.back());
                if (d < best) {
                    best = d;
                    arg = static_cast<int>(c);
                }
            }
            if (arg < 0) {
                result.tracked[i].flagged = true;
                result.tracked[i].path.push_back(result.tracked[i].path.back());
                continue;
            }
            if (best > radius) result.tracked[i].flagged = true;
            for (std::size_t j = 0; j < i; ++j)
                if (chosen[j] == arg) {
                    result.tracked[i].flagged = true;
                    result.tracked[j].flagged = true;
                }
            chosen[i] = arg;
            result.tracked[i].path.push_back(candidates[static_cast<std::size_t>(arg)]);
        }
    }
    return result;
}

/// Configures the single-unit open-loop study: only the studied unit keeps a
/// stabilizer, normalized to unity gain and driven through the probe channel,
/// with the measurement layer realized as continuous sensor filters.
inline SystemModel build_loop_study(const NetworkCase& base, const std::string& unit,
                                    double beta1, double beta2) {
    NetworkCase net = base;
    bool found = false;
    for (auto& g : net.generators) {
        if (g.name == unit) {
            found = true;
            if (!g.pss) throw InputError("unit '" + unit + "' carries no stabilizer");
            g.pss->beta1 = beta1;
            g.pss->beta2 = beta2;
            g.pss->gain_k = 1.0;  // unity-gain loop transfer convention
        } else {
            g.pss.reset();
        }
    }
    if (!found) throw InputError("unknown generator '" + unit + "'");
    SystemModelOptions opts;
    opts.wams = WamsSynthesis::sensor_filters;
    SystemModel model = build_system_model(net, opts);
    model.probe_gen = model.find_machine(unit);
    model.pss_mode[static_cast<std::size_t>(model.probe_gen)] = PssLoopMode::open_input;
    return model;
}

}  // namespace coipss
