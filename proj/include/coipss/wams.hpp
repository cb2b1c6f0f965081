#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"

namespace coipss {

inline constexpr double kPi = 3.14159265358979323846;

struct Datagram {
    int sensor_id = 0;
    double sample_time = 0.0;
    double value_hz = 0.0;
    std::int64_t seq = 0;
};

struct FrequencyFilterParams {
    double f0 = 60.0;            // Hz
    double sample_period = 0.03;  // s
    double lp_time_const = 0.02;  // s, each of the two low-pass stages
};

/// Discrete bus-frequency sensor: backward difference of the unwrapped bus
/// voltage angle followed by two first-order low-pass stages (exact
/// zero-order-hold discretization). Reports the nominal frequency until two
/// samples have arrived.
class FrequencySensor {
public:
    explicit FrequencySensor(const FrequencyFilterParams& p = {}) : p_(p) {
        if (p_.sample_period <= 0.0 || p_.lp_time_const <= 0.0)
            throw InputError("frequency sensor: time constants must be positive");
        alpha_ = std::exp(-p_.sample_period / p_.lp_time_const);
    }

    /// Feeds one angle sample (radians) and returns the frequency estimate in Hz.
    double push(double theta) {
        if (!have_prev_) {
            prev_theta_ = theta;
            have_prev_ = true;
            return p_.f0;  // warm-up
        }
        // unwrap relative to the previous sample
        double dtheta = theta - prev_theta_;
        dtheta = std::remainder(dtheta, 2.0 * kPi);
        prev_theta_ += dtheta;
        const double raw = dtheta / p_.sample_period;  // rad/s
        lp1_ += (1.0 - alpha_) * (raw - lp1_);
        lp2_ += (1.0 - alpha_) * (lp1_ - lp2_);
        warmed_ = true;
        return p_.f0 + lp2_ / (2.0 * kPi);
    }

    bool warmed_up() const { return warmed_; }
    const FrequencyFilterParams& params() const { return p_; }

    /// Magnitude response of the discrete cascade at a given frequency (Hz),
    /// from angle amplitude (rad) to reported frequency deviation (Hz).
    static double cascade_gain(const FrequencyFilterParams& p, double freq_hz) {
        const double w = 2.0 * kPi * freq_hz;
        const std::complex<double> z = std::polar(1.0, w * p.sample_period);
        const double a = std::exp(-p.sample_period / p.lp_time_const);
        const std::complex<double> diff = (1.0 - 1.0 / z) / p.sample_period;
        const std::complex<double> lp = (1.0 - a) / (1.0 - a / z);
        return std::abs(diff * lp * lp) / (2.0 * kPi);
    }

private:
    FrequencyFilterParams p_;
    double alpha_ = 0.0;
    double prev_theta_ = 0.0;
    bool have_prev_ = false;
    bool warmed_ = false;
    double lp1_ = 0.0;  // rad/s
    double lp2_ = 0.0;  // rad/s
};

/// Runs a sensor over a uniformly sampled angle history and returns the final
/// frequency estimate in Hz.
inline double bus_frequency(const std::vector<double>& angle_history,
                            const FrequencyFilterParams& p = {}) {
    FrequencySensor sensor(p);
    double f = p.f0;
    for (double theta : angle_history) f = sensor.push(theta);
    return f;
}

/// Inertia-weighted mean rotor speed of the online units, the classical
/// center-of-inertia definition.
inline double coi_speed_exact(const std::vector<double>& speeds,
                              const std::vector<double>& inertias) {
    if (speeds.empty() || speeds.size() != inertias.size())
        throw InputError("center-of-inertia speed requires a nonempty matched set");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        if (inertias[i] <= 0.0) throw InputError("inertia constants must be positive");
        num += inertias[i] * speeds[i];
        den += inertias[i];
    }
    return num / den;
}

/// Weighted per-unit average of sensor frequency values. Weights are
/// renormalized to sum to one; when empty, the arithmetic mean is used.
inline double coi_speed_estimate(const std::vector<double>& values_hz,
                                 std::vector<double> weights, double f0) {
    if (values_hz.empty()) throw InputError("speed estimate requires at least one sensor");
    if (weights.empty())
        weights.assign(values_hz.size(), 1.0 / static_cast<double>(values_hz.size()));
    if (weights.size() != values_hz.size())
        throw InputError("sensor weights must match the value set");
    double wsum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw InputError("sensor weights must be nonnegative");
        wsum += w;
    }
    if (wsum <= 0.0) throw InputError("sensor weights must not all vanish");
    double est = 0.0;
    for (std::size_t k = 0; k < values_hz.size(); ++k)
        est += (weights[k] / wsum) * values_hz[k];
    return est / f0;
}

/// Receiver-side state of the center-of-inertia estimator: last-value hold per
/// sensor keyed by sample time, staleness cutoff with weight renormalization,
/// and a hold-last policy when every sensor has gone stale.
class CoiEstimator {
public:
    CoiEstimator(std::vector<double> weights, double f0,
                 double staleness_cutoff = 2.0)
        : weights_(std::move(weights)),
          f0_(f0),
          cutoff_(staleness_cutoff),
          values_(weights_.size(), f0),
          sample_times_(weights_.size(), -1.0),
          have_(weights_.size(), false) {
        if (weights_.empty()) throw InputError("estimator requires at least one sensor");
    }

    /// Sensor ids index the weight vector. Stale and out-of-order datagrams
    /// (older sample time than the held value) are discarded.
    void accept(const Datagram& d) {
        const auto k = static_cast<std::size_t>(d.sensor_id);
        if (k >= weights_.size()) throw InputError("datagram from unknown sensor");
        if (have_[k] && d.sample_time <= sample_times_[k]) return;
        values_[k] = d.value_hz;
        sample_times_[k] = d.sample_time;
        have_[k] = true;
    }

    /// Recomputes the estimate at the given time. Sensors whose held value is
    /// older than the cutoff are excluded and the remaining weights
    /// renormalized; with no fresh sensor the previous estimate is held and
    /// the staleness flag raised.
    double update(double now) {
        std::vector<double> vals, wts;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            if (!have_[k]) continue;
            if (now - sample_times_[k] > cutoff_) continue;
            vals.push_back(values_[k]);
            wts.push_back(weights_[k]);
        }
        if (vals.empty()) {
            stale_ = true;
            return estimate_;
        }
        stale_ = false;
        estimate_ = coi_speed_estimate(vals, wts, f0_);
        return estimate_;
    }

    double estimate() const { return estimate_; }
    bool stale() const { return stale_; }

private:
    std::vector<double> weights_;
    double f0_;
    double cutoff_;
    std::vector<double> values_;        // Hz
    std::vector<double> sample_times_;  // s
    std::vector<bool> have_;
    double estimate_ = 1.0;  // pu, seeded at synchronous speed
    bool stale_ = false;
};

struct ChannelAuditEntry {
    int sensor_id = 0;
    std::int64_t seq = 0;
    double sample_time = 0.0;
    double delivery_time = 0.0;  // meaningful only when not dropped
    bool dropped = false;
};

/// Emulated datagram channel: per-packet delay drawn from a truncated-at-zero
/// normal distribution, independent drops, optional outage window, and no
/// ordering guarantees. Deterministic for a given seed.
class DatagramChannel {
public:
    DatagramChannel(const SensorSpec& spec, std::uint64_t seed)
        : spec_(spec), rng_(seed) {}

    void send(const Datagram& d) {
        ChannelAuditEntry entry;
        entry.sensor_id = d.sensor_id;
        entry.seq = d.seq;
        entry.sample_time = d.sample_time;
        bool dropped = false;
        if (spec_.outage_start >= 0.0 && d.sample_time >= spec_.outage_start &&
            d.sample_time < spec_.outage_end)
            dropped = true;
        if (!dropped && spec_.drop_prob > 0.0) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            dropped = u(rng_) < spec_.drop_prob;
        }
        if (dropped) {
            entry.dropped = true;
            audit_.push_back(entry);
            return;
        }
        double delay = spec_.delay_mean;
        if (spec_.jitter_std > 0.0) {
            std::normal_distribution<double> n(spec_.delay_mean, spec_.jitter_std);
            delay = n(rng_);
        }
        delay = std::max(0.0, delay);
        entry.delivery_time = d.sample_time + delay;
        audit_.push_back(entry);
        in_flight_.push_back({entry.delivery_time, d});
    }

    /// Returns every datagram whose delivery time has passed, ordered by
    /// delivery time (ties by sequence number) for determinism.
    std::vector<Datagram> collect(double now) {
        std::vector<std::pair<double, Datagram>> due;
        auto it = in_flight_.begin();
        while (it != in_flight_.end()) {
            if (it->first <= now) {
                due.push_back(*it);
                it = in_flight_.erase(it);
            } else {
                ++it;
            }
        }
        std::sort(due.begin(), due.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second.seq < b.second.seq;
        });
        std::vector<Datagram> out;
        out.reserve(due.size());
        for (auto& [t, d] : due) out.push_back(d);
        return out;
    }

    const std::vector<ChannelAuditEntry>& audit() const { return audit_; }
    const SensorSpec& spec() const { return spec_; }

private:
    SensorSpec spec_;
    std::mt19937_64 rng_;
    std::vector<std::pair<double, Datagram>> in_flight_;
    std::vector<ChannelAuditEntry> audit_;
};

/// Pushes a batch of outgoing datagrams through the channel and returns what
/// has arrived by `now`.
inline std::vector<Datagram> channel_step(DatagramChannel& channel, double now,
                                          const std::vector<Datagram>& outgoing) {
    for (const auto& d : outgoing) channel.send(d);
    return channel.collect(now);
}

}  // namespace coipss
