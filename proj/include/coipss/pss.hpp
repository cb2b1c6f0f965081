#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"

namespace coipss {

/// Filter states of one stabilizer: washout followed by the lead-lag stages.
struct PssState {
    double washout = 0.0;
    std::vector<double> leadlag;

    static PssState zero(const PssConfig& cfg) {
        PssState s;
        s.leadlag.assign(cfg.leadlag_stages.size(), 0.0);
        return s;
    }
};

struct PssStateDeriv {
    double washout = 0.0;
    std::vector<double> leadlag;
};

/// Control error combining the local small-signal term with the steady-state
/// term referenced to the center-of-inertia speed estimate:
///   dnu = beta1 (omega_i - omega_bar) + beta2 (omega_bar - omega0).
/// When beta1 == beta2 the omega_bar contributions cancel algebraically; the
/// cancellation is performed structurally so the output is independent of
/// omega_bar to the last bit.
inline double control_error(double omega_i, double omega_bar, double omega0,
                            const PssConfig& cfg) {
    if (cfg.beta1 == cfg.beta2) return cfg.beta1 * (omega_i - omega0);
    return cfg.beta1 * (omega_i - omega_bar) + cfg.beta2 * (omega_bar - omega0);
}

/// The same control action expressed as a constant reference and a single
/// feedback signal: nu_ref = beta2 omega0 and nu = beta1 (omega_i - omega_bar)
/// + beta2 omega_bar, with dnu = nu - nu_ref.
struct ReferenceFeedback {
    double nu_ref;
    double nu;
};

inline ReferenceFeedback reference_and_feedback(double omega_i, double omega_bar,
                                                double omega0, const PssConfig& cfg) {
    ReferenceFeedback rf;
    rf.nu_ref = cfg.beta2 * omega0;
    rf.nu = cfg.beta1 * (omega_i - omega_bar) + cfg.beta2 * omega_bar;
    return rf;
}

/// Equivalent single-signal form: the stabilizer behaves as a conventional
/// speed-deviation unit whose input speed has been replaced by
///   omega_tilde = (beta1/beta2)(omega_i - omega_bar) + omega_bar   (beta2 > 0)
///   omega_tilde = beta1 (omega_i - omega_bar) + omega0             (beta2 = 0)
/// with the downstream gain rescaled by beta2. For beta1 == beta2 != 0 the
/// signal reduces to the local speed itself.
inline double equivalent_speed_signal(double omega_i, double omega_bar,
                                      double omega0, const PssConfig& cfg) {
    if (cfg.beta2 > 0.0) {
        if (cfg.beta1 == cfg.beta2) return omega_i;
        return (cfg.beta1 / cfg.beta2) * (omega_i - omega_bar) + omega_bar;
    }
    return cfg.beta1 * (omega_i - omega_bar) + omega0;
}

/// Output of the washout stage s*Tw/(1 + s*Tw) for the current state and input.
inline double washout_output(const PssState& s, double delta_nu) {
    return delta_nu - s.washout;
}

/// Output of the full filter chain (washout then lead-lag stages) before the
/// gain and limiter.
inline double pss_chain_output(const PssState& s, double delta_nu,
                               const PssConfig& cfg) {
    double u = washout_output(s, delta_nu);
    for (std::size_t k = 0; k < cfg.leadlag_stages.size(); ++k) {
        const auto& [tn, td] = cfg.leadlag_stages[k];
        u = s.leadlag[k] + (tn / td) * (u - s.leadlag[k]);
    }
    return u;
}

/// State derivatives of the filter chain. Each stage is realized as a minimal
/// first-order section: washout x' = (u - x)/Tw with output u - x, lead-lag
/// x' = (u - x)/Td with output x + (Tn/Td)(u - x).
inline PssStateDeriv pss_derivatives(const PssState& s, double delta_nu,
                                     const PssConfig& cfg) {
    PssStateDeriv d;
    d.washout = (delta_nu - s.washout) / cfg.washout_tw;
    d.leadlag.resize(cfg.leadlag_stages.size());
    double u = washout_output(s, delta_nu);
    for (std::size_t k = 0; k < cfg.leadlag_stages.size(); ++k) {
        const auto& [tn, td] = cfg.leadlag_stages[k];
        d.leadlag[k] = (u - s.leadlag[k]) / td;
        u = s.leadlag[k] + (tn / td) * (u - s.leadlag[k]);
    }
    return d;
}

/// Stabilizer output: gain applied to the chain output, then clamped to the
/// configured limits.
inline double pss_output(const PssState& s, double delta_nu, const PssConfig& cfg) {
    const double raw = cfg.gain_k * pss_chain_output(s, delta_nu, cfg);
    return std::clamp(raw, cfg.vs_min, cfg.vs_max);
}

}  // namespace coipss
