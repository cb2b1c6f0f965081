#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coipss/errors.hpp"
#include "coipss/linear_analysis.hpp"

namespace coipss {

/// Delayed-entry coefficients of the feedback-synthesis row. For sensor k,
/// gamma_k = alpha_k (beta1 - beta2) / f0; the scaled form
/// gamma_hat_k = (alpha_k / f0)(1 - beta2/beta1) isolates the ratio
/// beta2/beta1 that governs delay sensitivity.
struct GammaCoefficients {
    std::vector<double> gamma;
    std::vector<double> gamma_hat;
};

enum class GammaRange { positive_bounded, zero, negative };

inline GammaRange gamma_range_class(double beta1, double beta2) {
    if (beta1 <= 0.0) throw InputError("gamma_hat requires beta1 > 0");
    const double ratio = beta2 / beta1;
    if (ratio < 1.0) return GammaRange::positive_bounded;
    if (ratio == 1.0) return GammaRange::zero;
    return GammaRange::negative;
}

inline GammaCoefficients gamma_coefficients(const PssConfig& cfg,
                                            const std::vector<double>& weights,
                                            double f0) {
    GammaCoefficients out;
    out.gamma.reserve(weights.size());
    for (double a : weights) out.gamma.push_back(a * (cfg.beta1 - cfg.beta2) / f0);
    if (cfg.beta1 > 0.0) {
        out.gamma_hat.reserve(weights.size());
        for (double a : weights)
            out.gamma_hat.push_back((a / f0) * (1.0 - cfg.beta2 / cfg.beta1));
    } else if (cfg.beta2 != cfg.beta1) {
        throw InputError("gamma_hat is undefined for beta1 = 0");
    } else {
        out.gamma_hat.assign(weights.size(), 0.0);
    }
    return out;
}

struct ResponsePoint {
    double omega_rad = 0.0;
    double gain_db = 0.0;
    double phase_deg = 0.0;
    Complex complex_value;
};

struct ResponseSet {
    std::vector<ResponsePoint> points;
    std::vector<std::string> skipped;  // reports for grid points left out
};

/// Logarithmic frequency grid in rad/s covering [f_lo, f_hi] Hz.
inline std::vector<double> log_frequency_grid(double f_lo = 0.01, double f_hi = 10.0,
                                              int n = 400) {
    if (f_lo <= 0.0 || f_hi <= f_lo || n < 2)
        throw InputError("frequency grid requires 0 < f_lo < f_hi and n >= 2");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(n));
    const double lo = std::log10(f_lo), hi = std::log10(f_hi);
    for (int k = 0; k < n; ++k)
        grid.push_back(2.0 * kPi *
                       std::pow(10.0, lo + (hi - lo) * k / static_cast<double>(n - 1)));
    return grid;
}

namespace detail {

/// One dense complex solve H(jw) = C (jwI - A)^{-1} B. All response paths go
/// through this routine so that configurations with identical effective C rows
/// produce bitwise identical values.
inline bool response_point(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           const Eigen::VectorXcd& c, double omega,
                           ResponsePoint& out) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXcd m = (-a).cast<Complex>();
    for (int i = 0; i < n; ++i) m(i, i) += Complex(0.0, omega);
    const Eigen::VectorXcd bc = b.cast<Complex>();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    const Eigen::VectorXcd x = lu.solve(bc);
    if (!x.allFinite()) return false;
    const double resid = (m * x - bc).norm();
    if (!(resid <= 1e-6 * (bc.norm() + 1.0))) return false;
    Complex h(0.0, 0.0);
    for (int i = 0; i < n; ++i) h += c(i) * x(i);
    out.omega_rad = omega;
    out.complex_value = h;
    out.gain_db = 20.0 * std::log10(std::abs(h));
    out.phase_deg = std::arg(h) * 180.0 / kPi;
    return true;
}

}  // namespace detail

/// Open-loop response H(jw) = C_nu (jwI - A)^{-1} B_p over the grid.
inline ResponseSet open_loop_response(const LinearModel& model,
                                      const std::vector<double>& omega_grid) {
    ResponseSet out;
    const Eigen::VectorXcd c = model.c_nu.cast<Complex>();
    for (double w : omega_grid) {
        ResponsePoint p;
        if (detail::response_point(model.a, model.b_p, c, w, p))
            out.points.push_back(p);
        else
            out.skipped.push_back("omega " + std::to_string(w) +
                                  " rad/s: singular resolvent, point skipped");
    }
    return out;
}

/// Delayed response: each sensor entry of the output row rotates by
/// exp(-j w tau_k) while the local-speed entry is untouched. Entries whose
/// coefficient or delay is exactly zero are reused verbatim, so a zero delay
/// vector or equal blend weights reproduce the undelayed response bit for bit.
inline ResponseSet delayed_response(const LinearModel& model,
                                    const std::vector<double>& delays,
                                    const std::vector<double>& omega_grid) {
    if (delays.size() != model.sensor_f_states.size())
        throw InputError("delay vector must match the sensor set");
    for (double tau : delays)
        if (tau < 0.0) throw InputError("delays must be nonnegative");
    ResponseSet out;
    Eigen::VectorXcd c = model.c_nu.cast<Complex>();
    for (double w : omega_grid) {
        for (std::size_t k = 0; k < delays.size(); ++k) {
            const int idx = model.sensor_f_states[k];
            const double gamma_k = model.c_nu(idx);
            if (delays[k] == 0.0 || gamma_k == 0.0)
                c(idx) = gamma_k;
            else
                c(idx) = gamma_k * std::polar(1.0, -w * delays[k]);
        }
        ResponsePoint p;
        if (detail::response_point(model.a, model.b_p, c, w, p))
            out.points.push_back(p);
        else
            out.skipped.push_back("omega " + std::to_string(w) +
                                  " rad/s: singular resolvent, point skipped");
    }
    return out;
}

/// Phase series unwrapped to a continuous curve, for band comparisons.
inline std::vector<double> unwrapped_phase_deg(const std::vector<ResponsePoint>& pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    double offset = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        double ph = pts[k].phase_deg + offset;
        if (k > 0) {
            while (ph - out.back() > 180.0) {
                ph -= 360.0;
                offset -= 360.0;
            }
            while (ph - out.back() < -180.0) {
                ph += 360.0;
                offset += 360.0;
            }
        }
        out.push_back(ph);
    }
    return out;
}

}  // namespace coipss
