#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"

namespace coipss {

/// Folds the constant-impedance (reactive) part of each load into the
/// admittance matrix. The constant-current (active) part stays on the
/// right-hand side of the algebraic solve.
inline void fold_load_impedance(Eigen::MatrixXcd& y, const NetworkCase& net,
                                const std::vector<LoadModel>& loads) {
    for (const auto& l : loads) {
        const int i = net.bus_index(l.bus);
        y(i, i) += Complex(0.0, -l.q0 / (l.v0 * l.v0));
    }
}

/// Injection currents drawn by the constant-current (active) load parts.
/// Current magnitude p0/v0, in phase with the bus voltage, drawn from the bus.
inline Eigen::VectorXcd load_current_injection(const NetworkCase& net,
                                               const std::vector<LoadModel>& loads,
                                               const Eigen::VectorXcd& v) {
    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(v.size());
    for (const auto& l : loads) {
        const int i = net.bus_index(l.bus);
        const double mag = std::abs(v(i));
        if (mag < 1e-6) continue;  // extinguished bus, no current
        inj(i) -= (l.p0 / l.v0) * (v(i) / mag);
    }
    return inj;
}

struct AlgebraicOptions {
    double tol = 1e-12;          // max |dV| between sweeps
    int max_sweeps = 50;
    double kcl_tol = 1e-8;       // required residual of Y v = i at the solution
    /// When set, runs exactly this many sweeps with no convergence test. The
    /// result is then a smooth function of the inputs, which keeps finite
    /// differences clean during linearization.
    std::optional<int> fixed_sweeps;
};

/// Solves the network algebraic equations Y_aug v = i(v) by fixed-point
/// iteration on the voltage-dependent right-hand side. Machines enter as
/// Norton current sources behind transient reactance (their admittance is
/// already folded into y_aug); constant-current active loads and any
/// voltage-dependent part of the machine injection refresh each sweep.
class AlgebraicSolver {
public:
    using InjectionFn =
        std::function<Eigen::VectorXcd(const Eigen::VectorXcd& v)>;

    AlgebraicSolver(const NetworkCase& net, Eigen::MatrixXcd y_aug,
                    std::vector<LoadModel> loads,
                    std::vector<int> fixed_voltage_buses = {})
        : net_(&net),
          y_aug_(std::move(y_aug)),
          loads_(std::move(loads)),
          fixed_(std::move(fixed_voltage_buses)) {
        const int n = static_cast<int>(y_aug_.rows());
        free_.reserve(static_cast<std::size_t>(n));
        std::vector<bool> is_fixed(static_cast<std::size_t>(n), false);
        for (int b : fixed_) is_fixed[static_cast<std::size_t>(b)] = true;
        for (int i = 0; i < n; ++i)
            if (!is_fixed[static_cast<std::size_t>(i)]) free_.push_back(i);
        const int nf = static_cast<int>(free_.size());
        Eigen::MatrixXcd yff(nf, nf);
        yfx_.resize(nf, static_cast<int>(fixed_.size()));
        for (int r = 0; r < nf; ++r) {
            for (int c = 0; c < nf; ++c) yff(r, c) = y_aug_(free_[r], free_[c]);
            for (std::size_t c = 0; c < fixed_.size(); ++c)
                yfx_(r, static_cast<int>(c)) = y_aug_(free_[r], fixed_[c]);
        }
        lu_.compute(yff);
        sweeps_last_ = 0;
    }

    /// Voltage-dependent machine injections (saliency correction and the like).
    /// For voltage-independent sources pass a constant-returning functor, or
    /// use the network_algebraic_solve free function.
    Eigen::VectorXcd solve(const InjectionFn& machine_injections,
                           const Eigen::VectorXcd& v_guess,
                           const AlgebraicOptions& opts = {}) const {
        const int n = static_cast<int>(y_aug_.rows());
        Eigen::VectorXcd v = v_guess;
        const int nf = static_cast<int>(free_.size());

        auto sweep = [&](Eigen::VectorXcd& vio) {
            const Eigen::VectorXcd rhs_full =
                machine_injections(vio) + load_current_injection(*net_, loads_, vio);
            Eigen::VectorXcd rhs(nf);
            for (int r = 0; r < nf; ++r) rhs(r) = rhs_full(free_[r]);
            for (std::size_t c = 0; c < fixed_.size(); ++c)
                rhs -= yfx_.col(static_cast<int>(c)) * vio(fixed_[c]);
            const Eigen::VectorXcd vf = lu_.solve(rhs);
            double dv = 0.0;
            for (int r = 0; r < nf; ++r) {
                dv = std::max(dv, std::abs(vf(r) - vio(free_[r])));
                vio(free_[r]) = vf(r);
            }
            return dv;
        };

        if (opts.fixed_sweeps) {
            for (int k = 0; k < *opts.fixed_sweeps; ++k) sweep(v);
            sweeps_last_ = *opts.fixed_sweeps;
        } else {
            int k = 0;
            double dv = std::numeric_limits<double>::infinity();
            for (; k < opts.max_sweeps; ++k) {
                dv = sweep(v);
                if (dv <= opts.tol) break;
            }
            sweeps_last_ = k + 1;
            if (dv > opts.tol)
                throw ConvergenceError(
                    "network algebraic solve exceeded " +
                        std::to_string(opts.max_sweeps) + " sweeps (last dV " +
                        std::to_string(dv) + ")",
                    dv, k);
            const double res = kcl_residual(machine_injections, v);
            if (res > opts.kcl_tol)
                throw NumericalError("network solution KCL residual " +
                                     std::to_string(res) + " exceeds tolerance");
        }
        (void)n;
        return v;
    }

    /// Infinity norm of Y_aug v - i(v) over the free buses.
    double kcl_residual(const InjectionFn& machine_injections,
                        const Eigen::VectorXcd& v) const {
        const Eigen::VectorXcd rhs =
            machine_injections(v) + load_current_injection(*net_, loads_, v);
        const Eigen::VectorXcd res = y_aug_ * v - rhs;
        double worst = 0.0;
        for (int i : free_) worst = std::max(worst, std::abs(res(i)));
        return worst;
    }

    int sweeps_last() const { return sweeps_last_; }
    const Eigen::MatrixXcd& y_aug() const { return y_aug_; }

private:
    const NetworkCase* net_;
    Eigen::MatrixXcd y_aug_;
    std::vector<LoadModel> loads_;
    std::vector<int> fixed_;   // bus indices with externally fixed voltage
    std::vector<int> free_;
    Eigen::MatrixXcd yfx_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
    mutable int sweeps_last_;
};

/// Free-function form of the algebraic solve for voltage-independent machine
/// injections; constant-impedance load parts must already be folded into y_aug.
inline Eigen::VectorXcd network_algebraic_solve(const NetworkCase& net,
                                                const AdmittanceMatrix& y_aug,
                                                const Eigen::VectorXcd& machine_injections,
                                                const std::vector<LoadModel>& loads,
                                                const Eigen::VectorXcd& v_guess,
                                                const AlgebraicOptions& opts = {}) {
    AlgebraicSolver solver(net, y_aug.y, loads);
    return solver.solve([&](const Eigen::VectorXcd&) { return machine_injections; },
                        v_guess, opts);
}

}  // namespace coipss
