#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"

namespace coipss {

struct PowerFlowSolution {
    std::vector<Complex> voltage;        // per bus, system reference frame
    std::vector<Complex> gen_injection;  // per generator, pu complex power
    double max_mismatch = 0.0;
    int iterations = 0;

    Complex bus_voltage(const NetworkCase& net, int bus_id) const {
        return voltage[static_cast<std::size_t>(net.bus_index(bus_id))];
    }
};

struct PowerFlowOptions {
    double tol = 1e-8;  // pu, infinity norm of the mismatch vector
    int max_iter = 30;
};

/// Newton-Raphson power flow in polar form, flat start. Generator buses are
/// held at their voltage setpoints (pv) except the slack, which also fixes the
/// angle reference. Loads enter at nominal power; the constant-current /
/// constant-impedance split applies only to the dynamic model afterwards.
inline PowerFlowSolution solve_power_flow(const NetworkCase& net,
                                          const PowerFlowOptions& opts = {}) {
    const int n = static_cast<int>(net.buses.size());
    int slack_count = 0;
    for (const auto& b : net.buses)
        if (b.kind == BusKind::slack) ++slack_count;
    if (slack_count != 1)
        throw InputError("power flow requires exactly one slack bus, found " +
                         std::to_string(slack_count));

    const AdmittanceMatrix ybus = build_admittance(net);
    const Eigen::MatrixXcd& y = ybus.y;

    // Scheduled injections: generation minus load per bus.
    std::vector<double> p_sched(n, 0.0), q_sched(n, 0.0);
    for (const auto& g : net.generators)
        if (g.online) p_sched[net.bus_index(g.bus)] += g.p_dispatch;
    for (const auto& l : net.loads) {
        p_sched[net.bus_index(l.bus)] -= l.p0;
        q_sched[net.bus_index(l.bus)] -= l.q0;
    }

    std::vector<double> vm(n), va(n);
    for (int i = 0; i < n; ++i) {
        vm[i] = net.buses[i].voltage_mag;
        va[i] = net.buses[i].kind == BusKind::slack ? net.buses[i].voltage_ang : 0.0;
        if (vm[i] <= 0.0) throw InputError("bus voltage setpoints must be positive");
    }

    std::vector<int> pvpq, pq;  // angle unknowns; magnitude unknowns
    for (int i = 0; i < n; ++i) {
        if (net.buses[i].kind != BusKind::slack) pvpq.push_back(i);
        if (net.buses[i].kind == BusKind::pq) pq.push_back(i);
    }
    const int n_ang = static_cast<int>(pvpq.size());
    const int n_mag = static_cast<int>(pq.size());

    auto injected = [&](int i) {
        Complex s(0.0, 0.0);
        const Complex vi = std::polar(vm[i], va[i]);
        for (int j = 0; j < n; ++j) {
            if (y(i, j) == Complex(0.0, 0.0)) continue;
            s += vi * std::conj(y(i, j) * std::polar(vm[j], va[j]));
        }
        return s;
    };

    double max_mis = 0.0;
    int iter = 0;
    for (;; ++iter) {
        Eigen::VectorXd mismatch(n_ang + n_mag);
        for (int k = 0; k < n_ang; ++k)
            mismatch(k) = p_sched[pvpq[k]] - injected(pvpq[k]).real();
        for (int k = 0; k < n_mag; ++k)
            mismatch(n_ang + k) = q_sched[pq[k]] - injected(pq[k]).imag();
        max_mis = mismatch.size() ? mismatch.cwiseAbs().maxCoeff() : 0.0;
        if (max_mis <= opts.tol) break;
        if (iter >= opts.max_iter)
            throw ConvergenceError("power flow did not converge in " +
                                       std::to_string(opts.max_iter) +
                                       " iterations (max mismatch " +
                                       std::to_string(max_mis) + " pu)",
                                   max_mis, iter);

        // Polar Jacobian: dP/dθ, dP/dV, dQ/dθ, dQ/dV.
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_ang + n_mag, n_ang + n_mag);
        for (int r = 0; r < n_ang + n_mag; ++r) {
            const bool row_q = r >= n_ang;
            const int i = row_q ? pq[r - n_ang] : pvpq[r];
            for (int c = 0; c < n_ang + n_mag; ++c) {
                const bool col_v = c >= n_ang;
                const int j = col_v ? pq[c - n_ang] : pvpq[c];
                const Complex yij = y(i, j);
                if (yij == Complex(0.0, 0.0) && i != j) continue;
                const double g = yij.real(), b = yij.imag();
                const double tij = va[i] - va[j];
                double val = 0.0;
                if (!row_q && !col_v) {          // dP_i/dθ_j
                    if (i == j) val = -injected(i).imag() - b * vm[i] * vm[i];
                    else val = vm[i] * vm[j] * (g * std::sin(tij) - b * std::cos(tij));
                } else if (!row_q && col_v) {    // dP_i/dV_j
                    if (i == j) val = injected(i).real() / vm[i] + g * vm[i];
                    else val = vm[i] * (g * std::cos(tij) + b * std::sin(tij));
                } else if (row_q && !col_v) {    // dQ_i/dθ_j
                    if (i == j) val = injected(i).real() - g * vm[i] * vm[i];
                    else val = -vm[i] * vm[j] * (g * std::cos(tij) + b * std::sin(tij));
                } else {                         // dQ_i/dV_j
                    if (i == j) val = injected(i).imag() / vm[i] - b * vm[i];
                    else val = vm[i] * (g * std::sin(tij) - b * std::cos(tij));
                }
                jac(r, c) = val;
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const Eigen::VectorXd dx = lu.solve(mismatch);
        if (!dx.allFinite())
            throw NumericalError("power flow Jacobian is singular");
        for (int k = 0; k < n_ang; ++k) va[pvpq[k]] += dx(k);
        for (int k = 0; k < n_mag; ++k) vm[pq[k]] += dx(n_ang + k);
    }

    PowerFlowSolution sol;
    sol.voltage.resize(n);
    for (int i = 0; i < n; ++i) sol.voltage[i] = std::polar(vm[i], va[i]);
    sol.max_mismatch = max_mis;
    sol.iterations = iter;

    // Generator injections: net injection plus local load at the terminal bus,
    // split between co-located units in proportion to dispatch.
    std::vector<Complex> bus_gen(n, Complex(0, 0));
    for (int i = 0; i < n; ++i) bus_gen[i] = injected(i);
    for (const auto& l : net.loads)
        bus_gen[net.bus_index(l.bus)] += Complex(l.p0, l.q0);
    sol.gen_injection.assign(net.generators.size(), Complex(0, 0));
    for (std::size_t gi = 0; gi < net.generators.size(); ++gi) {
        const auto& g = net.generators[gi];
        if (!g.online) continue;
        const int bi = net.bus_index(g.bus);
        double dispatch_at_bus = 0.0;
        int units_at_bus = 0;
        for (const auto& other : net.generators)
            if (other.online && net.bus_index(other.bus) == bi) {
                dispatch_at_bus += other.p_dispatch;
                ++units_at_bus;
            }
        const double share = (dispatch_at_bus > 0.0)
                                 ? g.p_dispatch / dispatch_at_bus
                                 : 1.0 / static_cast<double>(units_at_bus);
        sol.gen_injection[gi] = share * bus_gen[bi];
    }
    return sol;
}

/// Complex power flowing into a branch at its from end.
inline Complex branch_flow_from(const NetworkCase& net, const Branch& br,
                                const PowerFlowSolution& sol) {
    if (!br.status) return {0.0, 0.0};
    const Complex vi = sol.voltage[static_cast<std::size_t>(net.bus_index(br.from_bus))];
    const Complex vj = sol.voltage[static_cast<std::size_t>(net.bus_index(br.to_bus))];
    const Complex ys = 1.0 / Complex(br.series_r, br.series_x);
    const Complex ysh(0.0, br.shunt_b / 2.0);
    const double t = br.tap;
    const Complex iij = (ys + ysh) / (t * t) * vi - ys / t * vj;
    return vi * std::conj(iij);
}

}  // namespace coipss
