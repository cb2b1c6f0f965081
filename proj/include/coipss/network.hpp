#pragma once

#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coipss/errors.hpp"

namespace coipss {

using Complex = std::complex<double>;

enum class BusKind { slack, pv, pq };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::pq;
    double voltage_mag = 1.0;   // pu setpoint (slack/pv) or initial guess (pq)
    double voltage_ang = 0.0;   // rad (slack reference)
    double base_kv = 230.0;
    double shunt_b = 0.0;       // pu susceptance of fixed shunt devices (capacitor banks)
    int area = 0;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double series_r = 0.0;  // pu
    double series_x = 0.0;  // pu
    double shunt_b = 0.0;   // pu total line charging
    double tap = 1.0;       // off-nominal ratio on the from side
    bool status = true;
};

/// Static load. The active component is evaluated as constant current and the
/// reactive component as constant impedance, both anchored at the power-flow
/// solution voltage v0.
struct LoadModel {
    int bus = 0;
    double p0 = 0.0;  // pu MW at v0
    double q0 = 0.0;  // pu MVAr at v0
    double v0 = 1.0;  // pu anchor voltage, set from the power-flow solution
};

struct MachineParams {
    double h = 3.5;        // inertia constant, s (machine base)
    double d = 0.0;        // damping torque coefficient, pu/pu speed
    double omega0 = 1.0;   // pu synchronous speed
    double xd = 1.8;
    double xq = 1.7;
    double xd_p = 0.3;
    double xq_p = 0.55;
    double td0_p = 8.0;    // s
    double tq0_p = 0.4;    // s
    double mva_base = 900.0;
};

struct ExciterParams {
    double ka = 200.0;
    double ta = 0.01;      // s
    double efd_min = -6.0;
    double efd_max = 6.0;
    double vref = 0.0;     // 0 = back-solved at initialization
};

struct GovernorParams {
    double droop_r = 0.05;  // pu speed / pu power, machine base
    double tg = 0.2;        // servo time constant, s
    double tt = 0.5;        // turbine time constant, s
    double pmax = 1.1;      // pu, machine base
};

struct PssConfig {
    double beta1 = 0.0;     // weight on the local small-signal term, [0, 1]
    double beta2 = 0.0;     // weight on the steady-state term, [0, 1]
    double gain_k = 25.0;
    double washout_tw = 10.0;                                     // s
    std::vector<std::pair<double, double>> leadlag_stages{{0.25, 0.04}};  // (t_num, t_den) s
    double vs_min = -0.1;   // pu
    double vs_max = 0.1;    // pu

    void validate() const {
        if (beta1 < 0.0 || beta1 > 1.0 || beta2 < 0.0 || beta2 > 1.0)
            throw InputError("pss: beta1 and beta2 must lie in [0, 1]");
        if (washout_tw <= 0.0) throw InputError("pss: washout_tw must be positive");
        if (vs_min >= vs_max) throw InputError("pss: vs_min must be below vs_max");
        for (const auto& [tn, td] : leadlag_stages)
            if (tn <= 0.0 || td <= 0.0) throw InputError("pss: lead-lag time constants must be positive");
    }
};

struct Generator {
    std::string name;
    int bus = 0;
    double p_dispatch = 0.0;  // pu system base; ignored for the slack unit
    bool online = true;
    MachineParams machine;
    ExciterParams exciter;
    GovernorParams governor;
    std::optional<PssConfig> pss;
};

/// A frequency sensor feeding the center-of-inertia speed estimator,
/// together with the emulated datagram channel it reports over.
struct SensorSpec {
    int sensor_id = 0;
    int bus = 0;
    double weight = 0.0;        // 0 = assign the arithmetic mean 1/|K| at load time
    double delay_mean = 0.0;    // s
    double jitter_std = 0.0;    // s
    double drop_prob = 0.0;
    double report_period = 0.03;  // s
    double filter_tc = 0.02;      // s, each low-pass stage of the frequency filter
    double outage_start = -1.0;   // s; datagrams sampled inside [start, end) are lost
    double outage_end = -1.0;
};

struct NetworkCase {
    std::string name;
    double system_mva = 100.0;
    double f0 = 60.0;  // Hz
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<LoadModel> loads;
    std::vector<Generator> generators;
    std::vector<SensorSpec> sensors;

    int bus_index(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return static_cast<int>(i);
        throw StructuralError("unknown bus id " + std::to_string(bus_id));
    }

    int generator_index(const std::string& gname) const {
        for (std::size_t i = 0; i < generators.size(); ++i)
            if (generators[i].name == gname) return static_cast<int>(i);
        throw InputError("unknown generator '" + gname + "'");
    }

    double omega_base() const { return 2.0 * 3.14159265358979323846 * f0; }
};

/// Bus admittance matrix. Stored dense; the cases this library targets are
/// desk scale, where factorization cost is negligible.
struct AdmittanceMatrix {
    Eigen::MatrixXcd y;

    int dimension() const { return static_cast<int>(y.rows()); }
};

struct AdmittanceOptions {
    /// Include each online machine's source admittance 1/(j xd') at its
    /// terminal bus, as used by the dynamic network solution.
    bool include_machine_sources = false;
};

inline AdmittanceMatrix build_admittance(const NetworkCase& net,
                                         const AdmittanceOptions& opts = {}) {
    const int n = static_cast<int>(net.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);

    for (const auto& br : net.branches) {
        const int i = net.bus_index(br.from_bus);  // throws on dangling endpoints
        const int j = net.bus_index(br.to_bus);
        if (!br.status) continue;
        const Complex z(br.series_r, br.series_x);
        if (std::abs(z) <= 0.0)
            throw StructuralError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " has zero series impedance");
        const Complex ys = 1.0 / z;
        const Complex ysh(0.0, br.shunt_b / 2.0);
        const double t = br.tap;
        if (t <= 0.0) throw StructuralError("branch tap must be positive");
        y(i, i) += (ys + ysh) / (t * t);
        y(j, j) += ys + ysh;
        y(i, j) -= ys / t;
        y(j, i) -= ys / t;
    }
    for (const auto& b : net.buses) {
        const int i = net.bus_index(b.id);
        y(i, i) += Complex(0.0, b.shunt_b);
    }
    if (opts.include_machine_sources) {
        for (const auto& g : net.generators) {
            if (!g.online) continue;
            const int i = net.bus_index(g.bus);
            const double xdp_sys = g.machine.xd_p * net.system_mva / g.machine.mva_base;
            y(i, i) += 1.0 / Complex(0.0, xdp_sys);
        }
    }
    return AdmittanceMatrix{std::move(y)};
}

/// Removes a unit from service: it no longer injects current and drops out of
/// the center-of-inertia aggregation set. Returns a new case value.
inline NetworkCase apply_generator_trip(const NetworkCase& net, const std::string& unit) {
    const int gi = net.generator_index(unit);
    if (!net.generators[gi].online)
        throw InputError("generator '" + unit + "' is already offline");

    NetworkCase tripped = net;
    tripped.generators[gi].online = false;

    // Every island with load must keep at least one online source.
    const int n = static_cast<int>(net.buses.size());
    std::vector<int> component(n, -1);
    int n_comp = 0;
    for (int s = 0; s < n; ++s) {
        if (component[s] >= 0) continue;
        std::vector<int> stack{s};
        component[s] = n_comp;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& br : tripped.branches) {
                if (!br.status) continue;
                const int i = tripped.bus_index(br.from_bus);
                const int j = tripped.bus_index(br.to_bus);
                int v = -1;
                if (i == u) v = j;
                else if (j == u) v = i;
                if (v >= 0 && component[v] < 0) {
                    component[v] = n_comp;
                    stack.push_back(v);
                }
            }
        }
        ++n_comp;
    }
    for (int c = 0; c < n_comp; ++c) {
        bool has_gen = false, has_load = false;
        for (const auto& g : tripped.generators)
            if (g.online && component[tripped.bus_index(g.bus)] == c) has_gen = true;
        for (const auto& l : tripped.loads)
            if ((l.p0 != 0.0 || l.q0 != 0.0) && component[tripped.bus_index(l.bus)] == c)
                has_load = true;
        if (has_load && !has_gen)
            throw StructuralError("tripping '" + unit + "' leaves an island without generation");
    }
    return tripped;
}

/// Sum of online inertia on the system base, the denominator of the
/// center-of-inertia speed.
inline double total_online_inertia(const NetworkCase& net) {
    double sum = 0.0;
    for (const auto& g : net.generators)
        if (g.online) sum += g.machine.h * g.machine.mva_base / net.system_mva;
    return sum;
}

}  // namespace coipss
