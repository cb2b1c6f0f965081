#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coipss/algebraic.hpp"
#include "coipss/errors.hpp"
#include "coipss/machine.hpp"
#include "coipss/network.hpp"
#include "coipss/power_flow.hpp"
#include "coipss/pss.hpp"
#include "coipss/wams.hpp"

namespace coipss {

/// How the center-of-inertia speed reference fed to the stabilizers is
/// synthesized.
///   exact_coi      - inertia-weighted rotor speeds (ideal-communication studies)
///   sensor_filters - continuous derivative-filter states at the sensor buses
///                    (open-loop response and delay analysis)
///   external       - value held by the caller, updated from the emulated
///                    measurement channels between integration steps
enum class WamsSynthesis { exact_coi, sensor_filters, external };

/// Stabilizer loop wiring per unit.
///   closed      - error synthesized from the states, output drives the exciter
///   open_input  - compensator driven only by the exogenous probe channel,
///                 output drives the exciter (loop transfer construction)
///   open_output - error synthesized from the states, output recorded but not
///                 fed back (time-domain loop probing)
enum class PssLoopMode { closed, open_input, open_output };

struct SystemModelOptions {
    WamsSynthesis wams = WamsSynthesis::exact_coi;
    double sensor_lp_time_const = 0.02;  // s, continuous filter stages
    std::vector<int> infinite_buses;     // bus ids held at their power-flow voltage
    std::map<std::string, double> vref_overrides;  // explicit exciter references
    double init_residual_tol = 1e-8;
    PowerFlowOptions pf;
};

class SystemModel {
public:
    struct MachineBlock {
        int delta = -1, omega = -1, eqp = -1, edp = -1;
        int efd = -1, valve = -1, pm = -1;
    };
    struct PssBlock {
        int washout = -1;
        int leadlag0 = -1;
        int n_leadlag = 0;
    };
    struct SensorModel {
        int bus_index = 0;
        double weight = 0.0;  // normalized over the sensor set
    };

    NetworkCase net;
    PowerFlowSolution pf;
    SystemModelOptions opts;
    std::vector<MachineAssembly> machines;      // online-at-build units
    std::vector<std::optional<PssConfig>> pss;  // parallel to machines
    std::vector<PssLoopMode> pss_mode;          // parallel to machines
    std::vector<bool> running;                  // cleared by trips during a run
    std::vector<SensorModel> sensors;
    int probe_gen = -1;  // unit whose compensator input carries the probe channel

    std::vector<MachineBlock> mblock;
    std::vector<PssBlock> pblock;
    int sensor_state0 = -1;
    int n_states = 0;
    std::vector<std::string> labels;

    Eigen::VectorXd x_eq;
    Eigen::VectorXcd v_eq;
    double init_residual = 0.0;

    /// Evaluation products of one derivative call, for recording.
    struct Outputs {
        Eigen::VectorXcd v;
        std::vector<double> pe, vt, vs, delta_nu;
        double omega_bar = 1.0;
        double coi_exact = 1.0;
    };

    int find_machine(const std::string& name) const {
        for (std::size_t i = 0; i < machines.size(); ++i)
            if (machines[i].name == name) return static_cast<int>(i);
        throw InputError("unknown generator '" + name + "'");
    }

    double f0() const { return net.f0; }

    /// External estimate consumed in WamsSynthesis::external mode.
    void set_external_reference(double omega_bar) { omega_bar_ext_ = omega_bar; }
    double external_reference() const { return omega_bar_ext_; }

    /// Runs the network solve with exactly this many sweeps and a fixed
    /// starting point, making the derivative a smooth function of the state.
    void set_fixed_sweeps(std::optional<int> sweeps) { fixed_sweeps_ = sweeps; }

    /// Removes a unit from service mid-run: no injection, no center-of-inertia
    /// participation, frozen states.
    void apply_trip(int machine_index) {
        if (!running[static_cast<std::size_t>(machine_index)])
            throw InputError("generator '" + machines[machine_index].name +
                             "' is already offline");
        running[static_cast<std::size_t>(machine_index)] = false;
        net.generators[net.generator_index(machines[machine_index].name)].online = false;
        rebuild_solver();
    }

    void apply_load_step(int bus_id, double factor) {
        for (auto& l : net.loads)
            if (l.bus == bus_id) {
                l.p0 *= factor;
                l.q0 *= factor;
            }
        rebuild_solver();
    }

    Eigen::VectorXd derivative(const Eigen::VectorXd& x, double u_probe = 0.0,
                               int vs_add_gen = -1, double vs_add = 0.0) const {
        Outputs out;
        return derivative_impl(x, u_probe, vs_add_gen, vs_add, out);
    }

    Eigen::VectorXd derivative(const Eigen::VectorXd& x, Outputs& out,
                               double u_probe = 0.0, int vs_add_gen = -1,
                               double vs_add = 0.0) const {
        return derivative_impl(x, u_probe, vs_add_gen, vs_add, out);
    }

    double coi_exact_speed(const Eigen::VectorXd& x) const {
        std::vector<double> speeds, inertias;
        for (std::size_t i = 0; i < machines.size(); ++i) {
            if (!running[i]) continue;
            speeds.push_back(x(mblock[i].omega));
            inertias.push_back(machines[i].p.h);
        }
        return coi_speed_exact(speeds, inertias);
    }

    const AlgebraicSolver& solver() const { return *solver_; }
    const Eigen::VectorXcd& last_network_solution() const { return v_cache_; }

private:
    friend SystemModel build_system_model(const NetworkCase&, const SystemModelOptions&);

    void rebuild_solver() {
        AdmittanceOptions ao;
        ao.include_machine_sources = false;
        Eigen::MatrixXcd y = build_admittance(net, ao).y;
        for (std::size_t i = 0; i < machines.size(); ++i) {
            if (!running[i]) continue;
            y(machines[i].bus_index, machines[i].bus_index) +=
                1.0 / Complex(0.0, machines[i].p.xd_p);
        }
        fold_load_impedance(y, net, net.loads);
        std::vector<int> fixed;
        for (int bus_id : opts.infinite_buses) fixed.push_back(net.bus_index(bus_id));
        solver_ = std::make_unique<AlgebraicSolver>(net, std::move(y), net.loads, fixed);
    }

    Eigen::VectorXcd solve_network(const Eigen::VectorXd& x) const {
        auto injections = [&](const Eigen::VectorXcd& v) {
            Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(v.size());
            for (std::size_t i = 0; i < machines.size(); ++i) {
                if (!running[i]) continue;
                MachineState ms = unpack_machine(x, static_cast<int>(i));
                inj(machines[i].bus_index) +=
                    norton_injection(ms, v(machines[i].bus_index), machines[i].p);
            }
            return inj;
        };
        AlgebraicOptions ao;
        Eigen::VectorXcd guess;
        if (fixed_sweeps_) {
            ao.fixed_sweeps = *fixed_sweeps_;
            guess = v_eq;  // fixed start keeps the map smooth
        } else {
            guess = v_cache_.size() ? v_cache_ : v_eq;
        }
        Eigen::VectorXcd v = solver_->solve(injections, guess, ao);
        v_cache_ = v;
        return v;
    }

    MachineState unpack_machine(const Eigen::VectorXd& x, int i) const {
        const MachineBlock& b = mblock[static_cast<std::size_t>(i)];
        MachineState s;
        s.delta = x(b.delta);
        s.omega = x(b.omega);
        s.eq_p = x(b.eqp);
        s.ed_p = x(b.edp);
        s.efd = b.efd >= 0 ? x(b.efd) : frozen_efd_[static_cast<std::size_t>(i)];
        s.gov_valve = b.valve >= 0 ? x(b.valve) : 0.0;
        s.pm = b.pm >= 0 ? x(b.pm) : frozen_pm_[static_cast<std::size_t>(i)];
        return s;
    }

    Eigen::VectorXd derivative_impl(const Eigen::VectorXd& x, double u_probe,
                                    int vs_add_gen, double vs_add,
                                    Outputs& out) const {
        const Eigen::VectorXcd v = solve_network(x);
        out.v = v;

        // center-of-inertia reference
        double omega_bar = 1.0;
        switch (opts.wams) {
            case WamsSynthesis::exact_coi:
                omega_bar = coi_exact_speed(x);
                break;
            case WamsSynthesis::sensor_filters: {
                double est = 0.0;
                for (std::size_t k = 0; k < sensors.size(); ++k) {
                    const double fdev = x(sensor_state0 + 2 * static_cast<int>(k) + 1);
                    est += sensors[k].weight * (net.f0 + fdev);
                }
                omega_bar = est / net.f0;
                break;
            }
            case WamsSynthesis::external:
                omega_bar = omega_bar_ext_;
                break;
        }
        out.omega_bar = omega_bar;
        out.coi_exact = coi_exact_speed(x);

        Eigen::VectorXd dx = Eigen::VectorXd::Zero(n_states);
        out.pe.assign(machines.size(), 0.0);
        out.vt.assign(machines.size(), 0.0);
        out.vs.assign(machines.size(), 0.0);
        out.delta_nu.assign(machines.size(), 0.0);

        for (std::size_t i = 0; i < machines.size(); ++i) {
            const MachineBlock& b = mblock[i];
            const Complex vt = v(machines[i].bus_index);
            out.vt[i] = std::abs(vt);
            if (!running[i]) continue;  // frozen states

            const MachineState ms = unpack_machine(x, static_cast<int>(i));

            double vs_record = 0.0, vs_to_exciter = 0.0, dnu = 0.0;
            if (pss[i]) {
                const PssConfig& cfg = *pss[i];
                PssState ps;
                ps.washout = x(pblock[i].washout);
                ps.leadlag.resize(static_cast<std::size_t>(pblock[i].n_leadlag));
                for (int k = 0; k < pblock[i].n_leadlag; ++k)
                    ps.leadlag[static_cast<std::size_t>(k)] = x(pblock[i].leadlag0 + k);

                dnu = control_error(ms.omega, omega_bar, machines[i].p.omega0, cfg);
                double chain_input = dnu;
                if (pss_mode[i] == PssLoopMode::open_input)
                    // the probe channel plays the reference nu_ref, which
                    // enters the error junction with a negative sign
                    chain_input = (static_cast<int>(i) == probe_gen) ? -u_probe : 0.0;
                vs_record = pss_output(ps, chain_input, cfg);
                vs_to_exciter =
                    (pss_mode[i] == PssLoopMode::open_output) ? 0.0 : vs_record;

                const PssStateDeriv pd = pss_derivatives(ps, chain_input, cfg);
                dx(pblock[i].washout) = pd.washout;
                for (int k = 0; k < pblock[i].n_leadlag; ++k)
                    dx(pblock[i].leadlag0 + k) = pd.leadlag[static_cast<std::size_t>(k)];
            }
            out.vs[i] = vs_record;
            out.delta_nu[i] = dnu;

            if (static_cast<int>(i) == vs_add_gen) vs_to_exciter += vs_add;

            const MachineStateDeriv md =
                machine_derivatives(ms, vt, vs_to_exciter, machines[i]);
            const StatorSolution st = stator_solve(ms, vt, machines[i].p);
            out.pe[i] = st.pe;
            dx(b.delta) = md.delta;
            dx(b.omega) = md.omega;
            dx(b.eqp) = md.eq_p;
            dx(b.edp) = md.ed_p;
            if (b.efd >= 0) dx(b.efd) = md.efd;
            if (b.valve >= 0) dx(b.valve) = md.gov_valve;
            if (b.pm >= 0) dx(b.pm) = md.pm;
        }

        if (opts.wams == WamsSynthesis::sensor_filters) {
            const double tlp = opts.sensor_lp_time_const;
            for (std::size_t k = 0; k < sensors.size(); ++k) {
                const int i1 = sensor_state0 + 2 * static_cast<int>(k);
                const int i2 = i1 + 1;
                const double theta_raw = std::arg(v(sensors[k].bus_index));
                // keep the tracked angle continuous relative to the filter state
                const double theta = x(i1) + std::remainder(theta_raw - x(i1), 2.0 * kPi);
                const double y1 = (theta - x(i1)) / tlp;  // filtered dtheta/dt, rad/s
                dx(i1) = y1;
                dx(i2) = (y1 / (2.0 * kPi) - x(i2)) / tlp;  // Hz deviation
            }
        }
        return dx;
    }

    std::unique_ptr<AlgebraicSolver> solver_;
    std::vector<double> frozen_efd_, frozen_pm_;
    std::optional<int> fixed_sweeps_;
    double omega_bar_ext_ = 1.0;
    mutable Eigen::VectorXcd v_cache_;
};

/// Assembles the closed system at its power-flow equilibrium. Throws when the
/// back-solved state fails to be an equilibrium to the configured tolerance,
/// naming the worst state.
inline SystemModel build_system_model(const NetworkCase& net_in,
                                      const SystemModelOptions& opts = {}) {
    SystemModel m;
    m.net = net_in;
    m.opts = opts;
    for (const auto& g : m.net.generators)
        if (g.pss) g.pss->validate();

    m.pf = solve_power_flow(m.net, opts.pf);

    // anchor the static load model at the power-flow voltages
    for (auto& l : m.net.loads)
        l.v0 = std::abs(m.pf.voltage[static_cast<std::size_t>(m.net.bus_index(l.bus))]);

    // state layout
    int idx = 0;
    for (std::size_t gi = 0; gi < m.net.generators.size(); ++gi) {
        const Generator& g = m.net.generators[gi];
        if (!g.online) continue;
        MachineAssembly a = to_system_base(g, m.net);
        a.has_exciter = g.exciter.ka > 0.0;
        a.has_governor = g.governor.droop_r > 0.0;
        SystemModel::MachineBlock b;
        b.delta = idx++;
        b.omega = idx++;
        b.eqp = idx++;
        b.edp = idx++;
        m.labels.push_back(g.name + ".delta");
        m.labels.push_back(g.name + ".omega");
        m.labels.push_back(g.name + ".eqp");
        m.labels.push_back(g.name + ".edp");
        if (a.has_exciter) {
            b.efd = idx++;
            m.labels.push_back(g.name + ".efd");
        }
        if (a.has_governor) {
            b.valve = idx++;
            b.pm = idx++;
            m.labels.push_back(g.name + ".valve");
            m.labels.push_back(g.name + ".pm");
        }
        m.machines.push_back(std::move(a));
        m.mblock.push_back(b);
        m.pss.push_back(g.pss);
        m.pss_mode.push_back(PssLoopMode::closed);
        m.running.push_back(true);
    }
    for (std::size_t i = 0; i < m.machines.size(); ++i) {
        SystemModel::PssBlock pb;
        if (m.pss[i]) {
            pb.washout = idx++;
            m.labels.push_back(m.machines[i].name + ".pss.washout");
            pb.n_leadlag = static_cast<int>(m.pss[i]->leadlag_stages.size());
            pb.leadlag0 = idx;
            for (int k = 0; k < pb.n_leadlag; ++k) {
                m.labels.push_back(m.machines[i].name + ".pss.leadlag" +
                                   std::to_string(k + 1));
                ++idx;
            }
        }
        m.pblock.push_back(pb);
    }
    if (opts.wams == WamsSynthesis::sensor_filters) {
        if (m.net.sensors.empty())
            throw InputError("sensor-filter synthesis requires sensors in the case");
        m.sensor_state0 = idx;
        double wsum = 0.0;
        for (const auto& s : m.net.sensors) {
            if (s.weight < 0.0) throw InputError("sensor weights must be nonnegative");
            wsum += s.weight;
        }
        for (const auto& s : m.net.sensors) {
            SystemModel::SensorModel sm;
            sm.bus_index = m.net.bus_index(s.bus);
            sm.weight = wsum > 0.0
                            ? s.weight / wsum
                            : 1.0 / static_cast<double>(m.net.sensors.size());
            m.sensors.push_back(sm);
            m.labels.push_back("sensor" + std::to_string(s.sensor_id) + ".theta_lp");
            m.labels.push_back("sensor" + std::to_string(s.sensor_id) + ".f");
            idx += 2;
        }
    }
    m.n_states = idx;

    // equilibrium state from the power flow
    m.x_eq = Eigen::VectorXd::Zero(m.n_states);
    m.frozen_efd_.assign(m.machines.size(), 0.0);
    m.frozen_pm_.assign(m.machines.size(), 0.0);
    int online_index = 0;
    for (std::size_t gi = 0; gi < m.net.generators.size(); ++gi) {
        const Generator& g = m.net.generators[gi];
        if (!g.online) continue;
        const int i = online_index++;
        MachineAssembly& a = m.machines[static_cast<std::size_t>(i)];
        const Complex vt =
            m.pf.voltage[static_cast<std::size_t>(m.net.bus_index(g.bus))];
        MachineState st = init_machine_state(a, vt, m.pf.gen_injection[gi]);
        if (auto it = opts.vref_overrides.find(g.name); it != opts.vref_overrides.end())
            a.vref = it->second;
        const auto& b = m.mblock[static_cast<std::size_t>(i)];
        m.x_eq(b.delta) = st.delta;
        m.x_eq(b.omega) = st.omega;
        m.x_eq(b.eqp) = st.eq_p;
        m.x_eq(b.edp) = st.ed_p;
        if (b.efd >= 0) m.x_eq(b.efd) = st.efd;
        if (b.valve >= 0) m.x_eq(b.valve) = st.gov_valve;
        if (b.pm >= 0) m.x_eq(b.pm) = st.pm;
        m.frozen_efd_[static_cast<std::size_t>(i)] = st.efd;
        m.frozen_pm_[static_cast<std::size_t>(i)] = st.pm;
    }
    m.v_eq.resize(m.pf.voltage.size());
    for (std::size_t i = 0; i < m.pf.voltage.size(); ++i) m.v_eq(i) = m.pf.voltage[i];
    if (opts.wams == WamsSynthesis::sensor_filters)
        for (std::size_t k = 0; k < m.sensors.size(); ++k)
            m.x_eq(m.sensor_state0 + 2 * static_cast<int>(k)) =
                std::arg(m.v_eq(m.sensors[k].bus_index));

    m.rebuild_solver();

    const Eigen::VectorXd dx0 = m.derivative(m.x_eq);
    Eigen::Index worst = 0;
    m.init_residual = dx0.cwiseAbs().maxCoeff(&worst);
    if (m.init_residual > opts.init_residual_tol)
        throw NumericalError("initialization is not an equilibrium: |d/dt " +
                             m.labels[static_cast<std::size_t>(worst)] + "| = " +
                             std::to_string(m.init_residual));
    return m;
}

}  // namespace coipss
