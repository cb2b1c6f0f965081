#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "coipss/errors.hpp"
#include "coipss/network.hpp"

namespace coipss {

/// Dynamic state of one two-axis machine with static AVR and a
/// droop/servo/turbine governor chain.
struct MachineState {
    double delta = 0.0;      // rotor angle, rad, system reference frame
    double omega = 1.0;      // rotor speed, pu
    double eq_p = 1.0;       // q-axis transient voltage, pu
    double ed_p = 0.0;       // d-axis transient voltage, pu
    double efd = 1.0;        // field voltage, pu (exciter lag state)
    double gov_valve = 0.0;  // servo state, pu power
    double pm = 0.0;         // mechanical power, pu (turbine state)
};

struct MachineStateDeriv {
    double delta = 0.0, omega = 0.0, eq_p = 0.0, ed_p = 0.0;
    double efd = 0.0, gov_valve = 0.0, pm = 0.0;
};

/// One unit's parameters converted to the system base, with the setpoints
/// back-solved at initialization.
struct MachineAssembly {
    std::string name;
    int bus_index = 0;
    bool online = true;
    MachineParams p;          // system base
    bool has_exciter = true;
    ExciterParams exc;
    bool has_governor = true;
    GovernorParams gov;       // droop and pmax on system base
    double omega_base = 2.0 * 3.14159265358979323846 * 60.0;  // rad/s
    double vref = 0.0;        // exciter voltage reference, pu
    double pref = 0.0;        // governor power reference, pu
};

inline MachineAssembly to_system_base(const Generator& g, const NetworkCase& net) {
    MachineAssembly a;
    a.name = g.name;
    a.bus_index = net.bus_index(g.bus);
    a.online = g.online;
    const double ratio = net.system_mva / g.machine.mva_base;
    a.p = g.machine;
    if (a.p.h <= 0.0) throw InputError("machine '" + g.name + "': inertia must be positive");
    if (!(a.p.xd >= a.p.xd_p && a.p.xd_p > 0.0))
        throw InputError("machine '" + g.name + "': requires xd >= xd_p > 0");
    if (a.p.td0_p <= 0.0) throw InputError("machine '" + g.name + "': td0_p must be positive");
    a.p.h = g.machine.h / ratio;
    a.p.d = g.machine.d / ratio;
    a.p.xd = g.machine.xd * ratio;
    a.p.xq = g.machine.xq * ratio;
    a.p.xd_p = g.machine.xd_p * ratio;
    a.p.xq_p = g.machine.xq_p * ratio;
    a.p.mva_base = net.system_mva;
    a.exc = g.exciter;
    a.gov = g.governor;
    a.gov.droop_r = g.governor.droop_r * ratio;
    a.gov.pmax = g.governor.pmax / ratio;
    a.omega_base = net.omega_base();
    return a;
}

/// Rotor equations of motion in terms of the per-unit accelerating power:
///   domega/dt = -(D/2H)(omega - omega0) + (Pm - Pe)/(2 H omega)
///   ddelta/dt = omega_base (omega - omega0)
struct SwingDerivative {
    double domega_dt;
    double ddelta_dt;
};

inline SwingDerivative swing_derivative(const MachineState& s, double pe,
                                        const MachineParams& p,
                                        double omega_base) {
    if (s.omega <= 0.0)
        throw NumericalError("rotor speed lost positivity (omega = " +
                             std::to_string(s.omega) + ")");
    SwingDerivative d;
    d.domega_dt = -(p.d / (2.0 * p.h)) * (s.omega - p.omega0) +
                  (s.pm - pe) / (2.0 * p.h * s.omega);
    d.ddelta_dt = omega_base * (s.omega - p.omega0);
    return d;
}

/// Damping coefficient of the swing equation linearized about a
/// nonequilibrium trajectory point: D + (Pm_bar - Pe_bar)/omega_bar^2.
inline double ltv_damping_coefficient(double pm_bar, double pe_bar,
                                      double omega_bar, double d) {
    if (omega_bar <= 0.0)
        throw NumericalError("trajectory speed must be positive");
    return d + (pm_bar - pe_bar) / (omega_bar * omega_bar);
}

struct TrajectoryPoint {
    double pm_bar = 0.0;
    double pe_bar = 0.0;
    double omega_bar = 1.0;
};

/// Coefficients of the swing equation linearized about a trajectory point:
///   d(dw)/dt = a_coeff * dw + b_coeff * (dPm - dPe).
struct SwingLinearization {
    double a_coeff;
    double b_coeff;
};

inline SwingLinearization ltv_swing_linearization(const TrajectoryPoint& t,
                                                  const MachineParams& p) {
    // a_coeff is evaluated through the trajectory damping coefficient so the
    // identity a = -(damping)/2H holds bitwise.
    const double damping = ltv_damping_coefficient(t.pm_bar, t.pe_bar, t.omega_bar, p.d);
    return SwingLinearization{-damping / (2.0 * p.h),
                              1.0 / (2.0 * p.h * t.omega_bar)};
}

/// Stator quantities in the machine dq frame for a given terminal voltage.
struct StatorSolution {
    double vd, vq;  // terminal voltage, machine frame
    double id, iq;  // stator current, machine frame (out of the machine)
    Complex i_out;  // stator current, system frame
    double pe;      // air-gap electrical power, pu
};

inline StatorSolution stator_solve(const MachineState& s, Complex v_terminal,
                                   const MachineParams& p) {
    const Complex rot = std::polar(1.0, -(s.delta - 3.14159265358979323846 / 2.0));
    const Complex vdq = v_terminal * rot;
    StatorSolution out;
    out.vd = vdq.real();
    out.vq = vdq.imag();
    out.id = (s.eq_p - out.vq) / p.xd_p;
    out.iq = (out.vd - s.ed_p) / p.xq_p;
    out.i_out = Complex(out.id, out.iq) / rot;
    out.pe = s.ed_p * out.id + s.eq_p * out.iq + (p.xq_p - p.xd_p) * out.id * out.iq;
    return out;
}

/// Norton injection for the network algebraic solve: stator current plus the
/// source-admittance term that cancels the 1/(j xd') folded into y_aug.
inline Complex norton_injection(const MachineState& s, Complex v_terminal,
                                const MachineParams& p) {
    const StatorSolution st = stator_solve(s, v_terminal, p);
    return st.i_out + v_terminal / Complex(0.0, p.xd_p);
}

/// Full state derivative of one machine for a given solved terminal voltage
/// and stabilizer output. The exciter input error follows the summing
/// junction convention vref + vs - |Vt|, and the field voltage is held inside
/// its limits with anti-windup.
inline MachineStateDeriv machine_derivatives(const MachineState& s,
                                             Complex v_terminal, double pss_vs,
                                             const MachineAssembly& a) {
    const StatorSolution st = stator_solve(s, v_terminal, a.p);
    MachineStateDeriv d;
    const SwingDerivative sw = swing_derivative(s, st.pe, a.p, a.omega_base);
    d.omega = sw.domega_dt;
    d.delta = sw.ddelta_dt;
    d.eq_p = (-s.eq_p - (a.p.xd - a.p.xd_p) * st.id + s.efd) / a.p.td0_p;
    d.ed_p = (-s.ed_p + (a.p.xq - a.p.xq_p) * st.iq) / a.p.tq0_p;

    if (a.has_exciter) {
        d.efd = (a.exc.ka * (a.vref + pss_vs - std::abs(v_terminal)) - s.efd) / a.exc.ta;
        if ((s.efd >= a.exc.efd_max && d.efd > 0.0) ||
            (s.efd <= a.exc.efd_min && d.efd < 0.0))
            d.efd = 0.0;
    }
    if (a.has_governor) {
        double target = a.pref - (s.omega - a.p.omega0) / a.gov.droop_r;
        target = std::clamp(target, 0.0, a.gov.pmax);
        d.gov_valve = (target - s.gov_valve) / a.gov.tg;
        d.pm = (s.gov_valve - s.pm) / a.gov.tt;
    }
    return d;
}

/// Back-solves the machine, exciter, and governor states from a power-flow
/// operating point so that every derivative vanishes.
inline MachineState init_machine_state(MachineAssembly& a, Complex v_terminal,
                                       Complex s_injection) {
    const Complex i = std::conj(s_injection / v_terminal);
    const Complex eq_locator = v_terminal + Complex(0.0, a.p.xq) * i;
    MachineState st;
    st.delta = std::arg(eq_locator);
    st.omega = a.p.omega0;
    const Complex rot = std::polar(1.0, -(st.delta - 3.14159265358979323846 / 2.0));
    const Complex vdq = v_terminal * rot;
    const Complex idq = i * rot;
    const double vd = vdq.real(), vq = vdq.imag();
    const double id = idq.real(), iq = idq.imag();
    st.eq_p = vq + a.p.xd_p * id;
    st.ed_p = vd - a.p.xq_p * iq;
    st.efd = st.eq_p + (a.p.xd - a.p.xd_p) * id;
    const double pe = st.ed_p * id + st.eq_p * iq + (a.p.xq_p - a.p.xd_p) * id * iq;
    st.pm = pe;
    st.gov_valve = pe;
    a.pref = pe;
    if (a.has_exciter) {
        if (st.efd > a.exc.efd_max || st.efd < a.exc.efd_min)
            throw NumericalError("machine '" + a.name +
                                 "': initial field voltage outside limits");
        a.vref = std::abs(v_terminal) + st.efd / a.exc.ka;
    }
    if (a.has_governor && (pe > a.gov.pmax || pe < 0.0))
        throw NumericalError("machine '" + a.name +
                             "': initial mechanical power outside governor limits");
    return st;
}

}  // namespace coipss
