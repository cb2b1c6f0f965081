#pragma once

#include "coipss/network.hpp"

namespace coipss {

/// Bundled 13-bus, 14-branch, four-generator two-area test case.
///
/// Klein-Rogers-Kundur line and machine constants on a 100 MVA system base,
/// with the generation capacity redistributed so that G1 and G3 each carry 5%
/// of the total system MVA and G2/G4 split the remainder equally. Inertia
/// scales with unit MVA (constants stay fixed on the machine base). Each area
/// keeps one large plant and one small unit, so tripping G3 removes about 5%
/// of generation and online inertia.
///
/// Topology (areas 1 and 2 mirror each other):
///   G1-5, G2-6 step-up transformers; 5-6-7 area-1 backbone; load stub 7-12;
///   double-circuit tie 7-8-9; load stub 9-13; 9-10-11 backbone; G4-10, G3-11.
///
/// The dispatch (tie flow about 3.7 pu from area 1 to area 2) and the
/// exciter/governor constants are reconstructions chosen to produce one
/// lightly damped inter-area mode near 0.76 Hz and a frequency regulation
/// mode below 0.1 Hz; they are not authoritative data.
inline NetworkCase make_two_area_case() {
    NetworkCase net;
    net.name = "two-area";
    net.system_mva = 100.0;
    net.f0 = 60.0;

    auto bus = [&](int id, BusKind kind, double vm, double kv, double shunt_b, int area) {
        Bus b;
        b.id = id;
        b.kind = kind;
        b.voltage_mag = vm;
        b.base_kv = kv;
        b.shunt_b = shunt_b;
        b.area = area;
        net.buses.push_back(b);
    };
    bus(1, BusKind::pv, 1.03, 20.0, 0.0, 1);
    bus(2, BusKind::pv, 1.01, 20.0, 0.0, 1);
    bus(3, BusKind::pv, 1.03, 20.0, 0.0, 2);
    bus(4, BusKind::slack, 1.01, 20.0, 0.0, 2);
    bus(5, BusKind::pq, 1.0, 230.0, 0.0, 1);
    bus(6, BusKind::pq, 1.0, 230.0, 0.0, 1);
    bus(7, BusKind::pq, 1.0, 230.0, 0.0, 1);
    bus(8, BusKind::pq, 1.0, 230.0, 0.0, 1);
    bus(9, BusKind::pq, 1.0, 230.0, 0.0, 2);
    bus(10, BusKind::pq, 1.0, 230.0, 0.0, 2);
    bus(11, BusKind::pq, 1.0, 230.0, 0.0, 2);
    bus(12, BusKind::pq, 1.0, 230.0, 2.0, 1);   // area-1 load bus, 200 MVAr bank
    bus(13, BusKind::pq, 1.0, 230.0, 3.5, 2);   // area-2 load bus, 350 MVAr bank

    auto line = [&](int f, int t, double km) {
        Branch br;
        br.from_bus = f;
        br.to_bus = t;
        br.series_r = 0.0001 * km;
        br.series_x = 0.001 * km;
        br.shunt_b = 0.00175 * km;
        net.branches.push_back(br);
    };
    auto xfmr = [&](int f, int t, double x_sys) {
        Branch br;
        br.from_bus = f;
        br.to_bus = t;
        br.series_x = x_sys;
        net.branches.push_back(br);
    };
    // 0.15 pu on each unit's own MVA base
    xfmr(1, 5, 0.15 * 100.0 / 180.0);
    xfmr(2, 6, 0.15 * 100.0 / 1620.0);
    xfmr(3, 11, 0.15 * 100.0 / 180.0);
    xfmr(4, 10, 0.15 * 100.0 / 1620.0);
    line(5, 6, 25.0);
    line(6, 7, 10.0);
    line(7, 8, 70.0);   // tie circuit A
    line(7, 8, 70.0);   // tie circuit B
    line(8, 9, 70.0);
    line(8, 9, 70.0);
    line(9, 10, 10.0);
    line(10, 11, 25.0);
    line(7, 12, 5.0);
    line(9, 13, 5.0);

    auto load = [&](int b, double p, double q) {
        LoadModel l;
        l.bus = b;
        l.p0 = p;
        l.q0 = q;
        net.loads.push_back(l);
    };
    load(12, 11.67, 1.0);
    load(13, 15.67, 1.0);

    auto gen = [&](const std::string& name, int b, double mva, double p_dispatch,
                   double h) {
        Generator g;
        g.name = name;
        g.bus = b;
        g.p_dispatch = p_dispatch;
        g.machine.mva_base = mva;
        g.machine.h = h;
        g.machine.d = 0.0;
        g.machine.xd = 1.8;
        g.machine.xq = 1.7;
        g.machine.xd_p = 0.3;
        g.machine.xq_p = 0.55;
        g.machine.td0_p = 8.0;
        g.machine.tq0_p = 0.4;
        g.exciter.ka = 200.0;
        g.exciter.ta = 0.01;
        g.exciter.efd_min = -6.0;
        g.exciter.efd_max = 6.0;
        g.governor.droop_r = 0.05;
        g.governor.tg = 0.2;
        g.governor.tt = 5.0;  // reheat-scale lag, keeps frequency regulation below 0.1 Hz
        g.governor.pmax = 1.1;
        PssConfig pss;
        pss.beta1 = 0.0;
        pss.beta2 = 0.0;
        pss.gain_k = 25.0;
        pss.washout_tw = 1.0;
        pss.leadlag_stages = {{0.25, 0.04}};
        pss.vs_min = -0.1;
        pss.vs_max = 0.1;
        g.pss = pss;
        net.generators.push_back(g);
    };
    gen("G1", 1, 180.0, 1.4, 6.5);
    gen("G2", 2, 1620.0, 12.0, 6.5);
    gen("G3", 3, 180.0, 1.4, 6.175);
    gen("G4", 4, 1620.0, 0.0, 6.175);  // slack unit

    // one frequency sensor per generator bus, weighted by stored kinetic energy
    auto sensor = [&](int id, int b, double h_mva) {
        SensorSpec s;
        s.sensor_id = id;
        s.bus = b;
        s.weight = h_mva;
        net.sensors.push_back(s);
    };
    sensor(0, 1, 6.5 * 180.0);
    sensor(1, 2, 6.5 * 1620.0);
    sensor(2, 3, 6.175 * 180.0);
    sensor(3, 4, 6.175 * 1620.0);

    return net;
}

}  // namespace coipss
