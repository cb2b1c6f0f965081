#include <catch2/catch_amalgamated.hpp>

#include "coipss/power_flow.hpp"
#include "coipss/two_area.hpp"
#include "oracles.hpp"

using namespace coipss;
using Catch::Approx;

namespace {

NetworkCase two_bus_pq(double p, double q) {
    NetworkCase net;
    Bus b1;
    b1.id = 1;
    b1.kind = BusKind::slack;
    b1.voltage_mag = 1.0;
    net.buses.push_back(b1);
    Bus b2;
    b2.id = 2;
    b2.kind = BusKind::pq;
    net.buses.push_back(b2);
    Branch br;
    br.from_bus = 1;
    br.to_bus = 2;
    br.series_x = 0.1;
    net.branches.push_back(br);
    if (p != 0.0 || q != 0.0) {
        LoadModel l;
        l.bus = 2;
        l.p0 = p;
        l.q0 = q;
        net.loads.push_back(l);
    }
    return net;
}

}  // namespace

TEST_CASE("no-load power flow replicates the slack voltage") {
    const auto net = two_bus_pq(0.0, 0.0);
    const auto sol = solve_power_flow(net);
    CHECK(std::abs(sol.voltage[0] - sol.voltage[1]) < 1e-12);
    CHECK(std::abs(branch_flow_from(net, net.branches[0], sol)) < 1e-10);
}

TEST_CASE("two-bus load case matches the Gauss-Seidel oracle") {
    const auto net = two_bus_pq(1.0, 0.2);
    const auto sol = solve_power_flow(net);
    const auto v_gs = oracles::gauss_seidel_power_flow(net);
    for (std::size_t i = 0; i < sol.voltage.size(); ++i)
        CHECK(std::abs(sol.voltage[i] - v_gs[i]) < 1e-8);
}

TEST_CASE("two-area case solves inside the voltage band with forward tie flow") {
    const auto net = make_two_area_case();
    const auto sol = solve_power_flow(net);
    for (std::size_t i = 0; i < sol.voltage.size(); ++i) {
        INFO("bus " << net.buses[i].id);
        CHECK(std::abs(sol.voltage[i]) > 0.9);
        CHECK(std::abs(sol.voltage[i]) < 1.1);
    }
    // tie circuits leave bus 7 towards bus 8
    double tie_p = 0.0;
    for (const auto& br : net.branches)
        if (br.from_bus == 7 && br.to_bus == 8)
            tie_p += branch_flow_from(net, br, sol).real();
    CHECK(tie_p > 0.0);
}

TEST_CASE("power-flow solution satisfies the bus power balance") {
    const auto net = make_two_area_case();
    const auto sol = solve_power_flow(net);
    const auto y = build_admittance(net).y;
    Eigen::VectorXcd v(13);
    for (int i = 0; i < 13; ++i) v(i) = sol.voltage[static_cast<std::size_t>(i)];
    const Eigen::VectorXcd s_inj = v.array() * (y * v).conjugate().array();

    std::vector<Complex> sched(13, Complex(0, 0));
    for (const auto& l : net.loads)
        sched[static_cast<std::size_t>(net.bus_index(l.bus))] -= Complex(l.p0, l.q0);
    for (int i = 0; i < 13; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        if (b.kind == BusKind::slack) continue;
        if (b.kind == BusKind::pv) {
            double p_gen = 0.0;
            for (const auto& g : net.generators)
                if (net.bus_index(g.bus) == i) p_gen += g.p_dispatch;
            CHECK(std::abs(s_inj(i).real() - (sched[static_cast<std::size_t>(i)].real() + p_gen)) < 1e-8);
        } else {
            CHECK(std::abs(s_inj(i) - sched[static_cast<std::size_t>(i)]) < 1e-8);
        }
    }
}

TEST_CASE("divergence and bad slack configuration raise typed errors") {
    SECTION("unconvergeable load") {
        auto net = two_bus_pq(50.0, 10.0);  // far beyond the line's capability
        CHECK_THROWS_AS(solve_power_flow(net), NumericalError);
    }
    SECTION("iteration cap reported with final mismatch") {
        auto net = two_bus_pq(1.0, 0.2);
        PowerFlowOptions opts;
        opts.max_iter = 0;
        try {
            solve_power_flow(net, opts);
            FAIL("expected ConvergenceError");
        } catch (const ConvergenceError& e) {
            CHECK(e.final_residual > 0.0);
        }
    }
    SECTION("two slack buses") {
        auto net = two_bus_pq(1.0, 0.2);
        net.buses[1].kind = BusKind::slack;
        CHECK_THROWS_AS(solve_power_flow(net), InputError);
    }
}
