#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "coipss/algebraic.hpp"
#include "coipss/power_flow.hpp"
#include "coipss/two_area.hpp"
#include "oracles.hpp"

using namespace coipss;
using Catch::Approx;

namespace {

// mirror of the library's fixed-point on top of the hand-rolled dense solver
Eigen::VectorXcd dense_oracle_solve(const NetworkCase& net,
                                    const Eigen::MatrixXcd& y_aug,
                                    const Eigen::VectorXcd& inj,
                                    const std::vector<LoadModel>& loads) {
    const int n = static_cast<int>(y_aug.rows());
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n);
    for (int sweep = 0; sweep < 200; ++sweep) {
        oracles::CMatrix a(static_cast<std::size_t>(n),
                           oracles::CVector(static_cast<std::size_t>(n)));
        oracles::CVector b(static_cast<std::size_t>(n));
        const Eigen::VectorXcd rhs = inj + load_current_injection(net, loads, v);
        for (int r = 0; r < n; ++r) {
            b[static_cast<std::size_t>(r)] = rhs(r);
            for (int c = 0; c < n; ++c)
                a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = y_aug(r, c);
        }
        const auto x = oracles::dense_solve(a, b);
        double dv = 0.0;
        for (int r = 0; r < n; ++r) {
            dv = std::max(dv, std::abs(x[static_cast<std::size_t>(r)] - v(r)));
            v(r) = x[static_cast<std::size_t>(r)];
        }
        if (dv < 1e-13) break;
    }
    return v;
}

}  // namespace

TEST_CASE("single fixed injection against the dense oracle") {
    const auto net = make_two_area_case();
    AdmittanceOptions opts;
    opts.include_machine_sources = true;
    Eigen::MatrixXcd y = build_admittance(net, opts).y;

    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(13);
    inj(net.bus_index(1)) = Complex(1.2, -0.4);

    const std::vector<LoadModel> no_loads;
    AlgebraicSolver solver(net, y, no_loads);
    auto fixed = [&](const Eigen::VectorXcd&) { return inj; };
    const auto v = solver.solve(fixed, Eigen::VectorXcd::Ones(13));

    Eigen::VectorXcd expected = dense_oracle_solve(net, y, inj, no_loads);
    CHECK((v - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("homogeneous system with impedance-only loads collapses to zero") {
    const auto base = make_two_area_case();
    AdmittanceOptions opts;
    opts.include_machine_sources = true;
    Eigen::MatrixXcd y = build_admittance(base, opts).y;

    std::vector<LoadModel> loads = base.loads;
    for (auto& l : loads) l.p0 = 0.0;  // reactive (impedance) part only
    fold_load_impedance(y, base, loads);

    AlgebraicSolver solver(base, y, loads);
    const Eigen::VectorXcd zero_inj = Eigen::VectorXcd::Zero(13);
    auto fixed = [&](const Eigen::VectorXcd&) { return zero_inj; };
    const auto v = solver.solve(fixed, Eigen::VectorXcd::Ones(13));
    CHECK(v.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant-current load halving matches a dense re-solve") {
    const auto net = make_two_area_case();
    const auto pf = solve_power_flow(net);

    AdmittanceOptions opts;
    opts.include_machine_sources = true;
    Eigen::MatrixXcd y = build_admittance(net, opts).y;
    std::vector<LoadModel> loads = net.loads;
    for (auto& l : loads) l.v0 = std::abs(pf.voltage[static_cast<std::size_t>(net.bus_index(l.bus))]);
    fold_load_impedance(y, net, loads);

    // frozen Norton injections consistent with the power-flow point:
    // stator current plus the source-admittance term folded into y_aug
    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(13);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const int bi = net.bus_index(net.generators[g].bus);
        const Complex v_pf = pf.voltage[static_cast<std::size_t>(bi)];
        const double xdp_sys = net.generators[g].machine.xd_p * net.system_mva /
                               net.generators[g].machine.mva_base;
        inj(bi) += std::conj(pf.gen_injection[g] / v_pf) +
                   v_pf / Complex(0.0, xdp_sys);
    }

    auto fixed = [&](const Eigen::VectorXcd&) { return inj; };
    AlgebraicSolver solver(net, y, loads);
    const auto v_full = solver.solve(fixed, Eigen::VectorXcd::Ones(13));

    std::vector<LoadModel> halved = loads;
    for (auto& l : halved) l.p0 *= 0.5;
    AlgebraicSolver solver_half(net, y, halved);
    const auto v_half = solver_half.solve(fixed, v_full);

    const auto expect_full = dense_oracle_solve(net, y, inj, loads);
    const auto expect_half = dense_oracle_solve(net, y, inj, halved);
    CHECK((v_full - expect_full).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((v_half - expect_half).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(((v_half - v_full) - (expect_half - expect_full)).cwiseAbs().maxCoeff() <
          1e-8);
}

TEST_CASE("load behavior follows the constant-current constant-impedance split") {
    const auto net = make_two_area_case();
    const auto pf = solve_power_flow(net);
    AdmittanceOptions opts;
    opts.include_machine_sources = true;
    Eigen::MatrixXcd y_plain = build_admittance(net, opts).y;
    Eigen::MatrixXcd y = y_plain;
    std::vector<LoadModel> loads = net.loads;
    for (auto& l : loads) l.v0 = std::abs(pf.voltage[static_cast<std::size_t>(net.bus_index(l.bus))]);
    fold_load_impedance(y, net, loads);

    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(13);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const int bi = net.bus_index(net.generators[g].bus);
        const Complex v_pf = pf.voltage[static_cast<std::size_t>(bi)];
        const double xdp_sys = net.generators[g].machine.xd_p * net.system_mva /
                               net.generators[g].machine.mva_base;
        inj(bi) += std::conj(pf.gen_injection[g] / v_pf) +
                   v_pf / Complex(0.0, xdp_sys);
    }
    AlgebraicSolver solver(net, y, loads);
    auto fixed = [&](const Eigen::VectorXcd&) { return inj; };
    const auto v = solver.solve(fixed, Eigen::VectorXcd::Ones(13));

    // consumed power at each load bus from the converged network state
    for (const auto& l : loads) {
        const int bi = net.bus_index(l.bus);
        const Complex i_cc = -(l.p0 / l.v0) * (v(bi) / std::abs(v(bi)));
        const Complex s_cc = v(bi) * std::conj(-i_cc);
        CHECK(s_cc.real() == Approx(l.p0 * std::abs(v(bi)) / l.v0).epsilon(1e-9));
        const Complex y_shunt(0.0, -l.q0 / (l.v0 * l.v0));
        const Complex s_z = v(bi) * std::conj(y_shunt * v(bi));
        CHECK(s_z.imag() ==
              Approx(l.q0 * std::pow(std::abs(v(bi)) / l.v0, 2.0)).epsilon(1e-9));
    }
}

TEST_CASE("sweep cap raises an algebraic failure") {
    const auto net = make_two_area_case();
    AdmittanceOptions opts;
    opts.include_machine_sources = true;
    Eigen::MatrixXcd y = build_admittance(net, opts).y;
    AlgebraicSolver solver(net, y, net.loads);
    AlgebraicOptions ao;
    ao.max_sweeps = 0;
    Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(13);
    inj(0) = Complex(1.0, 0.0);
    CHECK_THROWS_AS(network_algebraic_solve(net, AdmittanceMatrix{y}, inj,
                                            net.loads, Eigen::VectorXcd::Ones(13), ao),
                    ConvergenceError);
}

TEST_CASE("fixed-voltage buses are honored") {
    NetworkCase net;
    Bus b1, b2;
    b1.id = 1;
    b2.id = 2;
    net.buses = {b1, b2};
    Branch br;
    br.from_bus = 1;
    br.to_bus = 2;
    br.series_x = 0.5;
    net.branches.push_back(br);

    const Eigen::MatrixXcd y = build_admittance(net).y;
    AlgebraicSolver solver(net, y, {}, {1});  // bus index 1 held fixed
    Eigen::VectorXcd guess(2);
    guess << Complex(1.0, 0.0), Complex(0.97, -0.05);
    const Eigen::VectorXcd zero_inj = Eigen::VectorXcd::Zero(2);
    auto fixed = [&](const Eigen::VectorXcd&) { return zero_inj; };
    const auto v = solver.solve(fixed, guess);
    CHECK(v(1) == guess(1));
    // KCL at the free bus: current to the fixed bus must vanish without injection
    CHECK(std::abs(v(0) - v(1)) < 1e-12);
}
