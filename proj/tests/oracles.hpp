// Independent reference implementations used only by the test suite. These
// deliberately avoid the library's solution paths (Eigen LU / EigenSolver) so
// that agreement between the two routes is meaningful.
#pragma once

#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "coipss/network.hpp"
#include "coipss/power_flow.hpp"

namespace oracles {

using Complex = std::complex<double>;
using CMatrix = std::vector<std::vector<Complex>>;
using CVector = std::vector<Complex>;

/// Hand-rolled complex Gaussian elimination with partial pivoting.
inline CVector dense_solve(CMatrix a, CVector b) {
    const std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) == 0.0)
            throw std::runtime_error("dense_solve: singular matrix");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    CVector x(n);
    for (std::size_t ri = n; ri-- > 0;) {
        Complex s = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
        x[ri] = s / a[ri][ri];
    }
    return x;
}

/// Determinant by recursive cofactor expansion. Exponential cost; fine for
/// the small matrices the oracle checks use.
inline Complex cofactor_det(const CMatrix& a) {
    const std::size_t n = a.size();
    if (n == 1) return a[0][0];
    if (n == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
    Complex det(0.0, 0.0);
    double sign = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        CMatrix minor(n - 1, CVector(n - 1));
        for (std::size_t r = 1; r < n; ++r) {
            std::size_t mc = 0;
            for (std::size_t c = 0; c < n; ++c) {
                if (c == col) continue;
                minor[r - 1][mc++] = a[r][c];
            }
        }
        det += sign * a[0][col] * cofactor_det(minor);
        sign = -sign;
    }
    return det;
}

/// Solves a x = b through Cramer's rule with cofactor determinants.
inline CVector cramer_solve(const CMatrix& a, const CVector& b) {
    const std::size_t n = a.size();
    const Complex det = cofactor_det(a);
    if (std::abs(det) == 0.0) throw std::runtime_error("cramer_solve: singular");
    CVector x(n);
    for (std::size_t i = 0; i < n; ++i) {
        CMatrix ai = a;
        for (std::size_t r = 0; r < n; ++r) ai[r][i] = b[r];
        x[i] = cofactor_det(ai) / det;
    }
    return x;
}

/// Fixed-point Gauss-Seidel power flow for cases with one slack bus and pq
/// buses only.
inline std::vector<Complex> gauss_seidel_power_flow(const coipss::NetworkCase& net,
                                                    double tol = 1e-12,
                                                    int max_iter = 20000) {
    const auto y = coipss::build_admittance(net).y;
    const int n = static_cast<int>(net.buses.size());
    std::vector<Complex> v(static_cast<std::size_t>(n));
    std::vector<Complex> s_sched(static_cast<std::size_t>(n), Complex(0, 0));
    int slack = -1;
    for (int i = 0; i < n; ++i) {
        const auto& b = net.buses[static_cast<std::size_t>(i)];
        if (b.kind == coipss::BusKind::slack) slack = i;
        else if (b.kind != coipss::BusKind::pq)
            throw std::runtime_error("gauss_seidel oracle handles slack+pq only");
        v[static_cast<std::size_t>(i)] = std::polar(b.voltage_mag, b.voltage_ang);
        if (b.kind == coipss::BusKind::pq)
            v[static_cast<std::size_t>(i)] = Complex(1.0, 0.0);
    }
    for (const auto& g : net.generators)
        if (g.online) s_sched[static_cast<std::size_t>(net.bus_index(g.bus))] +=
            Complex(g.p_dispatch, 0.0);
    for (const auto& l : net.loads)
        s_sched[static_cast<std::size_t>(net.bus_index(l.bus))] -= Complex(l.p0, l.q0);

    for (int it = 0; it < max_iter; ++it) {
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == slack) continue;
            Complex sum(0, 0);
            for (int j = 0; j < n; ++j)
                if (j != i) sum += y(i, j) * v[static_cast<std::size_t>(j)];
            const Complex vnew =
                (std::conj(s_sched[static_cast<std::size_t>(i)] /
                           v[static_cast<std::size_t>(i)]) -
                 sum) /
                y(i, i);
            worst = std::max(worst, std::abs(vnew - v[static_cast<std::size_t>(i)]));
            v[static_cast<std::size_t>(i)] = vnew;
        }
        if (worst < tol) return v;
    }
    throw std::runtime_error("gauss_seidel oracle did not converge");
}

inline std::mt19937_64 test_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace oracles
