#pragma once

// Linear test-equation integrator used to measure the convergence order of a
// tableau: for q' = lambda q the stage equations (I - dt lambda A) K = lambda q 1
// are solved directly.

#include "npm/irk.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace npm::testing {

inline std::vector<double> solve_dense(std::vector<double> m, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
        if (m[piv * n + col] == 0.0) throw std::runtime_error("singular system");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(m[col * n + c], m[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m[r * n + col] / m[col * n + col];
            for (std::size_t c = col; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double s = rhs[r];
        for (std::size_t c = r + 1; c < n; ++c) s -= m[r * n + c] * x[c];
        x[r] = s / m[r * n + r];
    }
    return x;
}

inline double integrate_linear(const irk::ButcherTableau& tab, double lambda, double q0, double dt, int steps) {
    const std::size_t s = tab.stages;
    double q = q0;
    for (int n = 0; n < steps; ++n) {
        std::vector<double> m(s * s);
        for (std::size_t j = 0; j < s; ++j)
            for (std::size_t i = 0; i < s; ++i) m[j * s + i] = (i == j ? 1.0 : 0.0) - dt * lambda * tab.coeff(j, i);
        const auto k = solve_dense(m, std::vector<double>(s, lambda * q));
        for (std::size_t j = 0; j < s; ++j) q += dt * tab.b[j] * k[j];
    }
    return q;
}

/// log2 of the error ratio between dt and dt/2 on q' = -q over [0, 4 dt].
inline double observed_order(const irk::ButcherTableau& tab, double dt) {
    const double t_end = 4.0 * dt;
    const double exact = std::exp(-t_end);
    const double e1 = std::abs(integrate_linear(tab, -1.0, 1.0, dt, 4) - exact);
    const double e2 = std::abs(integrate_linear(tab, -1.0, 1.0, dt / 2.0, 8) - exact);
    return std::log2(e1 / e2);
}

}  // namespace npm::testing
