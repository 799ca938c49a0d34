#pragma once

// Random straight-line programs over the supported primitives, shared by the
// autodiff unit tests and the acceptance suite.

#include "npm/autodiff.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace npm::testing {

struct RandomProgram {
    ad::Program program;
    std::vector<double> inputs;
    std::vector<double> params;
};

inline RandomProgram make_random_program(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> n_in_dist(1, 3);
    std::uniform_int_distribution<std::size_t> n_par_dist(2, 8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    const std::size_t n_in = n_in_dist(rng);
    const std::size_t n_par = n_par_dist(rng);
    RandomProgram rp{ad::Program(n_in, n_par), {}, {}};
    ad::Program& p = rp.program;
    std::vector<std::size_t> regs;
    for (std::size_t i = 0; i < n_in; ++i) regs.push_back(p.input(i));
    for (std::size_t i = 0; i < n_par; ++i) regs.push_back(p.param(i));

    // A matvec layer mixing inputs with parameters makes every program depend
    // on both.
    {
        const std::size_t rows = 2;
        std::vector<std::size_t> mat, vec;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n_in; ++c) mat.push_back(p.param((r * n_in + c) % n_par));
        for (std::size_t c = 0; c < n_in; ++c) vec.push_back(p.input(c));
        for (std::size_t r : p.matvec(rows, n_in, mat, vec)) regs.push_back(p.apply("tanh", {r}));
    }

    std::uniform_int_distribution<int> op_dist(0, 4);
    const std::size_t two = p.constant(2.0);
    const int steps = 6 + static_cast<int>(rng() % 10);
    for (int k = 0; k < steps; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, regs.size() - 1);
        const std::size_t a = regs[pick(rng)];
        const std::size_t b = regs[pick(rng)];
        switch (op_dist(rng)) {
            case 0: regs.push_back(p.apply("add", {a, b})); break;
            case 1: regs.push_back(p.apply("sub", {a, b})); break;
            case 2: regs.push_back(p.apply("mul", {a, b})); break;
            case 3: regs.push_back(p.apply("tanh", {a})); break;
            default: {
                // Denominator in [1, 3].
                const std::size_t den = p.apply("add", {two, p.apply("tanh", {b})});
                regs.push_back(p.apply("div", {a, den}));
                break;
            }
        }
    }
    // Output mixes the last register with every earlier one so no parameter
    // is accidentally disconnected.
    std::size_t out = regs.back();
    for (std::size_t i = 0; i + 1 < regs.size(); ++i) out = p.apply("add", {out, p.apply("tanh", {regs[i]})});
    p.set_outputs({out});

    for (std::size_t i = 0; i < n_in; ++i) rp.inputs.push_back(u(rng));
    for (std::size_t i = 0; i < n_par; ++i) rp.params.push_back(u(rng));
    return rp;
}

/// ||a - b|| / max(||b||, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

/// Central differences of a scalar function of a parameter vector.
template <typename F>
std::vector<double> central_difference(F&& f, std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// Reverse-mode gradient of output 0 versus central differences.
inline double reverse_mode_error(const RandomProgram& rp) {
    const auto grad = ad::program_gradient(rp.program, rp.inputs, rp.params, 0).gradient;
    const auto fd = central_difference(
        [&](const std::vector<double>& p) {
            return rp.program.evaluate<double>(rp.inputs, p)[0];
        },
        rp.params, 1e-6);
    return relative_error(grad, fd);
}

/// Squared input derivative of output 0 (sum over input directions); its
/// parameter gradient by forward-over-reverse versus central differences of
/// the exact forward-mode derivative.
inline double nested_mode_error(const RandomProgram& rp) {
    const std::size_t n_in = rp.program.num_inputs();
    auto loss_double = [&](const std::vector<double>& p) {
        double l = 0.0;
        for (std::size_t k = 0; k < n_in; ++k) {
            std::vector<double> seed(n_in, 0.0);
            seed[k] = 1.0;
            const double d = ad::forward_jvp(rp.program, rp.inputs, p, seed).derivative[0];
            l += d * d;
        }
        return l;
    };
    const auto nested = ad::nested_grad(
        [&](ad::Tape&, std::span<const ad::Var> params) {
            using D = ad::Dual<ad::Var, 3>;
            std::vector<D> x, th;
            for (std::size_t k = 0; k < n_in; ++k) x.push_back(D::seeded(ad::Var(rp.inputs[k]), k));
            for (const ad::Var& v : params) th.push_back(D(v));
            const D out = rp.program.evaluate<D>(x, th)[0];
            ad::Var l = 0.0;
            for (std::size_t k = 0; k < n_in; ++k) l = l + out.tangent[k] * out.tangent[k];
            return l;
        },
        rp.params);
    const auto fd = central_difference(loss_double, rp.params, 1e-5);
    return relative_error(nested.gradient, fd);
}

}  // namespace npm::testing
