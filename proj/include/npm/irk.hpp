#pragma once

// Gauss-Legendre implicit Runge-Kutta tableaus and the stage algebra used to
// build the training residuals: velocity estimates (the rearranged velocity
// update) and the position update driven by velocity stages.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace npm::irk {

struct ButcherTableau {
    std::size_t stages = 0;
    std::vector<double> a;  ///< row-major, a[j * stages + i] is the weight of stage i in row j
    std::vector<double> b;
    std::vector<double> c;

    double coeff(std::size_t j, std::size_t i) const { return a[j * stages + i]; }
};

/// s-stage Gauss-Legendre collocation tableau (order 2s), 1 <= s <= 100.
ButcherTableau gauss_legendre(std::size_t s);

/// Prints c, b and the rows of a with 17 significant digits.
void dump(const ButcherTableau& tableau, std::ostream& os);

/// Stage-major flattened vectors: stage j occupies [j * dim, (j + 1) * dim).
template <typename T>
struct StageValues {
    std::vector<T> stages;
    std::vector<T> next;
};

namespace detail {
inline void check_shapes(const ButcherTableau& tab, std::size_t stage_len, std::size_t next_len,
                         std::size_t dim) {
    if (dim == 0 || stage_len != tab.stages * dim || next_len != dim) {
        throw std::invalid_argument("stage vector shape does not match tableau");
    }
}
}  // namespace detail

/// v_n^j = v^j - dt sum_i a^{ji} acc^i,  v_n^{s+1} = v_{n+1} - dt sum_j b^j acc^j
template <typename T>
StageValues<T> velocity_estimates(const ButcherTableau& tab, std::span<const T> v_stages,
                                  std::span<const T> v_next, std::span<const T> accel, double dt,
                                  std::size_t dim) {
    detail::check_shapes(tab, v_stages.size(), v_next.size(), dim);
    if (accel.size() != v_stages.size()) throw std::invalid_argument("acceleration shape mismatch");
    const std::size_t s = tab.stages;
    StageValues<T> out;
    out.stages.assign(v_stages.begin(), v_stages.end());
    out.next.assign(v_next.begin(), v_next.end());
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t c = 0; c < dim; ++c) {
            T sum = T(0.0);
            for (std::size_t i = 0; i < s; ++i) sum = sum + tab.coeff(j, i) * accel[i * dim + c];
            out.stages[j * dim + c] = out.stages[j * dim + c] - dt * sum;
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        T sum = T(0.0);
        for (std::size_t j = 0; j < s; ++j) sum = sum + tab.b[j] * accel[j * dim + c];
        out.next[c] = out.next[c] - dt * sum;
    }
    return out;
}

/// x^j = x_n + dt sum_i a^{ji} v^i,  x_{n+1} = x_n + dt sum_j b^j v^j
template <typename T>
StageValues<T> position_update(const ButcherTableau& tab, std::span<const T> x_n,
                               std::span<const T> v_stages, double dt) {
    const std::size_t dim = x_n.size();
    detail::check_shapes(tab, v_stages.size(), dim, dim);
    const std::size_t s = tab.stages;
    StageValues<T> out;
    out.stages.resize(s * dim);
    out.next.resize(dim);
    for (std::size_t j = 0; j < s; ++j) {
        for (std::size_t c = 0; c < dim; ++c) {
            T sum = T(0.0);
            for (std::size_t i = 0; i < s; ++i) sum = sum + tab.coeff(j, i) * v_stages[i * dim + c];
            out.stages[j * dim + c] = x_n[c] + dt * sum;
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        T sum = T(0.0);
        for (std::size_t j = 0; j < s; ++j) sum = sum + tab.b[j] * v_stages[j * dim + c];
        out.next[c] = x_n[c] + dt * sum;
    }
    return out;
}

}  // namespace npm::irk
