#pragma once

// Full-batch training: Adam warm-up followed by L-BFGS with a strong-Wolfe
// line search.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace npm::optim {

/// Returns the loss at x and writes its gradient into grad.
using LossOracle = std::function<double(std::span<const double> x, std::span<double> grad)>;

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamSettings settings;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    AdamState(std::size_t n, AdamSettings s = {}) : settings(s), m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. Throws NonFiniteGradient before touching
/// the state if any gradient entry is NaN or infinite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> gradient);

struct LbfgsSettings {
    std::size_t history = 10;
    double g_tol = 1e-9;   ///< max-norm of the gradient
    double f_tol = 1e-12;  ///< relative loss decrease over one iteration
    std::size_t max_iter = 5000;
    double c1 = 1e-4;
    double c2 = 0.9;
    std::size_t max_line_search_evals = 30;
};

enum class Termination { gradient_tolerance, function_tolerance, max_iterations, line_search_failed };

std::string_view to_string(Termination t) noexcept;

/// Limited-memory curvature pairs with the two-loop recursion.
class LbfgsState {
public:
    explicit LbfgsState(std::size_t capacity) : capacity_(capacity) {}

    /// Stores (s, y) if s.y > 1e-12; returns whether it was stored.
    bool push(std::vector<double> s, std::vector<double> y);
    void clear() noexcept { pairs_.clear(); }
    std::size_t size() const noexcept { return pairs_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }

    /// d = -H g
    void direction(std::span<const double> g, std::span<double> d) const;

private:
    struct Pair {
        std::vector<double> s;
        std::vector<double> y;
        double rho;
    };
    std::size_t capacity_;
    std::deque<Pair> pairs_;
};

struct LbfgsResult {
    double loss = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    Termination reason = Termination::max_iterations;
};

using IterationObserver = std::function<void(std::size_t iteration, double loss)>;

/// Minimizes in place. `observer` sees iteration 0 (the start) and every
/// accepted iterate; the oracle's most recent evaluation is always at the
/// point being reported.
LbfgsResult lbfgs_minimize(const LossOracle& oracle, std::span<double> x, const LbfgsSettings& settings = {},
                           const IterationObserver& observer = {});

enum class Phase { adam, lbfgs };

std::string_view to_string(Phase p) noexcept;

struct TrainSchedule {
    std::size_t adam_iters = 100;
    double adam_lr = 1e-3;
    LbfgsSettings lbfgs;
};

struct HistoryEntry {
    Phase phase;
    std::size_t iteration;
    double loss;
};

struct TrainResult {
    std::vector<HistoryEntry> history;
    LbfgsResult lbfgs;
    double final_loss = 0.0;
    std::size_t evaluations = 0;
};

/// adam_iters Adam steps, then lbfgs_minimize.
TrainResult train(const LossOracle& oracle, std::span<double> params, const TrainSchedule& schedule,
                  const std::function<void(const HistoryEntry&)>& observer = {});

}  // namespace npm::optim
