#include "npm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace npm::optim {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

bool finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

// Minimizer of the cubic through (a, fa, da) and (b, fb, db), clamped into the
// inner 80% of the bracket; bisection if the cubic has no real minimizer.
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b);
    const double hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    double t = 0.5 * (a + b);
    if (std::isfinite(fb) && std::isfinite(db)) {
        const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
        const double disc = d1 * d1 - da * db;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), b - a);
            const double denom = db - da + 2.0 * d2;
            if (denom != 0.0) {
                const double cand = b - (b - a) * (db + d2 - d1) / denom;
                if (std::isfinite(cand)) t = cand;
            }
        }
    }
    return std::clamp(t, lo + margin, hi - margin);
}

struct LineSearch {
    const LossOracle& oracle;
    std::span<double> x;
    std::span<const double> x0;
    std::span<const double> d;
    std::span<double> g;
    const LbfgsSettings& cfg;
    std::size_t evals = 0;
    double f = 0.0;

    struct Point {
        double alpha;
        double f;
        double dphi;
    };

    Point eval(double alpha) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + alpha * d[i];
        ++evals;
        f = oracle(x, g);
        double dphi = dot(g, d);
        if (!std::isfinite(f) || !finite(g)) {
            f = std::numeric_limits<double>::infinity();
            dphi = std::numeric_limits<double>::quiet_NaN();
        }
        return {alpha, f, dphi};
    }

    // Returns true with x, g, f at an accepted point.
    bool run(double f0, double dphi0, double alpha) {
        const double armijo = cfg.c1 * dphi0;
        const double curvature = -cfg.c2 * dphi0;
        Point prev{0.0, f0, dphi0};
        for (std::size_t i = 0; evals < cfg.max_line_search_evals; ++i) {
            const Point cur = eval(alpha);
            if (cur.f > f0 + cur.alpha * armijo || (i > 0 && cur.f >= prev.f)) return zoom(f0, dphi0, prev, cur);
            if (std::abs(cur.dphi) <= curvature) return true;
            if (cur.dphi >= 0.0) return zoom(f0, dphi0, cur, prev);
            prev = cur;
            alpha *= 2.0;
        }
        return false;
    }

    bool zoom(double f0, double dphi0, Point lo, Point hi) {
        const double armijo = cfg.c1 * dphi0;
        const double curvature = -cfg.c2 * dphi0;
        while (evals < cfg.max_line_search_evals) {
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
            const double t = cubic_step(lo.alpha, lo.f, lo.dphi, hi.alpha, hi.f, hi.dphi);
            const Point cur = eval(t);
            if (cur.f > f0 + cur.alpha * armijo || cur.f >= lo.f) {
                hi = cur;
            } else {
                if (std::abs(cur.dphi) <= curvature) return true;
                if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
        }
        return false;
    }
};

}  // namespace

void adam_step(AdamState& state, std::span<double> params, std::span<const double> gradient) {
    if (params.size() != state.m.size() || gradient.size() != state.m.size()) {
        throw std::invalid_argument("Adam state size mismatch");
    }
    if (!finite(gradient)) throw NonFiniteGradient("non-finite gradient in Adam step");
    const AdamSettings& s = state.settings;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(s.beta1, t);
    const double bc2 = 1.0 - std::pow(s.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = s.beta1 * state.m[i] + (1.0 - s.beta1) * gradient[i];
        state.v[i] = s.beta2 * state.v[i] + (1.0 - s.beta2) * gradient[i] * gradient[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

std::string_view to_string(Termination t) noexcept {
    switch (t) {
        case Termination::gradient_tolerance: return "gradient_tolerance";
        case Termination::function_tolerance: return "function_tolerance";
        case Termination::max_iterations: return "max_iterations";
        case Termination::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

std::string_view to_string(Phase p) noexcept { return p == Phase::adam ? "adam" : "lbfgs"; }

bool LbfgsState::push(std::vector<double> s, std::vector<double> y) {
    const double sy = dot(s, y);
    if (!(sy > 1e-12)) return false;
    if (capacity_ == 0) return false;
    if (pairs_.size() == capacity_) pairs_.pop_front();
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
    return true;
}

void LbfgsState::direction(std::span<const double> g, std::span<double> d) const {
    std::copy(g.begin(), g.end(), d.begin());
    std::vector<double> alpha(pairs_.size());
    for (std::size_t k = pairs_.size(); k-- > 0;) {
        const Pair& p = pairs_[k];
        alpha[k] = p.rho * dot(p.s, d);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= alpha[k] * p.y[i];
    }
    if (!pairs_.empty()) {
        const Pair& last = pairs_.back();
        const double gamma = 1.0 / (last.rho * dot(last.y, last.y));
        for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
        const Pair& p = pairs_[k];
        const double beta = p.rho * dot(p.y, d);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += (alpha[k] - beta) * p.s[i];
    }
    for (double& v : d) v = -v;
}

LbfgsResult lbfgs_minimize(const LossOracle& oracle, std::span<double> x, const LbfgsSettings& cfg,
                           const IterationObserver& observer) {
    const std::size_t n = x.size();
    LbfgsResult result;
    std::vector<double> g(n), g_prev(n), x_prev(n), d(n);
    double f = oracle(x, g);
    result.evaluations = 1;
    result.loss = f;
    if (observer) observer(0, f);
    if (!std::isfinite(f) || !finite(g)) {
        result.reason = Termination::line_search_failed;
        return result;
    }
    if (max_abs(g) < cfg.g_tol) {
        result.reason = Termination::gradient_tolerance;
        return result;
    }

    LbfgsState memory(cfg.history);
    while (result.iterations < cfg.max_iter) {
        std::copy(x.begin(), x.end(), x_prev.begin());
        std::copy(g.begin(), g.end(), g_prev.begin());
        const double f_prev = f;

        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1) {
                if (memory.size() == 0) break;
                memory.clear();
            }
            memory.direction(g_prev, d);
            double dphi0 = dot(g_prev, d);
            if (!(dphi0 < 0.0)) {
                memory.clear();
                memory.direction(g_prev, d);
                dphi0 = dot(g_prev, d);
            }
            double alpha = 1.0;
            if (memory.size() == 0) alpha = std::min(1.0, 1.0 / std::sqrt(dot(g_prev, g_prev)));
            LineSearch ls{oracle, x, x_prev, d, g, cfg};
            accepted = ls.run(f_prev, dphi0, alpha);
            result.evaluations += ls.evals;
            f = ls.f;
        }

        if (!accepted) {
            // Leave the oracle evaluated at the last accepted iterate.
            std::copy(x_prev.begin(), x_prev.end(), x.begin());
            f = oracle(x, g);
            ++result.evaluations;
            result.loss = f;
            result.reason = Termination::line_search_failed;
            return result;
        }

        ++result.iterations;
        result.loss = f;
        if (observer) observer(result.iterations, f);

        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x[i] - x_prev[i];
            y[i] = g[i] - g_prev[i];
        }
        memory.push(std::move(s), std::move(y));

        if (max_abs(g) < cfg.g_tol) {
            result.reason = Termination::gradient_tolerance;
            return result;
        }
        const double scale = std::max(std::abs(f_prev), std::numeric_limits<double>::min());
        if ((f_prev - f) / scale < cfg.f_tol) {
            result.reason = Termination::function_tolerance;
            return result;
        }
    }
    result.reason = Termination::max_iterations;
    return result;
}

TrainResult train(const LossOracle& oracle, std::span<double> params, const TrainSchedule& schedule,
                  const std::function<void(const HistoryEntry&)>& observer) {
    TrainResult out;
    auto record = [&](HistoryEntry e) {
        out.history.push_back(e);
        if (observer) observer(e);
    };

    if (schedule.adam_iters > 0) {
        AdamState adam(params.size(), AdamSettings{schedule.adam_lr});
        std::vector<double> grad(params.size());
        for (std::size_t it = 0; it < schedule.adam_iters; ++it) {
            const double f = oracle(params, grad);
            ++out.evaluations;
            record({Phase::adam, it, f});
            adam_step(adam, params, grad);
        }
    }

    out.lbfgs = lbfgs_minimize(oracle, params, schedule.lbfgs,
                               [&](std::size_t it, double f) { record({Phase::lbfgs, it, f}); });
    out.evaluations += out.lbfgs.evaluations;
    out.final_loss = out.lbfgs.loss;
    return out;
}

}  // namespace npm::optim
