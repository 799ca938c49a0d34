#include "npm/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace npm::optim;

namespace {

double quadratic(std::span<const double> x, std::span<double> g) {
    g[0] = x[0] - 3.0;
    return 0.5 * (x[0] - 3.0) * (x[0] - 3.0);
}

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
}

}  // namespace

TEST_CASE("Adam first step and zero gradient") {
    AdamState st(2);
    std::vector<double> p{1.0, -2.0};
    const double g[] = {0.5, 0.0};
    adam_step(st, p, g);
    CHECK(p[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
    CHECK(p[1] == -2.0);

    AdamState a(1), b(1);
    std::vector<double> pa{0.3}, pb{0.3};
    const double gg[] = {-4.0};
    adam_step(a, pa, gg);
    adam_step(b, pb, gg);
    CHECK(pa == pb);

    const double bad[] = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(adam_step(a, pa, bad), NonFiniteGradient);
    CHECK(a.step == 1);
}

TEST_CASE("L-BFGS solves a 1-D quadratic in a few iterations") {
    std::vector<double> x{0.0};
    auto r = lbfgs_minimize(quadratic, x);
    CHECK(std::abs(x[0] - 3.0) < 1e-8);
    CHECK(r.iterations <= 5);
    CHECK(r.reason == Termination::gradient_tolerance);
}

TEST_CASE("constant function terminates immediately") {
    std::vector<double> x{1.0, 2.0};
    auto r = lbfgs_minimize([](std::span<const double>, std::span<double> g) {
        g[0] = g[1] = 0.0;
        return 5.0;
    }, x);
    CHECK(r.iterations == 0);
    CHECK(r.reason == Termination::gradient_tolerance);
}

TEST_CASE("Rosenbrock from the standard start") {
    std::vector<double> x{-1.2, 1.0};
    auto r = lbfgs_minimize(rosenbrock, x);
    CHECK(std::abs(x[0] - 1.0) < 1e-6);
    CHECK(std::abs(x[1] - 1.0) < 1e-6);
    CHECK(r.reason != Termination::line_search_failed);
}

TEST_CASE("curvature pairs with non-positive s.y are skipped") {
    LbfgsState st(2);
    CHECK(!st.push({1.0}, {-1.0}));
    CHECK(st.push({1.0}, {2.0}));
    CHECK(st.push({1.0}, {3.0}));
    CHECK(st.push({1.0}, {4.0}));
    CHECK(st.size() == 2);
    const double g[] = {2.0};
    double d[1];
    st.direction(g, d);
    CHECK(d[0] == doctest::Approx(-0.5));
}

TEST_CASE("train records both phases and L-BFGS history is monotone") {
    TrainSchedule sch;
    std::vector<double> x{-1.0, 2.0, 0.5};
    auto convex = [](std::span<const double> v, std::span<double> g) {
        double f = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double w = static_cast<double>(i + 1);
            g[i] = w * (v[i] - 1.0);
            f += 0.5 * w * (v[i] - 1.0) * (v[i] - 1.0);
        }
        return f;
    };
    auto res = train(convex, x, sch);
    std::size_t adam = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& h : res.history) {
        if (h.phase == Phase::adam) {
            ++adam;
            continue;
        }
        CHECK(h.loss <= prev);
        prev = h.loss;
    }
    CHECK(adam == 100);
    CHECK(res.final_loss < 1e-16);

    TrainSchedule pure;
    pure.adam_iters = 0;
    std::vector<double> y{0.0};
    auto r2 = train(quadratic, y, pure);
    CHECK(r2.history.front().phase == Phase::lbfgs);
}

TEST_CASE("non-finite loss aborts the line search") {
    std::vector<double> x{0.0};
    auto r = lbfgs_minimize([](std::span<const double> v, std::span<double> g) {
        g[0] = -1.0;
        return v[0] > 0.0 ? std::numeric_limits<double>::quiet_NaN() : -v[0];
    }, x);
    CHECK(r.reason == Termination::line_search_failed);
    CHECK(x[0] == 0.0);
}
