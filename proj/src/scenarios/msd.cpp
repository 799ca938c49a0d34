#include "npm/autodiff.hpp"
#include "npm/irk.hpp"
#include "npm/scenarios.hpp"

#include <algorithm>
#include <cmath>

namespace npm::scenarios {

namespace {

struct MsdStep {
    irk::ButcherTableau tab;
    nn::NetworkLayout layout;
    MsdProblem problem;
    double dt;
    double input_scale;
    double q_n;
    double v_n;

    template <typename T>
    struct Prediction {
        std::vector<T> v_stages;
        std::vector<T> v_next;
        irk::StageValues<T> q;
    };

    template <typename T>
    Prediction<T> predict(std::span<const T> params) const {
        const std::vector<T> in{T(q_n * input_scale)};
        std::vector<T> out = nn::forward<T>(layout, params, in);
        Prediction<T> p;
        p.v_stages.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(tab.stages));
        p.v_next.assign(out.begin() + static_cast<std::ptrdiff_t>(tab.stages), out.end());
        const std::vector<T> x0{T(q_n)};
        p.q = irk::position_update<T>(tab, x0, p.v_stages, dt);
        return p;
    }

    template <typename T>
    T loss(std::span<const T> params) const {
        const Prediction<T> p = predict(params);
        std::vector<T> acc(tab.stages);
        for (std::size_t i = 0; i < tab.stages; ++i) {
            acc[i] = -(problem.d / problem.m) * p.v_stages[i] - (problem.k / problem.m) * p.q.stages[i];
        }
        const irk::StageValues<T> est = irk::velocity_estimates<T>(tab, p.v_stages, p.v_next, acc, dt, 1);
        T sse = T(0.0);
        for (const T& e : est.stages) sse = sse + (e - v_n) * (e - v_n);
        sse = sse + (est.next[0] - v_n) * (est.next[0] - v_n);
        return sse;
    }
};

}  // namespace

MsdResult run_msd(const ScenarioConfig& config, const RunHooks& hooks) {
    config.validate();
    if (config.scenario != Scenario::msd) throw std::invalid_argument("run_msd needs the msd scenario");
    const MsdProblem& prob = config.msd;
    const bool closed_form = prob.k > 0.0 && prob.damping_ratio() < 1.0 && !prob.velocity;
    auto exact = [&](double t) {
        if (closed_form) return msd_analytic(prob, t);
        if (prob.k == 0.0 && prob.d == 0.0) return prob.q0 + prob.v0() * t;
        return std::nan("");
    };

    MsdStep step{irk::gauss_legendre(config.stages()), config.layout, prob, config.dt, config.input_scale,
                 prob.q0, prob.v0()};
    nn::NetworkParams net = nn::init(config.layout, config.seed);
    MsdResult result;
    result.trajectory.push_back({0.0, step.q_n, step.v_n, exact(0.0), false});

    const std::size_t n_steps = config.step_count();
    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t_n = static_cast<double>(n) * config.dt;
        optim::LossOracle oracle = [&](std::span<const double> x, std::span<double> grad) {
            const ad::ValueAndGradient vg = ad::value_and_grad(
                [&](ad::Tape&, std::span<const ad::Var> p) { return step.loss<ad::Var>(p); }, x);
            std::copy(vg.gradient.begin(), vg.gradient.end(), grad.begin());
            return vg.value;
        };
        const optim::TrainSchedule schedule = config.training.schedule(n);
        optim::TrainResult tr;
        try {
            tr = optim::train(oracle, net.values(), schedule, [&](const optim::HistoryEntry& h) {
                if (hooks.training) hooks.training(n, h, core::LossBreakdown{h.loss, 0.0, 0.0, h.loss});
            });
        } catch (const optim::NonFiniteGradient& e) {
            throw TrainingDiverged("msd step " + std::to_string(n) + ": " + e.what());
        }
        if (!std::isfinite(tr.final_loss) || !net.all_finite()) {
            throw TrainingDiverged("msd step " + std::to_string(n) + ": non-finite loss");
        }

        const std::span<const double> values = net.values();
        const auto pred = step.predict<double>(values);
        for (std::size_t j = 0; j < step.tab.stages; ++j) {
            const double t = t_n + step.tab.c[j] * config.dt;
            result.trajectory.push_back({t, pred.q.stages[j], pred.v_stages[j], exact(t), true});
        }
        step.q_n = pred.q.next[0];
        step.v_n = pred.v_next[0];
        const double t_next = t_n + config.dt;
        result.trajectory.push_back({t_next, step.q_n, step.v_n, exact(t_next), false});

        StepReport report;
        report.step = n;
        report.t = t_next;
        report.loss = {tr.final_loss, 0.0, 0.0, tr.final_loss};
        report.lbfgs_iterations = tr.lbfgs.iterations;
        report.evaluations = tr.evaluations;
        report.reason = tr.lbfgs.reason;
        report.min_det = 1.0;
        result.steps.push_back(report);
        if (hooks.step) hooks.step(report);
    }

    const double horizon = config.steps > 0 ? n_steps * config.dt : config.t_end;
    for (const MsdSample& s : result.trajectory) {
        if (s.t <= horizon + 1e-12 && std::isfinite(s.q_exact)) {
            result.max_error = std::max(result.max_error, std::abs(s.q - s.q_exact));
        }
    }
    return result;
}

}  // namespace npm::scenarios
