#include "npm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace npm::scenarios {

using core::Tag;

namespace {

struct Geometry {
    core::BoundaryProjection projection;
    std::vector<core::WallPlane> walls;
    double ref_height = 1.0;  ///< level of p = 0 in the hydrostatic reference
};

std::vector<core::WallPlane> container_walls(double w) {
    return {{{0.0, 0.0}, {-1.0, 0.0}}, {{w, 0.0}, {1.0, 0.0}}, {{0.0, 0.0}, {0.0, -1.0}}};
}

double wall_gap(const std::vector<core::WallPlane>& walls, core::Vec2 x) {
    double g = -std::numeric_limits<double>::infinity();
    for (const auto& w : walls) {
        g = std::max(g, (x.x - w.point.x) * w.normal.x + (x.y - w.point.y) * w.normal.y);
    }
    return g;
}

double amplitude_of(const core::ParticleSet& ps, double h) {
    double best_x = std::numeric_limits<double>::infinity();
    double y = h;
    for (std::size_t b = 0; b < ps.size(); ++b) {
        if (ps.tag[b] == Tag::free_surface && ps.x[b].x < best_x) {
            best_x = ps.x[b].x;
            y = ps.x[b].y;
        }
    }
    return y - h;
}

std::set<std::size_t> snapshot_steps(const ScenarioConfig& c, std::size_t n_steps) {
    std::size_t every = c.snapshot_interval;
    if (every == 0) every = n_steps <= 100 ? 1 : (n_steps + 99) / 100;
    std::set<std::size_t> out;
    for (std::size_t k = 0; k <= n_steps; k += every) out.insert(k);
    out.insert(n_steps);
    for (double t : c.snapshot_times) {
        const double k = std::round(t / c.dt);
        if (k >= 0.0 && k <= static_cast<double>(n_steps)) out.insert(static_cast<std::size_t>(k));
    }
    return out;
}

/// Called before every step; may move or re-tag particles and returns the
/// geometry the step is trained on.
using Prepare = std::function<Geometry(core::ParticleSet&)>;

FluidResult run_fluid(const ScenarioConfig& c, core::ParticleSet particles, const Prepare& prepare,
                      const RunHooks& hooks) {
    const std::size_t n_steps = c.step_count();
    const std::set<std::size_t> snaps = snapshot_steps(c, n_steps);
    const irk::ButcherTableau tableau = irk::gauss_legendre(c.stages());

    FluidResult r;
    r.initial = particles;
    r.network = nn::init(c.layout, c.seed);

    auto record = [&](double t, double ref_height) {
        EnergyRecord e = energy_record(particles, c.props, t);
        e.amplitude = amplitude_of(particles, c.height);
        r.series.push_back(e);
        r.mode_amplitude.push_back(first_mode_amplitude(particles, c.width, c.height));
        if (c.scenario == Scenario::dambreak) {
            r.front.push_back({t, t * std::sqrt(c.time_factor * c.gravity() / c.length), e.front_tip / c.length});
        }
        double sq = 0.0;
        for (std::size_t b = 0; b < particles.size(); ++b) {
            const double d = particles.p[b] - c.props.rho * c.gravity() * (ref_height - particles.x[b].y);
            sq += d * d;
        }
        return std::sqrt(sq / static_cast<double>(particles.size()));
    };

    Geometry geo = prepare(particles);
    record(0.0, geo.ref_height);
    if (snaps.count(0) && hooks.snapshot) hooks.snapshot(0, 0.0, particles);

    for (std::size_t n = 0; n < n_steps; ++n) {
        const double t_next = static_cast<double>(n + 1) * c.dt;
        if (n > 0) geo = prepare(particles);

        core::StepContext ctx;
        ctx.tableau = tableau;
        ctx.dt = c.dt;
        ctx.props = c.props;
        ctx.projection = geo.projection;
        if (c.contact) ctx.contact = {c.penalty, geo.walls};
        ctx.weights = c.weights;
        ctx.input_scale = c.input_scale;

        core::StepProblem problem(particles, ctx, c.layout);
        nn::NetworkParams work = r.network;
        optim::LossOracle oracle = [&](std::span<const double> x, std::span<double> grad) {
            std::copy(x.begin(), x.end(), work.values().begin());
            return problem.evaluate(work, grad);
        };
        const optim::TrainSchedule schedule = c.training.schedule(n);
        optim::TrainResult tr;
        try {
            tr = optim::train(oracle, r.network.values(), schedule, [&](const optim::HistoryEntry& h) {
                if (hooks.training) hooks.training(n, h, problem.breakdown());
            });
        } catch (const optim::NonFiniteGradient& e) {
            throw TrainingDiverged("step " + std::to_string(n) + ": " + e.what());
        }
        if (!std::isfinite(tr.final_loss) || !r.network.all_finite()) {
            throw TrainingDiverged("step " + std::to_string(n) + ": non-finite loss");
        }

        const core::StageSolution sol = problem.solution(r.network);
        core::check_step(sol, c.dt);
        const core::LossBreakdown loss = problem.breakdown();
        core::advance_step(particles, sol);

        StepReport report;
        report.step = n;
        report.t = t_next;
        report.loss = loss;
        report.lbfgs_iterations = tr.lbfgs.iterations;
        report.evaluations = tr.evaluations;
        report.reason = tr.lbfgs.reason;
        report.min_det = sol.min_det;
        r.steps.push_back(report);

        const double rms = record(t_next, geo.ref_height);
        r.pressure_rms = rms;
        r.pressure_rms_max = std::max(r.pressure_rms_max, rms);
        if (hooks.step) hooks.step(report);
        if (snaps.count(n + 1) && hooks.snapshot) hooks.snapshot(n + 1, t_next, particles);
    }

    if (n_steps == 0) {
        r.pressure_rms = record(0.0, geo.ref_height);
        r.series.pop_back();
        if (!r.front.empty()) r.front.pop_back();
        r.pressure_rms_max = r.pressure_rms;
    }
    r.max_wall_gap = -std::numeric_limits<double>::infinity();
    r.min_y = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < particles.size(); ++b) {
        const core::Vec2 x = particles.x[b], x0 = r.initial.x[b], v = particles.v[b];
        r.max_displacement = std::max(r.max_displacement, std::hypot(x.x - x0.x, x.y - x0.y));
        r.max_speed = std::max(r.max_speed, std::hypot(v.x, v.y));
        r.max_wall_gap = std::max(r.max_wall_gap, wall_gap(geo.walls, x));
        r.min_y = std::min(r.min_y, x.y);
    }
    r.final = std::move(particles);
    return r;
}

void require(const ScenarioConfig& c, Scenario s, const char* fn) {
    c.validate();
    if (c.scenario != s) throw std::invalid_argument(std::string(fn) + " called with scenario " +
                                                     std::string(scenario_name(c.scenario)));
}

FluidResult run_container(const ScenarioConfig& c, const RunHooks& hooks) {
    Geometry geo{core::distance_functions(c.width, c.height), container_walls(c.width), c.height};
    return run_fluid(c, seed_particles(c), [geo](core::ParticleSet&) { return geo; }, hooks);
}

}  // namespace

FluidResult run_static_pressure(const ScenarioConfig& config, const RunHooks& hooks) {
    require(config, Scenario::static_pressure, "run_static_pressure");
    return run_container(config, hooks);
}

FluidResult run_sloshing(const ScenarioConfig& config, const RunHooks& hooks) {
    require(config, Scenario::sloshing, "run_sloshing");
    return run_container(config, hooks);
}

FluidResult run_dambreak(const ScenarioConfig& config, const RunHooks& hooks) {
    require(config, Scenario::dambreak, "run_dambreak");
    const double spacing = config.length / std::round(config.particles_per_length);
    const double delta = config.slip_delta >= 0.0 ? config.slip_delta : 0.5 * spacing;
    const std::vector<core::WallPlane> walls{{{0.0, 0.0}, {-1.0, 0.0}}, {{0.0, 0.0}, {0.0, -1.0}}};
    const double column = 2.0 * config.length;
    auto prepare = [&](core::ParticleSet& ps) {
        // No right wall during the outflow: nothing reaches it.
        core::slip_relax(ps, delta, std::numeric_limits<double>::infinity());
        const core::Extents ext = core::refresh_extents(ps);
        return Geometry{core::linear_projection(ext.w, ext.h), walls, column};
    };
    return run_fluid(config, seed_dambreak(config), prepare, hooks);
}

}  // namespace npm::scenarios
