#include "npm/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace npm::scenarios {

using core::Tag;

std::string_view scenario_name(Scenario s) noexcept {
    switch (s) {
        case Scenario::msd: return "msd";
        case Scenario::static_pressure: return "static-pressure";
        case Scenario::sloshing: return "sloshing";
        case Scenario::dambreak: return "dambreak";
    }
    return "msd";
}

Scenario parse_scenario(std::string_view name) {
    for (Scenario s : {Scenario::msd, Scenario::static_pressure, Scenario::sloshing, Scenario::dambreak}) {
        if (scenario_name(s) == name) return s;
    }
    throw std::invalid_argument("unsupported scenario '" + std::string(name) +
                                "' (expected msd, static-pressure, sloshing or dambreak)");
}

std::string_view distribution_name(Distribution d) noexcept {
    switch (d) {
        case Distribution::equispaced: return "equispaced";
        case Distribution::jittered: return "jittered";
        case Distribution::random: return "random";
    }
    return "equispaced";
}

Distribution parse_distribution(std::string_view name) {
    for (Distribution d : {Distribution::equispaced, Distribution::jittered, Distribution::random}) {
        if (distribution_name(d) == name) return d;
    }
    throw std::invalid_argument("unknown particle distribution '" + std::string(name) + "'");
}

double MsdProblem::omega0() const { return std::sqrt(k / m); }

double MsdProblem::damping_ratio() const { return d / (2.0 * std::sqrt(k * m)); }

double MsdProblem::v0() const {
    if (velocity) return *velocity;
    if (k == 0.0) return 0.0;
    return -damping_ratio() * omega0() * q0;
}

double msd_analytic(const MsdProblem& p, double t) {
    const double D = p.damping_ratio();
    if (!(D >= 0.0 && D < 1.0)) throw std::domain_error("closed form needs under-critical damping (0 <= D < 1)");
    const double w0 = p.omega0();
    return p.q0 * std::exp(-D * w0 * t) * std::cos(w0 * std::sqrt(1.0 - D * D) * t);
}

std::size_t ScenarioConfig::stages() const {
    if (scenario == Scenario::msd) return layout.output_width() - 1;
    return nn::OutputSchema::fluid_for_width(layout.output_width()).stages;
}

std::size_t ScenarioConfig::step_count() const {
    if (steps > 0) return steps;
    return static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
}

void ScenarioConfig::validate() const {
    layout.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (steps == 0 && !(t_end > 0.0)) throw std::invalid_argument("t_end must be positive when steps is 0");
    if (!(input_scale > 0.0)) throw std::invalid_argument("input scale must be positive");
    if (scenario == Scenario::msd) {
        if (layout.input_width() != 1) throw std::invalid_argument("msd network needs one input");
        if (layout.output_width() < 2) throw std::invalid_argument("msd network needs at least two outputs");
        if (!(msd.m > 0.0) || msd.k < 0.0 || msd.d < 0.0) throw std::invalid_argument("invalid mass-spring-damper");
        return;
    }
    if (layout.input_width() != 2) throw std::invalid_argument("fluid network needs two inputs");
    (void)stages();
    props.validate();
    if (!(width > 0.0) || !(height > 0.0) || !(length > 0.0)) throw std::invalid_argument("extents must be positive");
    if (contact && !(penalty > 0.0)) throw std::invalid_argument("contact penalty must be positive");
    if (jitter < 0.0 || jitter >= 0.5) throw std::invalid_argument("jitter must be in [0, 0.5)");
}

optim::TrainSchedule TrainingConfig::schedule(std::size_t step) const {
    optim::TrainSchedule s{step == 0 ? adam_iters : warm_adam_iters, adam_lr, lbfgs};
    if (step > 0) s.lbfgs.max_iter = warm_lbfgs_max_iter;
    return s;
}

ScenarioConfig default_config(Scenario s) {
    ScenarioConfig c;
    c.scenario = s;
    if (s != Scenario::msd) {
        c.training.warm_adam_iters = 0;
        c.training.warm_lbfgs_max_iter = 4000;
    }
    switch (s) {
        case Scenario::msd:
            c.layout = nn::NetworkLayout{{1, 20, 20, 9}};
            c.dt = std::numbers::pi;
            c.t_end = 20.0;
            c.contact = false;
            c.training.warm_adam_iters = 100;
            break;
        case Scenario::static_pressure:
            c.props = {1.0, {0.0, -10.0}};
            c.dt = 1.0;
            c.t_end = 50.0;
            break;
        case Scenario::sloshing:
            c.props = {1.0, {0.0, -1.0}};
            c.amplitude = 0.01;
            c.dt = 0.1;
            c.t_end = 14.0;
            break;
        case Scenario::dambreak:
            c.props = {1.0, {0.0, -9.8}};
            c.dt = 0.01;
            c.t_end = 0.3;
            c.input_scale = 1.0 / c.length;
            break;
    }
    return c;
}

double surface_elevation(double x, double w, double h, double a) {
    return h - a * std::sin(std::numbers::pi / w * (x - w / 2.0));
}

namespace {

Tag grid_tag(std::size_t i, std::size_t j, std::size_t nx, std::size_t ny) {
    if (j == 0) return Tag::wall_bottom;
    if (j + 1 == ny) return Tag::free_surface;
    if (i == 0) return Tag::wall_left;
    if (i + 1 == nx) return Tag::wall_right;
    return Tag::interior;
}

core::ParticleSet seed_grid(const ScenarioConfig& c, bool jitter) {
    if (c.nx < 2 || c.ny < 2 || c.nx * c.ny < 4) throw std::invalid_argument("particle count below 4");
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(-c.jitter, c.jitter);
    const double w = c.width, h = c.height;
    core::ParticleSet ps;
    for (std::size_t i = 0; i < c.nx; ++i) {
        const double x = (i + 1 == c.nx) ? w : w * static_cast<double>(i) / static_cast<double>(c.nx - 1);
        const double eta = surface_elevation(x, w, h, c.amplitude);
        for (std::size_t j = 0; j < c.ny; ++j) {
            double y = (j + 1 == c.ny) ? eta : eta * static_cast<double>(j) / static_cast<double>(c.ny - 1);
            double px = x;
            const Tag t = grid_tag(i, j, c.nx, c.ny);
            if (jitter && t == Tag::interior) {
                px += u(rng) * w / static_cast<double>(c.nx - 1);
                y += u(rng) * eta / static_cast<double>(c.ny - 1);
            }
            ps.add({px, y}, {0.0, 0.0}, t);
        }
    }
    return ps;
}

core::ParticleSet seed_random(const ScenarioConfig& c) {
    const std::size_t n = c.particles;
    if (n < 9) throw std::invalid_argument("random distribution needs at least 9 particles");
    const std::size_t n_wall = n / 9;
    const std::size_t n_surf = n / 9;
    const std::size_t n_int = n - n_wall - n_surf;
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double w = c.width, h = c.height, a = c.amplitude;
    const double eta_l = surface_elevation(0.0, w, h, a);
    const double eta_r = surface_elevation(w, w, h, a);
    const double margin = 0.1 * std::sqrt(w * h / static_cast<double>(n));

    core::ParticleSet ps;
    ps.add({0.0, 0.0}, {}, Tag::wall_bottom);
    ps.add({w, 0.0}, {}, Tag::wall_bottom);
    ps.add({0.0, eta_l}, {}, Tag::free_surface);
    ps.add({w, eta_r}, {}, Tag::free_surface);

    // Walls: uniform along the U-shaped path left -> bottom -> right.
    const double path = eta_l + w + eta_r;
    for (std::size_t k = 2; k < n_wall; ++k) {
        const double s = path * u(rng);
        if (s < eta_l) {
            ps.add({0.0, std::clamp(eta_l - s, margin, eta_l - margin)}, {}, Tag::wall_left);
        } else if (s < eta_l + w) {
            ps.add({std::clamp(s - eta_l, margin, w - margin), 0.0}, {}, Tag::wall_bottom);
        } else {
            ps.add({w, std::clamp(s - eta_l - w, margin, eta_r - margin)}, {}, Tag::wall_right);
        }
    }
    for (std::size_t k = 2; k < n_surf; ++k) {
        const double x = margin + (w - 2.0 * margin) * u(rng);
        ps.add({x, surface_elevation(x, w, h, a)}, {}, Tag::free_surface);
    }
    for (std::size_t k = 0; k < n_int;) {
        const double x = w * u(rng);
        const double eta = surface_elevation(x, w, h, a);
        const double y = eta * u(rng);
        if (x < margin || x > w - margin || y < margin || y > eta - margin) continue;
        ps.add({x, y}, {}, Tag::interior);
        ++k;
    }
    return ps;
}

}  // namespace

core::ParticleSet seed_particles(const ScenarioConfig& c) {
    core::ParticleSet ps;
    switch (c.distribution) {
        case Distribution::equispaced: ps = seed_grid(c, false); break;
        case Distribution::jittered: ps = seed_grid(c, true); break;
        case Distribution::random: ps = seed_random(c); break;
    }
    // Start from the hydrostatic pressure under the initial surface.
    for (std::size_t b = 0; b < ps.size(); ++b) {
        const double eta = surface_elevation(ps.x[b].x, c.width, c.height, c.amplitude);
        ps.p[b] = c.props.rho * c.gravity() * (eta - ps.x[b].y);
    }
    return ps;
}

core::ParticleSet seed_dambreak(const ScenarioConfig& c) {
    const auto per_l = static_cast<std::size_t>(std::llround(c.particles_per_length));
    if (per_l < 1) throw std::invalid_argument("particles per length must be at least 1");
    const std::size_t nx = per_l + 1, ny = 2 * per_l + 1;
    const double L = c.length, H = 2.0 * c.length;
    core::ParticleSet ps;
    for (std::size_t i = 0; i < nx; ++i) {
        const double x = (i + 1 == nx) ? L : L * static_cast<double>(i) / static_cast<double>(per_l);
        for (std::size_t j = 0; j < ny; ++j) {
            const double y = (j + 1 == ny) ? H : H * static_cast<double>(j) / static_cast<double>(2 * per_l);
            Tag t = Tag::interior;
            if (j == 0) {
                t = Tag::wall_bottom;
            } else if (j + 1 == ny || i + 1 == nx) {
                t = Tag::free_surface;
            } else if (i == 0) {
                t = Tag::wall_left;
            }
            ps.add({x, y}, {0.0, 0.0}, t, c.props.rho * c.gravity() * (H - y));
        }
    }
    return ps;
}

EnergyRecord energy_record(const core::ParticleSet& particles, const core::FluidProperties& props, double t) {
    EnergyRecord e;
    e.t = t;
    const double g = -props.body_accel.y;
    const std::size_t n = particles.size();
    e.front_tip = n ? particles.x[0].x : 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const core::Vec2 v = particles.v[b];
        e.pressure += particles.p[b];
        e.kinetic += 0.5 * props.rho * (v.x * v.x + v.y * v.y);
        e.potential += props.rho * g * particles.x[b].y;
        e.front_tip = std::max(e.front_tip, particles.x[b].x);
    }
    if (n) {
        e.pressure /= static_cast<double>(n);
        e.kinetic /= static_cast<double>(n);
        e.potential /= static_cast<double>(n);
    }
    e.total = e.pressure + e.kinetic + e.potential;
    return e;
}

}  // namespace npm::scenarios
