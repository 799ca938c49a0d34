#include "npm/scenarios.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace npm;
using namespace npm::scenarios;
using core::Tag;

TEST_CASE("scenario names round-trip and unknown names are rejected") {
    for (Scenario s : {Scenario::msd, Scenario::static_pressure, Scenario::sloshing, Scenario::dambreak}) {
        CHECK(parse_scenario(scenario_name(s)) == s);
    }
    CHECK_THROWS_AS(parse_scenario("viscous"), std::invalid_argument);
    CHECK_THROWS_AS(parse_distribution("hexagonal"), std::invalid_argument);
}

TEST_CASE("mass-spring-damper closed form") {
    MsdProblem p;
    CHECK(msd_analytic(p, 0.0) == doctest::Approx(1.0));
    // Value computed independently with Python's math module.
    CHECK(std::abs(msd_analytic(p, 10.0) - (-0.5130098412520022)) < 1e-14);

    MsdProblem undamped{1.0, 4.0, 0.0, 0.3, {}};
    CHECK(std::abs(msd_analytic(undamped, 2.0 * std::numbers::pi / undamped.omega0()) - 0.3) < 1e-14);
    CHECK(undamped.v0() == 0.0);

    MsdProblem critical{1.0, 1.0, 2.0, 1.0, {}};
    CHECK_THROWS_AS(msd_analytic(critical, 1.0), std::domain_error);
}

TEST_CASE("initial velocity is the derivative of the closed form at zero") {
    MsdProblem p{2.0, 3.0, 0.4, 0.7, {}};
    const double h = 1e-6;
    const double fd = (msd_analytic(p, h) - msd_analytic(p, -h)) / (2.0 * h);
    CHECK(std::abs(p.v0() - fd) < 1e-8);
    p.velocity = 0.25;
    CHECK(p.v0() == 0.25);
}

TEST_CASE("surface elevation profile") {
    CHECK(surface_elevation(0.5, 1.0, 1.0, 0.01) == doctest::Approx(1.0));
    CHECK(surface_elevation(0.0, 1.0, 1.0, 0.01) == doctest::Approx(1.01));
    CHECK(surface_elevation(1.0, 1.0, 1.0, 0.01) == doctest::Approx(0.99));
}

TEST_CASE("equispaced grid tags corners bottom first, then free surface") {
    ScenarioConfig c = default_config(Scenario::static_pressure);
    c.nx = 3;
    c.ny = 3;
    const core::ParticleSet ps = seed_particles(c);
    REQUIRE(ps.size() == 9);
    CHECK(ps.x[0].x == 0.0);
    CHECK(ps.x[0].y == 0.0);
    CHECK(ps.tag[0] == Tag::wall_bottom);
    CHECK(ps.tag[1] == Tag::wall_left);
    CHECK(ps.tag[2] == Tag::free_surface);
    CHECK(ps.tag[4] == Tag::interior);
    CHECK(ps.tag[6] == Tag::wall_bottom);
    CHECK(ps.tag[7] == Tag::wall_right);
    CHECK(ps.tag[8] == Tag::free_surface);
    CHECK(ps.count(Tag::wall_bottom) == 3);
    CHECK(ps.count(Tag::free_surface) == 3);
}

TEST_CASE("seeded pressure is hydrostatic") {
    ScenarioConfig c = default_config(Scenario::static_pressure);
    const core::ParticleSet ps = seed_particles(c);
    REQUIRE(ps.size() == 900);
    for (std::size_t b = 0; b < ps.size(); ++b) {
        CHECK(ps.p[b] == doctest::Approx(10.0 * (1.0 - ps.x[b].y)));
    }
    CHECK(ps.p[0] == doctest::Approx(10.0));
}

TEST_CASE("sloshing grid follows the free surface") {
    ScenarioConfig c = default_config(Scenario::sloshing);
    const core::ParticleSet ps = seed_particles(c);
    for (std::size_t b = 0; b < ps.size(); ++b) {
        if (ps.tag[b] != Tag::free_surface) continue;
        CHECK(std::abs(ps.x[b].y - surface_elevation(ps.x[b].x, 1.0, 1.0, 0.01)) < 1e-15);
        CHECK(std::abs(ps.p[b]) < 1e-15);
    }
}

TEST_CASE("jittered and random layouts are reproducible and stay inside") {
    for (Distribution d : {Distribution::jittered, Distribution::random}) {
        ScenarioConfig c = default_config(Scenario::sloshing);
        c.amplitude = 0.2;
        c.distribution = d;
        c.seed = 7;
        const core::ParticleSet a = seed_particles(c);
        const core::ParticleSet b = seed_particles(c);
        REQUIRE(a.size() == 900);
        REQUIRE(a.size() == b.size());
        bool moved = false;
        for (std::size_t k = 0; k < a.size(); ++k) {
            CHECK(a.x[k].x == b.x[k].x);
            CHECK(a.x[k].y == b.x[k].y);
            CHECK(a.x[k].x >= 0.0);
            CHECK(a.x[k].x <= 1.0);
            CHECK(a.x[k].y >= 0.0);
            CHECK(a.x[k].y <= surface_elevation(a.x[k].x, 1.0, 1.0, 0.2) + 1e-15);
            if (a.tag[k] == Tag::wall_left) CHECK(a.x[k].x == 0.0);
            if (a.tag[k] == Tag::wall_right) CHECK(a.x[k].x == 1.0);
            if (a.tag[k] == Tag::wall_bottom) CHECK(a.x[k].y == 0.0);
        }
        c.seed = 8;
        const core::ParticleSet other = seed_particles(c);
        for (std::size_t k = 0; k < a.size(); ++k) moved = moved || a.x[k].x != other.x[k].x;
        CHECK(moved);
    }
}

TEST_CASE("random layout splits wall, surface and interior particles") {
    ScenarioConfig c = default_config(Scenario::sloshing);
    c.distribution = Distribution::random;
    const core::ParticleSet ps = seed_particles(c);
    const std::size_t walls = ps.count(Tag::wall_left) + ps.count(Tag::wall_right) + ps.count(Tag::wall_bottom);
    CHECK(walls == 100);
    CHECK(ps.count(Tag::free_surface) == 100);
    CHECK(ps.count(Tag::interior) == 700);
}

TEST_CASE("too few particles are rejected") {
    ScenarioConfig c = default_config(Scenario::static_pressure);
    c.nx = 1;
    c.ny = 3;
    CHECK_THROWS_AS(seed_particles(c), std::invalid_argument);
    c.distribution = Distribution::random;
    c.particles = 3;
    CHECK_THROWS_AS(seed_particles(c), std::invalid_argument);
}

TEST_CASE("dam-break column") {
    ScenarioConfig c = default_config(Scenario::dambreak);
    const core::ParticleSet ps = seed_dambreak(c);
    CHECK(ps.size() == 21 * 41);
    double tip = 0.0, top = 0.0;
    for (std::size_t b = 0; b < ps.size(); ++b) {
        tip = std::max(tip, ps.x[b].x);
        top = std::max(top, ps.x[b].y);
        if (ps.x[b].y == 0.0) CHECK(ps.tag[b] == Tag::wall_bottom);
    }
    CHECK(tip == 0.146);
    CHECK(top == doctest::Approx(0.292));
    CHECK(ps.count(Tag::wall_right) == 0);
    CHECK(ps.count(Tag::wall_left) == 39);
    const EnergyRecord e = energy_record(ps, c.props, 0.0);
    CHECK(e.front_tip / c.length == doctest::Approx(1.0));
}

TEST_CASE("energy record") {
    core::ParticleSet ps;
    ps.add({0.0, 0.0}, {1.0, 0.0}, Tag::interior, 0.0);
    core::FluidProperties props{1.0, {0.0, -9.8}};
    EnergyRecord e = energy_record(ps, props, 0.0);
    CHECK(e.kinetic == 0.5);
    CHECK(e.total == 0.5);

    ps.add({0.2, 0.3}, {0.0, 0.0}, Tag::interior, 2.0);
    e = energy_record(ps, props, 1.0);
    CHECK(e.t == 1.0);
    CHECK(e.pressure == doctest::Approx(1.0));
    CHECK(e.kinetic == doctest::Approx(0.25));
    CHECK(e.potential == doctest::Approx(0.5 * 9.8 * 0.3));
    CHECK(e.total == e.pressure + e.kinetic + e.potential);
    CHECK(e.front_tip == 0.2);
}

TEST_CASE("linear sloshing period") {
    // 2 pi / sqrt(pi tanh(pi)), evaluated independently.
    CHECK(std::abs(linear_sloshing_period(1.0, 1.0, 1.0) - 3.55153380664589) < 1e-12);
}

namespace {

std::vector<EnergyRecord> cosine_series(double period, double t_end, double dt, double decay = 0.0) {
    std::vector<EnergyRecord> s;
    for (double t = 0.0; t <= t_end + 1e-12; t += dt) {
        EnergyRecord e;
        e.t = t;
        e.amplitude = std::exp(-decay * t) * std::cos(2.0 * std::numbers::pi * t / period);
        e.kinetic = std::exp(-2.0 * decay * t) * std::pow(std::sin(2.0 * std::numbers::pi * t / period), 2);
        e.pressure = 1.0;
        e.potential = 1.0 + 0.001 * e.amplitude;
        e.total = e.pressure + e.potential + e.kinetic;
        s.push_back(e);
    }
    return s;
}

}  // namespace

TEST_CASE("oscillation period from zero crossings") {
    const auto s = cosine_series(3.5, 14.0, 0.1);
    const auto p = oscillation_period(s);
    REQUIRE(p.has_value());
    CHECK(std::abs(*p - 3.5) < 0.01);
    CHECK_FALSE(oscillation_period(cosine_series(3.5, 2.0, 0.1)).has_value());
}

TEST_CASE("first mode amplitude of the free surface") {
    ScenarioConfig c = default_config(Scenario::sloshing);
    const core::ParticleSet ps = seed_particles(c);
    // eta - h = a cos(pi x): the trapezoid rule is exact for this periodic integrand
    CHECK(first_mode_amplitude(ps, 1.0, 1.0) == doctest::Approx(0.01).epsilon(1e-12));

    core::ParticleSet second = ps;
    for (std::size_t b = 0; b < second.size(); ++b) {
        if (second.tag[b] == core::Tag::free_surface) {
            second.x[b].y = 1.0 + 0.01 * std::cos(2.0 * std::numbers::pi * second.x[b].x);
        }
    }
    CHECK(std::abs(first_mode_amplitude(second, 1.0, 1.0)) < 1e-15);
}

TEST_CASE("energy diagnostics") {
    const auto s = cosine_series(3.5, 14.0, 0.1);
    CHECK(pressure_potential_variation(s) == doctest::Approx(0.002 / 2.001).epsilon(1e-3));
    CHECK_FALSE(kinetic_energy_decays(s));
    CHECK(kinetic_energy_decays(cosine_series(3.5, 14.0, 1.0, 0.3)));
    CHECK(kinetic_energy_retention(s, 3.5) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(kinetic_energy_retention(cosine_series(3.5, 14.0, 0.1, 0.3), 3.5) < 0.05);
    std::vector<EnergyRecord> flat(3);
    CHECK_FALSE(kinetic_energy_decays(flat));
    flat[0].total = 2.0;
    flat[2].total = 2.1;
    CHECK(total_energy_drift(flat) == doctest::Approx(0.05));
}

TEST_CASE("front comparison interpolates inside the simulated range") {
    std::vector<FrontSample> front{{0.0, 0.0, 1.0}, {0.1, 1.0, 1.5}, {0.2, 2.0, 2.5}};
    const auto rows = compare_front(front, {{0.5, 1.25}, {2.0, 2.0}, {3.0, 4.0}});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].z_star_simulated == doctest::Approx(1.25));
    CHECK(rows[0].relative_error == doctest::Approx(0.0));
    CHECK(rows[1].z_star_simulated == doctest::Approx(2.5));
    CHECK(rows[1].relative_error == doctest::Approx(0.25));
    CHECK(front_non_decreasing(front));
    front.push_back({0.3, 3.0, 2.4});
    CHECK_FALSE(front_non_decreasing(front));
    CHECK(front_non_decreasing(front, 0.2));
}

TEST_CASE("default configurations") {
    const ScenarioConfig slosh = default_config(Scenario::sloshing);
    CHECK(slosh.layout.to_string() == "2,60,60,62");
    CHECK(slosh.stages() == 20);
    CHECK(slosh.dt == 0.1);
    CHECK(slosh.step_count() == 140);
    CHECK(default_config(Scenario::static_pressure).step_count() == 50);
    CHECK(default_config(Scenario::dambreak).step_count() == 30);
    const ScenarioConfig msd = default_config(Scenario::msd);
    CHECK(msd.stages() == 8);
    CHECK(msd.step_count() == 7);
    ScenarioConfig bad = slosh;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("msd run without dynamics keeps the position") {
    ScenarioConfig c = default_config(Scenario::msd);
    c.msd = {1.0, 0.0, 0.0, 0.5, {}};
    c.layout = nn::NetworkLayout{{1, 8, 3}};
    c.dt = 1.0;
    c.steps = 3;
    const MsdResult r = run_msd(c);
    REQUIRE(r.steps.size() == 3);
    CHECK(r.trajectory.back().t == doctest::Approx(3.0));
    for (const MsdSample& s : r.trajectory) CHECK(std::abs(s.q - 0.5) < 1e-6);
}

TEST_CASE("msd run tracks the damped oscillator over a full period") {
    ScenarioConfig c = default_config(Scenario::msd);
    c.dt = 2.0 * std::numbers::pi;
    c.steps = 1;
    const MsdResult r = run_msd(c);
    CHECK(r.trajectory.size() == 1 + 8 + 1);
    CHECK(r.max_error < 1e-3);
}

TEST_CASE("a short static run stays at rest with hydrostatic pressure") {
    ScenarioConfig c = default_config(Scenario::static_pressure);
    c.nx = 6;
    c.ny = 6;
    c.layout = nn::NetworkLayout{{2, 12, 12, 8}};  // s = 2
    c.steps = 2;
    c.training.lbfgs.max_iter = 300;
    c.training.warm_lbfgs_max_iter = 300;
    std::size_t snapshots = 0, steps = 0;
    RunHooks hooks;
    hooks.snapshot = [&](std::size_t, double, const core::ParticleSet&) { ++snapshots; };
    hooks.step = [&](const StepReport&) { ++steps; };
    const FluidResult r = run_static_pressure(c, hooks);
    CHECK(steps == 2);
    CHECK(snapshots == 3);
    CHECK(r.series.size() == 3);
    CHECK(r.final.size() == 36);
    CHECK(r.max_wall_gap <= 1e-6);
    CHECK(r.pressure_rms / 10.0 < 0.05);
    CHECK(r.max_speed < 0.05);
}
