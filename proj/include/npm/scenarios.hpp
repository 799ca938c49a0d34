#pragma once

// The four experiments: mass-spring-damper ODE, static pressure in a closed
// box, sloshing in an open container, and the dam-break outflow. Each run
// reports through RunHooks so the caller decides what to persist.

#include "npm/network.hpp"
#include "npm/optim.hpp"
#include "npm/physics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace npm::scenarios {

enum class Scenario { msd, static_pressure, sloshing, dambreak };

std::string_view scenario_name(Scenario s) noexcept;
/// Throws std::invalid_argument naming the unsupported scenario.
Scenario parse_scenario(std::string_view name);

enum class Distribution { equispaced, jittered, random };

std::string_view distribution_name(Distribution d) noexcept;
Distribution parse_distribution(std::string_view name);

struct MsdProblem {
    double m = 1.0;
    double k = 1.0;
    double d = 0.1;
    double q0 = 1.0;
    std::optional<double> velocity;  ///< initial velocity; default matches the closed form

    double omega0() const;
    /// d / (2 sqrt(k m))
    double damping_ratio() const;
    /// `velocity` if set, otherwise -D w0 q0 so that q(t) = q0 e^{-D w0 t} cos(w0 sqrt(1 - D^2) t)
    /// is the exact solution (0 when k = 0).
    double v0() const;
};

/// Throws std::domain_error unless 0 <= D < 1.
double msd_analytic(const MsdProblem& problem, double t);

struct TrainingConfig {
    std::size_t adam_iters = 100;       ///< first step
    std::size_t warm_adam_iters = 100;  ///< later steps (network warm-started)
    double adam_lr = 1e-3;
    optim::LbfgsSettings lbfgs;           ///< max_iter applies to the first step
    std::size_t warm_lbfgs_max_iter = 5000;  ///< L-BFGS cap for later steps

    optim::TrainSchedule schedule(std::size_t step) const;
};

struct ScenarioConfig {
    Scenario scenario = Scenario::sloshing;
    std::uint64_t seed = 1;

    // Geometry.
    double width = 1.0;
    double height = 1.0;
    double amplitude = 0.0;
    double length = 0.146;  ///< dam-break column width L

    core::FluidProperties props;
    double penalty = 1e7;
    bool contact = true;

    // Discretization.
    Distribution distribution = Distribution::equispaced;
    std::size_t nx = 30;
    std::size_t ny = 30;
    std::size_t particles = 900;  ///< random distribution only
    double jitter = 0.4;          ///< fraction of the spacing
    double particles_per_length = 20.0;
    double slip_delta = -1.0;  ///< negative: half the initial spacing

    // Time.
    double dt = 0.1;
    std::size_t steps = 0;  ///< 0: ceil(t_end / dt)
    double t_end = 14.0;

    nn::NetworkLayout layout{{2, 60, 60, 62}};
    double input_scale = 1.0;
    core::LossWeights weights;
    TrainingConfig training;

    MsdProblem msd;

    double time_factor = 2.0;  ///< dam break: T* = t sqrt(time_factor g / L)

    std::size_t snapshot_interval = 0;  ///< 0: every step up to 100 steps, else ~100 snapshots
    std::vector<double> snapshot_times;  ///< extra snapshots nearest to these times

    std::size_t stages() const;
    std::size_t step_count() const;
    double gravity() const { return -props.body_accel.y; }
    void validate() const;
};

/// Reference configuration of a scenario.
ScenarioConfig default_config(Scenario s);

double surface_elevation(double x, double w, double h, double a);

/// Particle layouts. Corners: bottom beats side, free surface beats side.
core::ParticleSet seed_particles(const ScenarioConfig& config);
core::ParticleSet seed_dambreak(const ScenarioConfig& config);

struct EnergyRecord {
    double t = 0.0;
    double amplitude = 0.0;
    double pressure = 0.0;
    double kinetic = 0.0;
    double potential = 0.0;
    double total = 0.0;
    double front_tip = 0.0;
};

/// Mean specific energies: p, rho v^2 / 2, rho g y.
EnergyRecord energy_record(const core::ParticleSet& particles, const core::FluidProperties& props, double t);

struct StepReport {
    std::size_t step = 0;
    double t = 0.0;
    core::LossBreakdown loss;
    std::size_t lbfgs_iterations = 0;
    std::size_t evaluations = 0;
    optim::Termination reason = optim::Termination::max_iterations;
    double min_det = 0.0;
};

struct RunHooks {
    std::function<void(std::size_t step, double t, const core::ParticleSet&)> snapshot;
    std::function<void(std::size_t step, const optim::HistoryEntry&, const core::LossBreakdown&)> training;
    std::function<void(const StepReport&)> step;
};

/// Training produced a non-finite loss or gradient.
class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MsdSample {
    double t;
    double q;
    double v;
    double q_exact;
    bool stage;  ///< collocation point inside a step rather than a step end
};

struct MsdResult {
    std::vector<MsdSample> trajectory;
    std::vector<StepReport> steps;
    double max_error = 0.0;  ///< over samples with t <= t_end
};

MsdResult run_msd(const ScenarioConfig& config, const RunHooks& hooks = {});

struct FrontSample {
    double t;
    double t_star;
    double z_star;
};

struct ComparisonRow {
    double t_star;
    double z_star_measured;
    double z_star_simulated;
    double relative_error;
};

struct FluidResult {
    std::vector<StepReport> steps;
    std::vector<EnergyRecord> series;
    std::vector<double> mode_amplitude;  ///< first sloshing mode, one per series entry
    core::ParticleSet initial;
    core::ParticleSet final;
    nn::NetworkParams network;

    double pressure_rms = 0.0;      ///< final step, against rho g (h - y)
    double pressure_rms_max = 0.0;  ///< worst over steps
    double max_displacement = 0.0;
    double max_speed = 0.0;
    double max_wall_gap = 0.0;  ///< signed; negative means every particle inside
    double min_y = 0.0;

    std::vector<FrontSample> front;
};

FluidResult run_static_pressure(const ScenarioConfig& config, const RunHooks& hooks = {});
FluidResult run_sloshing(const ScenarioConfig& config, const RunHooks& hooks = {});
FluidResult run_dambreak(const ScenarioConfig& config, const RunHooks& hooks = {});

// ---- Diagnostics ------------------------------------------------------------------

/// 2 * mean spacing of zero crossings of the amplitude; nullopt with fewer
/// than three crossings.
std::optional<double> oscillation_period(const std::vector<EnergyRecord>& series);
std::optional<double> oscillation_period(std::span<const double> t, std::span<const double> a);

/// (2/w) * integral of (eta - h) cos(pi x / w) over the free-surface
/// particles (trapezoid in x). Equals a for the initial sloshing profile.
double first_mode_amplitude(const core::ParticleSet& particles, double w, double h);

/// Linear standing-wave period 2 pi / sqrt(g (pi / w) tanh(pi h / w)).
double linear_sloshing_period(double g, double w, double h);

/// (max - min) / |initial| of pressure + potential energy.
double pressure_potential_variation(const std::vector<EnergyRecord>& series);

/// Relative change of the total energy between the first and last record.
double total_energy_drift(const std::vector<EnergyRecord>& series);

/// Local maxima of the kinetic energy strictly decrease and the final value
/// is below half the overall maximum.
bool kinetic_energy_decays(const std::vector<EnergyRecord>& series);

/// Peak kinetic energy over the last `window` seconds divided by the peak over
/// the first `window` seconds; 1 for an undamped oscillation.
double kinetic_energy_retention(const std::vector<EnergyRecord>& series, double window);

/// Interpolates the simulated front at every measured T* inside the
/// simulated range.
std::vector<ComparisonRow> compare_front(const std::vector<FrontSample>& front,
                                         const std::vector<std::pair<double, double>>& measured);

bool front_non_decreasing(const std::vector<FrontSample>& front, double tolerance = 0.0);

}  // namespace npm::scenarios
