#include "npm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "npm/fileio.hpp"

namespace npm::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using scenarios::Scenario;

namespace {

std::string snapshot_name(std::size_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%06zu.csv", step);
    return buf;
}

void write_snapshot(const fs::path& dir, std::size_t step, const core::ParticleSet& ps) {
    io::CsvWriter csv({"id", "tag", "x", "y", "vx", "vy", "p"});
    for (std::size_t b = 0; b < ps.size(); ++b) {
        csv.add(static_cast<long long>(b)).add(core::tag_name(ps.tag[b]));
        csv.add(ps.x[b].x).add(ps.x[b].y).add(ps.v[b].x).add(ps.v[b].y).add(ps.p[b]);
        csv.end_row();
    }
    csv.save(dir / snapshot_name(step));
}

/// Collects per-step output while the run is in progress so a failed run
/// still leaves consistent files behind.
class Recorder {
public:
    Recorder(const RunConfig& config, std::ostream& log)
        : config_(config),
          log_(log),
          series_({"t", "amplitude", "E_pressure", "E_kinetic", "E_potential", "E_total", "front_tip"}),
          steps_({"step", "t", "loss", "sse_v", "sse_div", "sse_pbar", "lbfgs_iterations", "evaluations",
                  "termination", "min_det"}) {
        fs::create_directories(config.out_dir);
        history_.open(config.out_dir / "loss_history.csv", std::ios::trunc);
        if (!history_) throw std::runtime_error("cannot write " + (config.out_dir / "loss_history.csv").string());
        history_ << "time_step,phase,iteration,loss,sse_v,sse_div,sse_pbar\n";
    }

    scenarios::RunHooks hooks() {
        scenarios::RunHooks h;
        const std::size_t total = config_.scenario.step_count();
        h.snapshot = [this](std::size_t step, double, const core::ParticleSet& ps) {
            write_snapshot(config_.out_dir / "snapshots", step, ps);
        };
        h.training = [this](std::size_t step, const optim::HistoryEntry& e, const core::LossBreakdown& b) {
            history_ << step << ',' << optim::to_string(e.phase) << ',' << e.iteration << ','
                     << io::format_double(e.loss) << ',' << io::format_double(b.sse_v) << ','
                     << io::format_double(b.sse_div) << ',' << io::format_double(b.sse_pbar) << '\n';
        };
        h.step = [this, total](const scenarios::StepReport& r) {
            history_.flush();
            reports_.push_back(r);
            steps_.add(static_cast<long long>(r.step)).add(r.t).add(r.loss.total).add(r.loss.sse_v);
            steps_.add(r.loss.sse_div).add(r.loss.sse_pbar).add(static_cast<long long>(r.lbfgs_iterations));
            steps_.add(static_cast<long long>(r.evaluations)).add(optim::to_string(r.reason)).add(r.min_det);
            steps_.end_row();
            steps_.save(config_.out_dir / "steps.csv");
            log_ << "step " << (r.step + 1) << '/' << total << " t=" << r.t << " loss=" << r.loss.total
                 << " lbfgs=" << r.lbfgs_iterations << " (" << optim::to_string(r.reason) << ")\n"
                 << std::flush;
        };
        return h;
    }

    void write_series(const std::vector<scenarios::EnergyRecord>& series) {
        for (const auto& e : series) {
            series_.add(e.t).add(e.amplitude).add(e.pressure).add(e.kinetic).add(e.potential).add(e.total);
            series_.add(e.front_tip);
            series_.end_row();
        }
        series_.save(config_.out_dir / "timeseries.csv");
    }

    const std::vector<scenarios::StepReport>& reports() const { return reports_; }

private:
    const RunConfig& config_;
    std::ostream& log_;
    std::ofstream history_;
    io::CsvWriter series_;
    io::CsvWriter steps_;
    std::vector<scenarios::StepReport> reports_;
};

ordered_json config_json(const RunConfig& c) {
    ordered_json j = ordered_json::object();
    for (const std::string& k : known_keys()) {
        if (k == "run.out") continue;  // keeps summaries of identical runs comparable across directories
        j[k] = get(c, k);
    }
    return j;
}

ordered_json fluid_metrics(const RunConfig& config, const scenarios::FluidResult& r, std::ostream& log) {
    const auto& c = config.scenario;
    const double ref_height = c.scenario == Scenario::dambreak ? 2.0 * c.length : c.height;
    ordered_json m;
    m["particles"] = r.final.size();
    m["pressure_rms"] = r.pressure_rms;
    m["pressure_rms_relative"] = r.pressure_rms / (c.props.rho * c.gravity() * ref_height);
    m["pressure_rms_max"] = r.pressure_rms_max;
    m["max_displacement"] = r.max_displacement;
    m["max_speed"] = r.max_speed;
    m["max_wall_gap"] = r.max_wall_gap;
    m["min_y"] = r.min_y;
    m["total_energy_drift"] = scenarios::total_energy_drift(r.series);
    m["pressure_potential_variation"] = scenarios::pressure_potential_variation(r.series);
    m["kinetic_energy_decays"] = scenarios::kinetic_energy_decays(r.series);
    if (c.scenario == Scenario::sloshing) {
        std::vector<double> t;
        for (const auto& e : r.series) t.push_back(e.t);
        const auto period = scenarios::oscillation_period(t, r.mode_amplitude);
        const auto gauge = scenarios::oscillation_period(r.series);
        m["period"] = period ? ordered_json(*period) : ordered_json();
        m["gauge_period"] = gauge ? ordered_json(*gauge) : ordered_json();
        const double linear = scenarios::linear_sloshing_period(c.gravity(), c.width, c.height);
        m["linear_period"] = linear;
        m["kinetic_energy_retention"] = scenarios::kinetic_energy_retention(r.series, linear);
    }
    if (c.scenario == Scenario::dambreak) {
        io::CsvWriter front({"t", "Tstar", "Zstar"});
        for (const auto& f : r.front) front.add(f.t).add(f.t_star).add(f.z_star).end_row();
        front.save(config.out_dir / "front.csv");
        m["final_Zstar"] = r.front.empty() ? 0.0 : r.front.back().z_star;
        m["front_non_decreasing"] = scenarios::front_non_decreasing(r.front);
        if (config.experiment_csv) {
            const auto rows = scenarios::compare_front(r.front, read_experiment(*config.experiment_csv));
            io::CsvWriter cmp({"Tstar", "Zstar_measured", "Zstar_simulated", "relative_error"});
            double worst = 0.0;
            for (const auto& row : rows) {
                cmp.add(row.t_star).add(row.z_star_measured).add(row.z_star_simulated).add(row.relative_error);
                cmp.end_row();
                worst = std::max(worst, row.relative_error);
            }
            cmp.save(config.out_dir / "comparison.csv");
            m["comparison_points"] = rows.size();
            m["comparison_max_relative_error"] = worst;
            log << "compared " << rows.size() << " measured points, worst relative error " << worst << '\n';
        }
    }
    return m;
}

}  // namespace

std::vector<std::pair<double, double>> read_experiment(const fs::path& path) {
    const io::CsvTable t = io::read_csv(path);
    std::vector<std::pair<double, double>> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) out.emplace_back(t.number(r, "Tstar"), t.number(r, "Zstar"));
    return out;
}

ExitCode run(const RunConfig& config, std::ostream& log) {
    const auto& c = config.scenario;
    const auto start = std::chrono::steady_clock::now();

    ordered_json summary;
    summary["scenario"] = std::string(scenarios::scenario_name(c.scenario));
    summary["seed"] = c.seed;
    summary["layout"] = c.layout.to_string();
    summary["stages"] = c.stages();
    summary["dt"] = c.dt;
    summary["steps"] = c.step_count();

    ExitCode code = ExitCode::ok;
    std::string message;
    ordered_json metrics = ordered_json::object();
    std::unique_ptr<Recorder> rec;
    try {
        rec = std::make_unique<Recorder>(config, log);
        const scenarios::RunHooks hooks = rec->hooks();
        if (c.scenario == Scenario::msd) {
            const scenarios::MsdResult r = scenarios::run_msd(c, hooks);
            io::CsvWriter csv({"t", "q", "v", "q_exact", "stage"});
            for (const auto& s : r.trajectory) csv.add(s.t).add(s.q).add(s.v).add(s.q_exact).add(s.stage ? 1LL : 0LL).end_row();
            csv.save(config.out_dir / "trajectory.csv");
            metrics["max_error"] = r.max_error;
            metrics["max_error_relative"] = r.max_error / std::abs(c.msd.q0);
        } else {
            scenarios::FluidResult r;
            switch (c.scenario) {
                case Scenario::static_pressure: r = scenarios::run_static_pressure(c, hooks); break;
                case Scenario::sloshing: r = scenarios::run_sloshing(c, hooks); break;
                default: r = scenarios::run_dambreak(c, hooks); break;
            }
            rec->write_series(r.series);
            metrics = fluid_metrics(config, r, log);
            if (config.checkpoint) nn::save_checkpoint(r.network, config.out_dir / "network.ckpt");
        }
    } catch (const core::StepRejected& e) {
        code = ExitCode::rejected;
        message = e.what();
    } catch (const scenarios::TrainingDiverged& e) {
        code = ExitCode::diverged;
        message = e.what();
    } catch (const fs::filesystem_error& e) {
        code = ExitCode::io;
        message = e.what();
    }

    std::size_t evaluations = 0, iterations = 0;
    double final_loss = 0.0;
    const std::size_t done = rec ? rec->reports().size() : 0;
    if (rec) {
        for (const auto& r : rec->reports()) {
            evaluations += r.evaluations;
            iterations += r.lbfgs_iterations;
        }
        if (done) final_loss = rec->reports().back().loss.total;
    }
    summary["status"] = code == ExitCode::ok ? "ok" : (code == ExitCode::rejected ? "rejected" : (code == ExitCode::diverged ? "diverged" : "io-error"));
    if (!message.empty()) summary["message"] = message;
    summary["final_loss"] = final_loss;
    summary["runtime"] = {{"steps_completed", done}, {"loss_evaluations", evaluations}, {"lbfgs_iterations", iterations}};
    summary["metrics"] = metrics;
    summary["config"] = config_json(config);

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        io::atomic_write(config.out_dir / "summary.json", summary.dump(2) + "\n");
        ordered_json timing{{"wall_clock_seconds", seconds}, {"seconds_per_step", done ? seconds / done : 0.0}};
        io::atomic_write(config.out_dir / "timing.json", timing.dump(2) + "\n");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return ExitCode::io;
    }
    if (code != ExitCode::ok) log << "error: " << message << '\n';
    return code;
}

}  // namespace npm::cli
