// Acceptance gate. Each criterion prints its measurements followed by one
// verdict line "criterion <id> PASS|FAIL <summary>"; the exit status is
// nonzero when the verdict is FAIL.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "irk_oracle.hpp"
#include "npm/cli.hpp"
#include "npm/fileio.hpp"
#include "npm/irk.hpp"
#include "random_program.hpp"

namespace fs = std::filesystem;
using namespace npm;
using nlohmann::json;

namespace tol {
constexpr double quadrature = 1e-10;
constexpr double order_slack = 0.2;
constexpr double reverse_fd = 1e-6;
constexpr double nested_fd = 1e-4;
constexpr double msd_error = 0.02;           // fraction of q0
constexpr double static_rms = 0.01;          // fraction of rho g h
constexpr double wall_gap = 1e-6;            // m
constexpr double random_vs_grid = 2.0;
constexpr double pressure_potential = 0.01;  // relative variation
constexpr double period = 0.05;              // relative to the linear oracle
constexpr double front_error = 0.10;
constexpr double refinement = 0.02;
constexpr double below_floor = 1e-6;  // m
}  // namespace tol

namespace {

struct Options {
    std::string criterion;
    std::string scale = "ci";
    fs::path out = "acceptance_artifacts";
    std::string experiment_csv;
    bool reuse = false;
};

class Verdict {
public:
    explicit Verdict(std::string id) : id_(std::move(id)) {}

    void check(bool ok, const std::string& what) {
        std::cout << "  " << (ok ? "ok   " : "FAIL ") << what << '\n' << std::flush;
        pass_ = pass_ && ok;
    }

    int finish(const std::string& summary) const {
        std::cout << "criterion " << id_ << ' ' << (pass_ ? "PASS" : "FAIL") << ' ' << summary << '\n';
        return pass_ ? 0 : 1;
    }

private:
    std::string id_;
    bool pass_ = true;
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

/// Runs a scenario through the CLI orchestration so every artifact lands in
/// out/<name>. With --reuse, a previous run of the same configuration is
/// read back instead.
json run_scenario(const Options& opt, const std::string& name, const std::string& scenario,
                  const cli::KeyValues& flags) {
    cli::Sources src;
    src.scenario = scenario;
    src.flags = flags;
    cli::RunConfig config = cli::resolve(src);
    config.out_dir = opt.out / name;
    if (!opt.experiment_csv.empty() && scenario == "dambreak") config.experiment_csv = opt.experiment_csv;

    const fs::path summary = config.out_dir / "summary.json";
    if (opt.reuse && fs::exists(summary)) {
        const json previous = read_json(summary);
        json expected;
        for (const std::string& k : cli::known_keys()) {
            if (k != "run.out") expected[k] = cli::get(config, k);
        }
        if (previous["status"] == "ok" && previous["config"] == expected) {
            std::cout << "  reusing " << config.out_dir.string() << '\n';
            return previous;
        }
    }
    fs::remove_all(config.out_dir);
    std::cout << "  running " << name << " (" << config.scenario.step_count() << " steps)\n" << std::flush;
    std::ostringstream log;
    const cli::ExitCode code = cli::run(config, log);
    json s = read_json(summary);
    if (code != cli::ExitCode::ok) std::cout << "  run " << name << " failed: " << s.value("message", "") << '\n';
    return s;
}

bool ok(const json& s) { return s.value("status", "") == "ok"; }

double metric(const json& s, const char* key) {
    const auto& m = s["metrics"];
    if (!m.contains(key) || m[key].is_null()) return std::nan("");
    return m[key].get<double>();
}

// ---- 1. Tableau -------------------------------------------------------------

int tableau(const Options&) {
    Verdict v("1");
    double worst = 0.0;
    for (std::size_t s : {1u, 2u, 3u, 5u, 8u, 20u, 50u}) {
        const auto t = irk::gauss_legendre(s);
        for (std::size_t k = 0; k <= 2 * s - 1; ++k) {
            double q = 0.0;
            for (std::size_t j = 0; j < s; ++j) q += t.b[j] * std::pow(t.c[j], static_cast<double>(k));
            worst = std::max(worst, std::abs(q - 1.0 / (k + 1.0)));
        }
    }
    v.check(worst < tol::quadrature, "quadrature conditions, worst residual " + num(worst));
    for (std::size_t s : {1u, 2u, 3u}) {
        const double order = testing::observed_order(irk::gauss_legendre(s), 0.5);
        v.check(order >= 2.0 * s - tol::order_slack,
                "s=" + std::to_string(s) + " observed order " + num(order) + " >= " + num(2.0 * s - tol::order_slack));
    }
    return v.finish("Gauss-Legendre tableaus");
}

// ---- 2. Autodiff ------------------------------------------------------------

int autodiff(const Options&) {
    Verdict v("2");
    double rev = 0.0, nested = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto rp = testing::make_random_program(seed);
        rev = std::max(rev, testing::reverse_mode_error(rp));
        nested = std::max(nested, testing::nested_mode_error(rp));
    }
    v.check(rev < tol::reverse_fd, "reverse mode vs FD on 100 programs, worst " + num(rev));
    v.check(nested < tol::nested_fd, "forward-over-reverse vs FD on 100 programs, worst " + num(nested));
    return v.finish("gradients of random programs");
}

// ---- 3. Mass-spring-damper ----------------------------------------------------

int msd(const Options& opt) {
    Verdict v("3");
    for (double dt : {std::numbers::pi, 2.0 * std::numbers::pi}) {
        const std::string name = dt < 4.0 ? "msd_dt_pi" : "msd_dt_2pi";
        const json s = run_scenario(opt, name, "msd", {{"time.dt", io::format_double(dt)}});
        const double err = metric(s, "max_error_relative");
        v.check(ok(s) && err < tol::msd_error, name + " max |q - q_exact| / q0 = " + num(err));
    }
    return v.finish("IRK s=8 tracks the damped oscillator over t in [0, 20]");
}

// ---- 4. Static pressure -------------------------------------------------------

int static_pressure(const Options& opt) {
    Verdict v("4");
    const bool full = opt.scale == "full";
    const std::string side = full ? "30" : "20";
    const std::string count = full ? "900" : "400";
    const json grid = run_scenario(opt, "static_grid_" + count, "static-pressure",
                                   {{"particles.nx", side}, {"particles.ny", side}});
    const json rnd = run_scenario(opt, "static_random_" + count, "static-pressure",
                                  {{"particles.distribution", "random"}, {"particles.count", count}});
    const double eg = metric(grid, "pressure_rms_relative");
    const double er = metric(rnd, "pressure_rms_relative");
    v.check(ok(grid) && eg < tol::static_rms, count + " grid particles: RMS(p - rho g (h - y)) / rho g h = " + num(eg));
    v.check(ok(grid) && metric(grid, "max_wall_gap") <= tol::wall_gap,
            "grid max wall gap " + num(metric(grid, "max_wall_gap")) + " m");
    v.check(ok(rnd) && er < tol::static_rms, count + " random particles: relative RMS = " + num(er));
    v.check(ok(rnd) && metric(rnd, "max_wall_gap") <= tol::wall_gap,
            "random max wall gap " + num(metric(rnd, "max_wall_gap")) + " m");
    v.check(er <= tol::random_vs_grid * eg, "random / grid error ratio " + num(er / eg));
    std::cout << "  max speed grid " << num(metric(grid, "max_speed")) << " m/s, random "
              << num(metric(rnd, "max_speed")) << " m/s\n";
    return v.finish("50 steps, dt = 1 s, " + count + " particles");
}

// ---- 5. Small-amplitude sloshing ---------------------------------------------

std::string sloshing_name(const std::string& dt, const cli::KeyValues& extra) {
    std::string name = "sloshing_dt_" + dt;
    for (const auto& [k, val] : extra) {
        if (k == "network.layout") name += "_layout_" + val;
    }
    for (char& c : name) {
        if (c == ',') c = '-';
    }
    return name;
}

json sloshing_run(const Options& opt, const std::string& dt, const cli::KeyValues& extra = {}) {
    cli::KeyValues flags{{"time.dt", dt}};
    flags.insert(flags.end(), extra.begin(), extra.end());
    return run_scenario(opt, sloshing_name(dt, extra), "sloshing", flags);
}

// Recomputed from the time series so that reused runs need no new summary fields.
double ke_retention(const Options& opt, const std::string& name) {
    const io::CsvTable t = io::read_csv(opt.out / name / "timeseries.csv");
    std::vector<scenarios::EnergyRecord> series(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        series[i].t = t.number(i, "t");
        series[i].kinetic = t.number(i, "E_kinetic");
    }
    return scenarios::kinetic_energy_retention(series, scenarios::linear_sloshing_period(1.0, 1.0, 1.0));
}

int sloshing(const Options& opt) {
    Verdict v("5");
    const json fine = sloshing_run(opt, "0.1");
    const double var = metric(fine, "pressure_potential_variation");
    v.check(ok(fine) && var < tol::pressure_potential, "dt=0.1 pressure+potential variation " + num(var));
    const double period = metric(fine, "period");
    const double oracle = scenarios::linear_sloshing_period(1.0, 1.0, 1.0);
    const double rel = std::abs(period - oracle) / oracle;
    v.check(ok(fine) && rel < tol::period,
            "dt=0.1 first-mode period " + num(period) + " s vs linear oracle " + num(oracle) + " s, deviation " +
                num(rel));
    std::cout << "  dt=0.1 left-wall gauge period " << num(metric(fine, "gauge_period")) << " s\n";
    std::cout << "  dt=0.1 total energy drift " << num(metric(fine, "total_energy_drift")) << '\n';
    const json coarse = sloshing_run(opt, "1");
    v.check(ok(coarse) && coarse["metrics"].value("kinetic_energy_decays", false),
            "dt=1 kinetic energy decays (maxima decreasing, final < half of peak)");
    return v.finish("a = 0.01, layout [2,60,60,62], t in [0, 14]");
}

// ---- 6. Large-amplitude sloshing ----------------------------------------------

int large_sloshing(const Options& opt) {
    Verdict v("6");
    const json s = run_scenario(opt, "sloshing_large_random", "sloshing",
                                {{"geometry.amplitude", "0.2"},
                                 {"particles.distribution", "random"},
                                 {"particles.count", "900"},
                                 {"time.t_end", "5.7"},
                                 {"output.snapshot_times", "0,1.9,3.7,5.7"}});
    v.check(ok(s), "t in [0, 5.7] completed, status " + s.value("status", std::string("?")));
    const fs::path dir = opt.out / "sloshing_large_random" / "snapshots";
    for (int step : {0, 19, 37, 57}) {
        char name[32];
        std::snprintf(name, sizeof name, "step_%06d.csv", step);
        v.check(fs::exists(dir / name), "snapshot at T = " + num(step * 0.1) + " s: " + name);
    }
    return v.finish("a = 0.2 on 900 random particles");
}

// ---- 7. Dam break -----------------------------------------------------------

int dambreak(const Options& opt) {
    Verdict v("7");
    const json coarse = run_scenario(opt, "dambreak_20", "dambreak", {{"particles.per_length", "20"}});
    const json fine = run_scenario(opt, "dambreak_25", "dambreak", {{"particles.per_length", "25"}});
    v.check(ok(coarse), "20 particles per L completed");
    v.check(ok(fine), "25 particles per L completed");
    v.check(coarse["metrics"].value("front_non_decreasing", false), "Z* non-decreasing (20 per L)");
    v.check(metric(coarse, "min_y") >= -tol::below_floor, "lowest particle y = " + num(metric(coarse, "min_y")));
    const double z20 = metric(coarse, "final_Zstar"), z25 = metric(fine, "final_Zstar");
    const double change = std::abs(z25 - z20) / z20;
    v.check(change < tol::refinement,
            "Z*(0.3 s): " + num(z20) + " (20 per L) vs " + num(z25) + " (25 per L), change " + num(change));
    if (!opt.experiment_csv.empty()) {
        const double worst = metric(coarse, "comparison_max_relative_error");
        v.check(coarse["metrics"].value("comparison_points", 0) > 0 && worst < tol::front_error,
                "front vs measured data, worst relative error " + num(worst));
    } else {
        std::cout << "  no measured front supplied (--experiment-csv); property gate only\n";
    }
    return v.finish("dt = 0.01 s, t in [0, 0.3]");
}

// ---- 8. Determinism -------------------------------------------------------------

int determinism(const Options& opt) {
    Verdict v("8");
    const cli::KeyValues small{{"particles.nx", "8"},      {"particles.ny", "8"},
                               {"time.steps", "3"},        {"training.lbfgs_max_iter", "200"},
                               {"training.warm_lbfgs_max_iter", "200"},
                               {"network.layout", "2,20,20,14"}};
    Options fresh = opt;
    fresh.reuse = false;
    for (const char* scenario : {"msd", "sloshing"}) {
        const cli::KeyValues flags = std::string(scenario) == "msd" ? cli::KeyValues{} : small;
        const std::string base = std::string("determinism_") + scenario;
        run_scenario(fresh, base + "_a", scenario, flags);
        run_scenario(fresh, base + "_b", scenario, flags);
        std::ifstream a(opt.out / (base + "_a") / "summary.json"), b(opt.out / (base + "_b") / "summary.json");
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        v.check(!sa.str().empty() && sa.str() == sb.str(), std::string(scenario) + " summaries byte-identical");
    }
    return v.finish("identical config and seed give identical summary.json");
}

// ---- Orderings ----------------------------------------------------------------

int orderings(const Options& opt) {
    Verdict v("orderings");
    Options reuse = opt;
    reuse.reuse = true;
    std::vector<double> kept;
    for (const char* dt : {"0.1", "0.5", "1"}) {
        const json s = sloshing_run(reuse, dt);
        v.check(ok(s), std::string("dt=") + dt + " run completed");
        kept.push_back(ke_retention(opt, sloshing_name(dt, {})));
        std::cout << "  dt=" << dt << " kinetic energy retained over t in [0, 14] " << num(kept.back())
                  << ", total energy drift " << num(metric(s, "total_energy_drift"))
                  << ", pressure+potential variation " << num(metric(s, "pressure_potential_variation")) << '\n';
    }
    v.check(kept[0] > kept[1] && kept[1] > kept[2], "kinetic energy retention falls as dt grows (0.1 > 0.5 > 1)");
    const cli::KeyValues large{{"network.layout", "2,200,200,200,152"}};
    const json big = sloshing_run(reuse, "1", large);
    v.check(ok(big), "layout [2,200,200,200,152] (s=50) at dt=1 completed");
    const double big_kept = ke_retention(opt, sloshing_name("1", large));
    v.check(big["metrics"].value("kinetic_energy_decays", false) && big_kept < kept[0],
            "larger network at dt=1 still decays: retention " + num(big_kept) + " vs " + num(kept[0]) +
                " for layout 1 at dt=0.1");
    return v.finish("smaller dt conserves energy better; a larger network does not rescue dt = 1 s");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    Options opt;
    app.add_option("--criterion", opt.criterion, "1-8 or orderings")->required();
    app.add_option("--scale", opt.scale, "ci or full (criterion 4 particle count)")
        ->check(CLI::IsMember({"ci", "full"}));
    app.add_option("--out", opt.out, "artifact directory");
    app.add_option("--experiment-csv", opt.experiment_csv, "measured dam-break front (Tstar,Zstar)");
    app.add_flag("--reuse", opt.reuse, "reuse finished runs with identical configuration");
    CLI11_PARSE(app, argc, argv);

    if (opt.experiment_csv.empty()) {
        if (const char* e = std::getenv("NPM_EXPERIMENT_CSV")) opt.experiment_csv = e;
    }
    const std::map<std::string, int (*)(const Options&)> table{
        {"1", tableau},      {"2", autodiff},       {"3", msd},      {"4", static_pressure},
        {"5", sloshing},     {"6", large_sloshing}, {"7", dambreak}, {"8", determinism},
        {"orderings", orderings}};
    const auto it = table.find(opt.criterion);
    if (it == table.end()) {
        std::cerr << "unknown criterion '" << opt.criterion << "'\n";
        return 2;
    }
    try {
        return it->second(opt);
    } catch (const std::exception& e) {
        std::cout << "criterion " << opt.criterion << " FAIL " << e.what() << '\n';
        return 1;
    }
}
