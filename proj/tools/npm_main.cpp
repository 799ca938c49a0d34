#include <CLI11.hpp>

#include <iostream>

#include "npm/cli.hpp"
#include "npm/fileio.hpp"
#include "npm/irk.hpp"

int main(int argc, char** argv) {
    using namespace npm;
    CLI::App app{"Neural particle method simulator"};
    app.set_help_flag("-h,--help", "Print this help and exit");

    std::string scenario;
    std::string config_path, out_dir, experiment_csv;
    std::optional<std::uint64_t> seed;
    std::optional<double> dt;
    std::optional<std::size_t> steps, dump_stages;
    std::vector<std::string> sets;
    bool show_defaults = false;

    app.add_option("scenario", scenario, "msd, static-pressure, sloshing or dambreak");
    app.add_option("--config", config_path, "key = value file with [section] headers")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "network and particle seed");
    app.add_option("--dt", dt, "time step");
    app.add_option("--steps", steps, "number of steps (overrides t_end)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--experiment-csv", experiment_csv, "measured dam-break front, columns Tstar,Zstar");
    app.add_option("--set", sets, "section.key=value override, repeatable");
    app.add_option("--dump-tableau", dump_stages, "print the s-stage Gauss-Legendre tableau and exit");
    app.add_flag("--defaults", show_defaults, "print every configuration key with its defaults and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (show_defaults) {
        cli::print_default_table(std::cout);
        return 0;
    }
    if (dump_stages) {
        try {
            irk::dump(irk::gauss_legendre(*dump_stages), std::cout);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return static_cast<int>(cli::ExitCode::usage);
        }
        return 0;
    }

    cli::Sources src;
    if (!scenario.empty()) src.scenario = scenario;
    if (!config_path.empty()) src.config_file = config_path;
    src.env = cli::process_environment();
    for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects section.key=value, got '" << s << "'\n";
            return static_cast<int>(cli::ExitCode::usage);
        }
        src.flags.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) src.flags.emplace_back("run.seed", std::to_string(*seed));
    if (dt) src.flags.emplace_back("time.dt", io::format_double(*dt));
    if (steps) src.flags.emplace_back("time.steps", std::to_string(*steps));
    if (!out_dir.empty()) src.flags.emplace_back("run.out", out_dir);
    if (!experiment_csv.empty()) src.flags.emplace_back("run.experiment_csv", experiment_csv);

    try {
        const cli::RunConfig config = cli::resolve(src);
        return static_cast<int>(cli::run(config, std::cerr));
    } catch (const cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::usage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(cli::ExitCode::io);
    }
}
