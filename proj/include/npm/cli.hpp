#pragma once

// Run configuration (key = value files with [section] headers, NPM_*
// environment overrides, command-line flags) and the orchestration that
// turns a scenario run into files on disk.

#include "npm/scenarios.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace npm::cli {

struct RunConfig {
    scenarios::ScenarioConfig scenario;
    std::filesystem::path out_dir = "npm_out";
    bool checkpoint = true;
    std::optional<std::filesystem::path> experiment_csv;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> value map in file order.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses key = value lines under [section] headers. '#' and ';' start
/// comments. Throws ConfigError with the line number on malformed input.
KeyValues parse_config_text(const std::string& text);
KeyValues read_config_file(const std::filesystem::path& path);

/// Every NPM_SECTION_KEY variable naming a known key, e.g. NPM_TIME_DT.
KeyValues environment_overrides(const std::map<std::string, std::string>& env);
std::map<std::string, std::string> process_environment();

std::string env_name(const std::string& key);
std::vector<std::string> known_keys();

/// Sets one key; throws ConfigError naming an unknown key or a bad value.
void apply(RunConfig& config, const std::string& key, const std::string& value);
std::string get(const RunConfig& config, const std::string& key);

/// Every key with its default under each scenario.
void print_default_table(std::ostream& os);

struct Sources {
    std::optional<std::string> scenario;  ///< positional argument
    std::optional<std::filesystem::path> config_file;
    std::map<std::string, std::string> env;
    KeyValues flags;  ///< highest precedence
};

/// defaults < file < environment < flags. The scenario comes from the
/// positional argument, else run.scenario in the environment or the file.
RunConfig resolve(const Sources& sources);

enum class ExitCode : int { ok = 0, usage = 1, rejected = 2, diverged = 3, io = 4 };

/// Runs the scenario and writes every artifact under config.out_dir.
/// Progress and errors go to `log`.
ExitCode run(const RunConfig& config, std::ostream& log);

/// "Tstar,Zstar" CSV.
std::vector<std::pair<double, double>> read_experiment(const std::filesystem::path& path);

}  // namespace npm::cli
