#include "npm/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>


extern char** environ;

namespace npm::cli {

using scenarios::ScenarioConfig;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ConfigError("invalid number '" + v + "' for key " + key);
    }
    return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    unsigned long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("invalid non-negative integer '" + v + "' for key " + key);
    }
    return static_cast<std::size_t>(out);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean '" + v + "' for key " + key);
}

/// Shortest representation that reads back to the same double.
std::string show(double v) {
    char buf[40];
    for (int digits = 15; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += show(xs[i]);
    }
    return out;
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
    std::function<std::string(const RunConfig&)> get;
};

Key number(std::string name, double ScenarioConfig::*field) {
    return {std::move(name),
            [field](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.*field = to_double(k, v); },
            [field](const RunConfig& c) { return show(c.scenario.*field); }};
}

Key count(std::string name, std::size_t ScenarioConfig::*field) {
    return {std::move(name),
            [field](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.*field = to_size(k, v); },
            [field](const RunConfig& c) { return std::to_string(c.scenario.*field); }};
}

template <typename Get, typename Set>
Key custom(std::string name, Set set, Get get) {
    return {std::move(name), set, get};
}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = [] {
        using S = ScenarioConfig;
        std::vector<Key> k;
        k.push_back(custom(
            "run.scenario",
            [](RunConfig& c, const std::string&, const std::string& v) {
                try {
                    c.scenario.scenario = scenarios::parse_scenario(v);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            },
            [](const RunConfig& c) { return std::string(scenarios::scenario_name(c.scenario.scenario)); }));
        k.push_back(custom(
            "run.seed",
            [](RunConfig& c, const std::string& key, const std::string& v) { c.scenario.seed = to_size(key, v); },
            [](const RunConfig& c) { return std::to_string(c.scenario.seed); }));
        k.push_back(custom(
            "run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return c.out_dir.string(); }));
        k.push_back(custom(
            "run.checkpoint",
            [](RunConfig& c, const std::string& key, const std::string& v) { c.checkpoint = to_bool(key, v); },
            [](const RunConfig& c) { return from_bool(c.checkpoint); }));
        k.push_back(custom(
            "run.experiment_csv",
            [](RunConfig& c, const std::string&, const std::string& v) {
                if (v.empty()) {
                    c.experiment_csv.reset();
                } else {
                    c.experiment_csv = v;
                }
            },
            [](const RunConfig& c) { return c.experiment_csv ? c.experiment_csv->string() : std::string(); }));

        k.push_back(number("geometry.width", &S::width));
        k.push_back(number("geometry.height", &S::height));
        k.push_back(number("geometry.amplitude", &S::amplitude));
        k.push_back(number("geometry.length", &S::length));

        k.push_back(custom(
            "fluid.rho",
            [](RunConfig& c, const std::string& key, const std::string& v) { c.scenario.props.rho = to_double(key, v); },
            [](const RunConfig& c) { return show(c.scenario.props.rho); }));
        k.push_back(custom(
            "fluid.gravity",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.props.body_accel = {0.0, -to_double(key, v)};
            },
            [](const RunConfig& c) { return show(c.scenario.gravity()); }));
        k.push_back(custom(
            "contact.enabled",
            [](RunConfig& c, const std::string& key, const std::string& v) { c.scenario.contact = to_bool(key, v); },
            [](const RunConfig& c) { return from_bool(c.scenario.contact); }));
        k.push_back(number("contact.penalty", &S::penalty));

        k.push_back(custom(
            "particles.distribution",
            [](RunConfig& c, const std::string&, const std::string& v) {
                try {
                    c.scenario.distribution = scenarios::parse_distribution(v);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            },
            [](const RunConfig& c) { return std::string(scenarios::distribution_name(c.scenario.distribution)); }));
        k.push_back(count("particles.nx", &S::nx));
        k.push_back(count("particles.ny", &S::ny));
        k.push_back(count("particles.count", &S::particles));
        k.push_back(number("particles.jitter", &S::jitter));
        k.push_back(number("particles.per_length", &S::particles_per_length));
        k.push_back(number("particles.slip_delta", &S::slip_delta));

        k.push_back(number("time.dt", &S::dt));
        k.push_back(count("time.steps", &S::steps));
        k.push_back(number("time.t_end", &S::t_end));

        k.push_back(custom(
            "network.layout",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                try {
                    c.scenario.layout = nn::NetworkLayout::parse(v);
                } catch (const std::exception& e) {
                    throw ConfigError("invalid layout '" + v + "' for key " + key + ": " + e.what());
                }
            },
            [](const RunConfig& c) { return c.scenario.layout.to_string(); }));
        k.push_back(number("network.input_scale", &S::input_scale));

        auto weight = [](std::string name, double core::LossWeights::*field) {
            return custom(
                std::move(name),
                [field](RunConfig& c, const std::string& key, const std::string& v) {
                    c.scenario.weights.*field = to_double(key, v);
                },
                [field](const RunConfig& c) { return show(c.scenario.weights.*field); });
        };
        k.push_back(weight("loss.velocity", &core::LossWeights::velocity));
        k.push_back(weight("loss.divergence", &core::LossWeights::divergence));
        k.push_back(weight("loss.pressure", &core::LossWeights::pressure));

        k.push_back(custom(
            "training.adam_iters",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.adam_iters = to_size(key, v);
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.training.adam_iters); }));
        k.push_back(custom(
            "training.warm_adam_iters",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.warm_adam_iters = to_size(key, v);
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.training.warm_adam_iters); }));
        k.push_back(custom(
            "training.adam_lr",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.adam_lr = to_double(key, v);
            },
            [](const RunConfig& c) { return show(c.scenario.training.adam_lr); }));
        k.push_back(custom(
            "training.lbfgs_history",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.lbfgs.history = to_size(key, v);
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.training.lbfgs.history); }));
        k.push_back(custom(
            "training.lbfgs_max_iter",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.lbfgs.max_iter = to_size(key, v);
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.training.lbfgs.max_iter); }));
        k.push_back(custom(
            "training.warm_lbfgs_max_iter",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.warm_lbfgs_max_iter = to_size(key, v);
            },
            [](const RunConfig& c) { return std::to_string(c.scenario.training.warm_lbfgs_max_iter); }));
        k.push_back(custom(
            "training.g_tol",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.lbfgs.g_tol = to_double(key, v);
            },
            [](const RunConfig& c) { return show(c.scenario.training.lbfgs.g_tol); }));
        k.push_back(custom(
            "training.f_tol",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                c.scenario.training.lbfgs.f_tol = to_double(key, v);
            },
            [](const RunConfig& c) { return show(c.scenario.training.lbfgs.f_tol); }));

        auto msd = [](std::string name, double scenarios::MsdProblem::*field) {
            return custom(
                std::move(name),
                [field](RunConfig& c, const std::string& key, const std::string& v) {
                    c.scenario.msd.*field = to_double(key, v);
                },
                [field](const RunConfig& c) { return show(c.scenario.msd.*field); });
        };
        k.push_back(msd("msd.m", &scenarios::MsdProblem::m));
        k.push_back(msd("msd.k", &scenarios::MsdProblem::k));
        k.push_back(msd("msd.d", &scenarios::MsdProblem::d));
        k.push_back(msd("msd.q0", &scenarios::MsdProblem::q0));
        k.push_back(custom(
            "msd.v0",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                if (v.empty()) {
                    c.scenario.msd.velocity.reset();
                } else {
                    c.scenario.msd.velocity = to_double(key, v);
                }
            },
            [](const RunConfig& c) {
                return c.scenario.msd.velocity ? show(*c.scenario.msd.velocity) : std::string();
            }));

        k.push_back(number("dambreak.time_factor", &S::time_factor));

        k.push_back(count("output.snapshot_interval", &S::snapshot_interval));
        k.push_back(custom(
            "output.snapshot_times",
            [](RunConfig& c, const std::string& key, const std::string& v) {
                std::vector<double> times;
                std::stringstream ss(v);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    item = trim(item);
                    if (!item.empty()) times.push_back(to_double(key, item));
                }
                c.scenario.snapshot_times = std::move(times);
            },
            [](const RunConfig& c) { return join(c.scenario.snapshot_times); }));
        return k;
    }();
    return keys;
}

const Key& lookup(const std::string& key) {
    for (const Key& k : registry()) {
        if (k.name == key) return k;
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

KeyValues parse_config_text(const std::string& text) {
    KeyValues out;
    std::istringstream is(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        out.emplace_back(section.empty() ? key : section + "." + key, trim(std::string_view(line).substr(eq + 1)));
    }
    return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string env_name(const std::string& key) {
    std::string out = "NPM_";
    for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const Key& k : registry()) out.push_back(k.name);
    return out;
}

KeyValues environment_overrides(const std::map<std::string, std::string>& env) {
    KeyValues out;
    for (const Key& k : registry()) {
        const auto it = env.find(env_name(k.name));
        if (it != env.end()) out.emplace_back(k.name, it->second);
    }
    return out;
}

std::map<std::string, std::string> process_environment() {
    std::map<std::string, std::string> out;
    for (char** e = environ; e && *e; ++e) {
        const std::string_view kv(*e);
        if (kv.rfind("NPM_", 0) != 0) continue;
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
    }
    return out;
}

void apply(RunConfig& config, const std::string& key, const std::string& value) {
    lookup(key).set(config, key, value);
}

std::string get(const RunConfig& config, const std::string& key) { return lookup(key).get(config); }

void print_default_table(std::ostream& os) {
    using scenarios::Scenario;
    const Scenario all[] = {Scenario::msd, Scenario::static_pressure, Scenario::sloshing, Scenario::dambreak};
    std::vector<RunConfig> defaults;
    for (Scenario s : all) {
        RunConfig c;
        c.scenario = scenarios::default_config(s);
        defaults.push_back(std::move(c));
    }
    os << std::left << std::setw(30) << "key";
    for (Scenario s : all) os << std::setw(18) << scenarios::scenario_name(s);
    os << '\n';
    for (const Key& k : registry()) {
        os << std::setw(30) << k.name;
        for (const RunConfig& c : defaults) os << std::setw(18) << k.get(c);
        os << '\n';
    }
}

RunConfig resolve(const Sources& sources) {
    const KeyValues file = sources.config_file ? read_config_file(*sources.config_file) : KeyValues{};
    const KeyValues env = environment_overrides(sources.env);
    for (const KeyValues* kv : {&file, &env, &sources.flags}) {
        for (const auto& [k, v] : *kv) (void)lookup(k);
    }

    std::optional<std::string> name = sources.scenario;
    for (const KeyValues* kv : {&sources.flags, &env, &file}) {
        if (name) break;
        for (const auto& [k, v] : *kv) {
            if (k == "run.scenario") name = v;
        }
    }
    if (!name) {
        std::ostringstream table;
        print_default_table(table);
        throw ConfigError("missing required key run.scenario; defaults:\n" + table.str());
    }
    RunConfig config;
    try {
        config.scenario = scenarios::default_config(scenarios::parse_scenario(*name));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (const KeyValues* kv : {&file, &env, &sources.flags}) {
        for (const auto& [k, v] : *kv) {
            if (k != "run.scenario") apply(config, k, v);
        }
    }
    try {
        config.scenario.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    return config;
}

}  // namespace npm::cli
