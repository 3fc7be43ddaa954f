#pragma once

// Command-line front end: `run` drives the experiments and writes CSV,
// `approx` evaluates an approximation of user-supplied scattered data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msqa/csv.hpp"
#include "msqa/experiments.hpp"
#include "msqa/multiscale.hpp"
#include "msqa/operators.hpp"

namespace msqa::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// `key = value` lines; blank lines and lines starting with '#' are ignored.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

inline bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args) {
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
}

inline std::optional<std::string> flag_value(const std::vector<std::string>& args, const std::string& flag) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
    }
    return std::nullopt;
}

/// Merges config-file keys and the MSAPPROX_SEED fallback into the argument
/// list. Explicit flags always win.
inline std::vector<std::string> expand_args(std::vector<std::string> args) {
    if (args.empty() || args[0] != "run") return args;
    if (const auto path = flag_value(args, "--config")) {
        for (const auto& [key, value] : read_config_file(*path)) {
            if (key == "config") throw ConfigError("config files cannot nest");
            if (!has_flag(args, "--" + key)) {
                args.push_back("--" + key);
                args.push_back(value);
            }
        }
    }
    if (!has_flag(args, "--seed")) {
        if (const char* env = std::getenv("MSAPPROX_SEED")) {
            args.emplace_back("--seed");
            args.emplace_back(env);
        }
    }
    return args;
}

inline std::string frame_name(TangentFrame f) { return f == TangentFrame::Identity ? "identity" : "ambient"; }

inline nlohmann::json manifest(const ExperimentConfig& cfg, const MetricsTable& table) {
    nlohmann::json j;
    j["experiment"] = experiment_name(cfg.experiment);
    j["trials"] = cfg.trials;
    j["levels"] = cfg.levels;
    j["lambda"] = cfg.lambda;
    j["seed"] = cfg.seed;
    j["sweep"] = cfg.effective_sweep();
    j["grid"] = cfg.grid;
    j["frozen_design"] = cfg.frozen_design;
    if (cfg.experiment == ExperimentKind::SpdSnr) j["tangent_frame"] = frame_name(cfg.frame);
    std::vector<double> p;
    for (const auto& r : table.rows) p.push_back(r.noise_scale);
    j["noise_scale"] = p;
    if (table.spd_snr_ratio) j["spd_snr_ratio"] = *table.spd_snr_ratio;
    return j;
}

struct DataError {
    int code;
    std::string message;
};

/// Reads `x,y,f` rows, with an optional `x,y,f` header line.
inline ScalarDataset read_scalar_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError{kUsageError, "cannot open " + path};
    std::vector<Point> sites;
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (lineno == 1 && t == "x,y,f") continue;
        const auto f = split(t, ',');
        double x = 0, y = 0, v = 0;
        if (f.size() != 3 || !parse_double(trim(f[0]), x) || !parse_double(trim(f[1]), y) || !parse_double(trim(f[2]), v) ||
            !std::isfinite(v)) {
            throw DataError{kUsageError, path + ": malformed line " + std::to_string(lineno)};
        }
        if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
            throw DataError{kUsageError, path + ": line " + std::to_string(lineno) + ": site outside [0,1]^2"};
        }
        sites.emplace_back(x, y);
        values.push_back(v);
    }
    if (sites.empty()) throw DataError{kRuntimeError, path + ": dataset is empty"};
    return ScalarDataset(std::move(sites), std::move(values));
}

inline std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%#.12g", v);
    return buf;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    try {
        args = detail::expand_args(std::move(args));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    }

    CLI::App app{"Multiscale quasi-interpolation experiments and scattered-data approximation", "msqa"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a Monte-Carlo experiment and write a CSV summary");
    std::string experiment;
    ExperimentConfig cfg;
    std::string out_path;
    std::string config_path;
    std::string frame = "identity";
    cfg.seed = kDefaultSeed;
    run->add_option("experiment", experiment, "mls-size | shepard-snr | spd-snr")
        ->required()
        ->check(CLI::IsMember({"mls-size", "shepard-snr", "spd-snr"}));
    run->add_option("--trials", cfg.trials, "Monte-Carlo trials per sweep value")->capture_default_str()->check(CLI::Range(2, 1000000));
    run->add_option("--levels", cfg.levels, "Multiscale levels")->capture_default_str()->check(CLI::Range(1, 1000));
    run->add_option("--lambda", cfg.lambda, "Growth rate #X_{i-1}/#X_i in (0,1]")
        ->capture_default_str()
        ->check(CLI::Validator([](std::string& s) -> std::string {
            double v = 0;
            if (!parse_double(s, v) || !(v > 0.0 && v <= 1.0)) return "lambda must lie in (0, 1]";
            return {};
        }, "(0,1]"));
    run->add_option("--seed", cfg.seed, "Master seed (falls back to MSAPPROX_SEED, then 42)")->capture_default_str();
    run->add_option("--out", out_path, "Output CSV path")->required();
    run->add_option("--sweep", cfg.sweep, "Comma-separated sweep values")->delimiter(',');
    run->add_option("--grid", cfg.grid, "Evaluation lattice size per axis")->capture_default_str()->check(CLI::Range(1, 10000));
    run->add_option("--workers", cfg.workers, "Worker threads (0 = all cores)")->capture_default_str()->check(CLI::Range(0, 4096));
    run->add_option("--config", config_path, "File of `key = value` lines mirroring flag names");
    run->add_flag("--frozen-design", cfg.frozen_design, "Reuse the first trial's sites and hierarchy in every trial");
    run->add_option("--frame", frame, "Tangent frame for SPD residuals")->check(CLI::IsMember({"identity", "ambient"}))->capture_default_str();

    // approx
    auto* approx = app.add_subcommand("approx", "Approximate scattered x,y,f data at one query point");
    std::string data_path;
    std::string method_name;
    bool multiscale = false;
    int levels = 3;
    double lambda = 0.8;
    std::uint64_t seed = kDefaultSeed;
    std::vector<double> query;
    approx->add_option("--data", data_path, "Input CSV with columns x,y,f")->required();
    approx->add_option("--method", method_name, "shepard | mls")->required()->check(CLI::IsMember({"shepard", "mls"}));
    approx->add_option("--multiscale", multiscale, "Use the multiscale scheme (true/false)")->required();
    approx->add_option("--levels", levels, "Multiscale levels")->capture_default_str()->check(CLI::Range(1, 1000));
    approx->add_option("--lambda", lambda, "Growth rate in (0,1]")->capture_default_str()->check(CLI::Range(1e-12, 1.0));
    approx->add_option("--query", query, "Query point qx,qy")->required()->delimiter(',')->expected(2);
    approx->add_option("--seed", seed, "Seed for the random hierarchy")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return kUsageError;
    }

    if (run->parsed()) {
        cfg.experiment = *parse_experiment(experiment);
        cfg.frame = frame == "ambient" ? TangentFrame::Ambient : TangentFrame::Identity;
        try {
            cfg.validate();
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n' << run->help();
            return kUsageError;
        }
        try {
            const auto table = run_experiment(cfg, [&](const std::string& msg) { err << msg << '\n'; });
            std::ostringstream csv;
            write_csv(csv, to_rows(table));
            std::ofstream f(out_path, std::ios::binary);
            if (!f) throw Error("cannot write " + out_path);
            f << csv.str();
            std::ofstream meta(out_path + ".meta", std::ios::binary);
            if (!meta) throw Error("cannot write " + out_path + ".meta");
            meta << detail::manifest(cfg, table).dump() << '\n';
            if (!f || !meta) throw Error("write failed for " + out_path);
        } catch (const std::exception& e) {
            err << "error: " << e.what() << '\n';
            return kRuntimeError;
        }
        return kOk;
    }

    // approx
    try {
        const auto data = detail::read_scalar_data(data_path);
        const Method method = method_name == "mls" ? Method::Mls : Method::Shepard;
        const KernelRule rule{method == Method::Mls ? KernelFamily::Gaussian : KernelFamily::Wendland, 3.0, std::nullopt};
        const Point q(query[0], query[1]);
        double value = 0.0;
        if (multiscale) {
            auto rng = derive_stream(seed, 0, 0, StreamTag::Hierarchy);
            const auto h = build_hierarchy(data.size(), HierarchySpec{levels, lambda}, rng);
            value = ms_fit_scalar(data, h, rule, method).approximant.eval(q);
        } else {
            value = ScalarApproximant(data, rule.for_sites(data.sites()), method).eval(q);
        }
        out << detail::format_value(value) << '\n';
        return kOk;
    } catch (const detail::DataError& e) {
        err << "error: " << e.message << '\n';
        return e.code;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace msqa::cli
