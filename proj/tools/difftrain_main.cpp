// difftrain: margin-theory experiments for differential training.
//
//   difftrain run <experiment> --config <file> [--out <dir>] [--seed <n>]
//                 [--set key=value ...]
//   difftrain list
//
// Config files are flat JSON documents; --seed and --set override fields
// (highest precedence: --set, then --seed, then the file). Every experiment
// writes its artifacts plus manifest.json into the output directory and exits
// 0 only if every asserted check held.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "difftrain/cli/experiments.hpp"

namespace {

using nlohmann::json;

void print_usage() {
    std::cout <<
        R"(difftrain - differential training and margin analysis experiments

usage:
  difftrain run <experiment> [--config <file>] [--out <dir>] [--seed <n>] [--set key=value ...]
  difftrain list
  difftrain --help

experiments:
  synth-margin    2-D low-rank instance: cross-entropy vs max-margin boundary,
                  margin bound report. artifacts: margin_report.json, boundaries.svg
  rank-spectrum   penultimate-feature spectra under gd/momentum/adam, plus the
                  zero-head rank trace. artifacts: spectrum.csv, rank_trace.csv,
                  rank_trace.json, spectrum_report.json
  nonlinear-demo  2-D nonlinear task: cross-entropy vs squared pair loss,
                  decision-boundary grids. artifacts: grid_bce.csv,
                  grid_diff_squared.csv, boundaries.svg, nonlinear_report.json
  robustness      image task (CIFAR-10 binary batches when available, synthetic
                  stand-in otherwise): PGD accuracy-vs-epsilon curves for both
                  training schemes. artifacts: pgd_bce.csv, pgd_diff_squared.csv,
                  robustness.svg, robustness_report.json
  theorems        margin-bound, direction-convergence, one-step, rank and
                  block-matrix suites. artifacts: margin_bound.json,
                  translation_table.csv, direction_convergence.json, one_step.json
  train           generic fit + evaluate per config. artifacts: model.json,
                  metrics.json

CSV column orders (fixed):
  spectrum.csv          optimizer,component,eigenvalue,cumulative_explained
  rank_trace.csv        iteration,rank_phi,rank_W,top1_energy
  grid_*.csv            x,y,score
  pgd_*.csv             epsilon,accuracy_train,accuracy_test
  translation_table.csv c,svm_margin,ce_margin

config: flat JSON; 'seed' is required (never taken from the clock). --set
values are parsed as JSON when possible, else kept as strings, e.g.
  --set iters=5000 --set epsilons=[0,0.01,0.02] --set dataset=two-moons
environment: )" << difftrain::cli::kCifarEnvVar
              << R"( points at a directory containing the CIFAR-10 binary
batches (data_batch_*.bin, test_batch.bin) for the robustness experiment.
)";
}

json parse_override_value(const std::string& raw) {
    const json parsed = json::parse(raw, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
    return json(raw);
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        print_usage();
        return args.empty() ? 1 : 0;
    }
    if (args[0] == "list") {
        for (const std::string& name : difftrain::cli::experiment_names()) {
            std::cout << name << '\n';
        }
        return 0;
    }
    if (args[0] != "run") {
        std::cerr << "unknown command '" << args[0] << "'\n";
        print_usage();
        return 1;
    }
    if (args.size() < 2) {
        std::cerr << "run: missing experiment name\n";
        return 1;
    }

    const std::string experiment = args[1];
    std::string config_path;
    std::string out_dir = "out/" + experiment;
    json config = json::object();
    std::vector<std::pair<std::string, json>> overrides;
    std::optional<long> seed_flag;

    for (std::size_t i = 2; i < args.size(); ++i) {
        const std::string& arg = args[i];
        auto need_value = [&](const char* flag) -> const std::string& {
            if (i + 1 >= args.size()) {
                std::cerr << flag << " needs a value\n";
                std::exit(1);
            }
            return args[++i];
        };
        if (arg == "--config") {
            config_path = need_value("--config");
        } else if (arg == "--out") {
            out_dir = need_value("--out");
        } else if (arg == "--seed") {
            seed_flag = std::stol(need_value("--seed"));
        } else if (arg == "--set") {
            const std::string& kv = need_value("--set");
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::cerr << "--set expects key=value, got '" << kv << "'\n";
                return 1;
            }
            overrides.emplace_back(kv.substr(0, eq), parse_override_value(kv.substr(eq + 1)));
        } else {
            std::cerr << "unknown option '" << arg << "'\n";
            return 1;
        }
    }

    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) {
                std::cerr << "cannot open config file '" << config_path << "'\n";
                return 1;
            }
            config = json::parse(in);
            if (!config.is_object()) {
                std::cerr << "config must be a flat JSON object\n";
                return 1;
            }
        }
        if (seed_flag) config["seed"] = *seed_flag;
        for (auto& [key, value] : overrides) config[key] = value;

        const difftrain::cli::RunManifest manifest =
            difftrain::cli::run_experiment(experiment, config, out_dir);

        for (const auto& check : manifest.checks) {
            std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name
                      << (check.detail.empty() ? "" : " (" + check.detail + ")") << '\n';
        }
        if (!manifest.error.empty()) {
            std::cerr << "experiment failed: " << manifest.error << '\n';
        }
        std::cout << (manifest.ok ? "ok" : "FAILED") << " in " << manifest.duration_ms / 1000.0
                  << " s; artifacts in " << out_dir << '\n';
        return manifest.ok ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
