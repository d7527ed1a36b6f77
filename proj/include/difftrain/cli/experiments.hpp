#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "difftrain/attacks/attacks.hpp"
#include "difftrain/attacks/robustness.hpp"
#include "difftrain/cli/digest.hpp"
#include "difftrain/cli/svg.hpp"
#include "difftrain/data/cifar10.hpp"
#include "difftrain/data/generators.hpp"
#include "difftrain/data/pairs.hpp"
#include "difftrain/linear/one_step.hpp"
#include "difftrain/linear/svm.hpp"
#include "difftrain/linear/train.hpp"
#include "difftrain/nn/boundary.hpp"
#include "difftrain/nn/fit.hpp"
#include "difftrain/scored_model.hpp"
#include "difftrain/theory/bounds.hpp"
#include "difftrain/theory/rank_experiment.hpp"

namespace difftrain::cli {

inline constexpr const char* kToolVersion = "difftrain 1.0.0";
inline constexpr const char* kCifarEnvVar = "DIFFTRAIN_CIFAR_DIR";

using nlohmann::json;

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunManifest {
    std::string experiment;
    std::string config_hash;
    std::string tool_version = kToolVersion;
    struct Artifact {
        std::string path;  // relative to the output directory
        std::string sha256;
        std::uint64_t bytes = 0;
    };
    std::vector<Artifact> artifacts;
    std::vector<CheckResult> checks;
    double duration_ms = 0.0;
    bool ok = false;
    std::string error;

    json to_json() const {
        json arts = json::array();
        for (const Artifact& a : artifacts) {
            arts.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
        }
        json chks = json::array();
        for (const CheckResult& c : checks) {
            chks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        }
        json j{{"experiment", experiment}, {"config_hash", config_hash},
               {"tool_version", tool_version}, {"artifacts", arts},
               {"checks", chks},             {"duration_ms", duration_ms},
               {"ok", ok}};
        if (!error.empty()) j["error"] = error;
        return j;
    }
};

namespace detail {

// Tracks every artifact an experiment writes, for the manifest digests.
class ArtifactSink {
public:
    explicit ArtifactSink(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    std::string file(const std::string& name) {
        names_.push_back(name);
        return (dir_ / name).string();
    }

    void write_json(const std::string& name, const json& j) {
        std::ofstream out(file(name));
        if (!out) throw std::runtime_error("cannot write " + name);
        out << j.dump(2) << '\n';
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::vector<RunManifest::Artifact> digests() const {
        std::vector<RunManifest::Artifact> out;
        for (const std::string& name : names_) {
            const auto path = dir_ / name;
            if (!std::filesystem::exists(path)) continue;  // aborted before the write
            RunManifest::Artifact a;
            a.path = name;
            a.sha256 = sha256_file(path.string());
            a.bytes = std::filesystem::file_size(path);
            out.push_back(std::move(a));
        }
        return out;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::string> names_;
};

template <class T>
T get_or(const json& cfg, const std::string& key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    return cfg.at(key).get<T>();
}

inline void check(std::vector<CheckResult>& checks, const std::string& name, bool passed,
                  std::string detail = "") {
    checks.push_back({name, passed, std::move(detail)});
}

inline std::string fmt(double v) { return json(v).dump(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// synthetic image-like two-class data in the CIFAR record format
// (the stand-in when no real batch files are available)

// Two image classes whose separating signal rides on the mean brightness, so
// the whole dataset sits far from the origin along the class axis: the
// geometry under which cross-entropy margins degrade while pair differences
// cancel the common offset. Class-specific textures (blob vs stripes) keep
// the task non-trivial.
inline std::vector<std::pair<std::uint8_t, std::vector<std::uint8_t>>> synth_image_records(
    std::size_t n_per_class, std::uint8_t class_a, std::uint8_t class_b, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<std::uint8_t, std::vector<std::uint8_t>>> records;
    records.reserve(2 * n_per_class);
    auto clip_byte = [](double v) {
        return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    };
    for (std::size_t k = 0; k < 2 * n_per_class; ++k) {
        const bool is_a = k % 2 == 0;
        std::vector<std::uint8_t> px(kCifarPixels);
        const double base = rng.normal(is_a ? 175.0 : 88.0, 8.0);
        const bool blob = rng.uniform() < 0.5;  // nuisance texture, class-independent
        const double cx = rng.uniform(8.0, 24.0), cy = rng.uniform(8.0, 24.0);
        const double freq = 2.0 + rng.index(4);
        const double phase = rng.uniform(0.0, 1.0);
        const double amp = rng.uniform(18.0, 30.0);
        for (std::size_t c = 0; c < 3; ++c) {
            const double cw = 0.6 + 0.2 * c;
            for (std::size_t y = 0; y < 32; ++y) {
                for (std::size_t x = 0; x < 32; ++x) {
                    double v = base + rng.normal(0.0, 10.0);
                    if (blob) {
                        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                        v += amp * cw * std::exp(-d2 / 72.0);
                    } else {
                        v += amp * cw * std::sin(2.0 * std::numbers::pi * (freq * y / 32.0 + phase));
                    }
                    px[(c * 32 + y) * 32 + x] = clip_byte(v);
                }
            }
        }
        records.emplace_back(is_a ? class_a : class_b, std::move(px));
    }
    return records;
}

// Locates CIFAR-10 batch files under a root directory; the standard names,
// with a recursive fallback.
inline std::vector<std::string> find_cifar_files(const std::string& root, bool train) {
    namespace fs = std::filesystem;
    std::vector<std::string> out;
    const std::vector<std::string> names =
        train ? std::vector<std::string>{"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                         "data_batch_4.bin", "data_batch_5.bin"}
              : std::vector<std::string>{"test_batch.bin"};
    for (const std::string& n : names) {
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (entry.is_regular_file() && entry.path().filename() == n) {
                out.push_back(entry.path().string());
                break;
            }
        }
    }
    return out;
}

namespace detail {

struct ImageTask {
    Dataset train;
    Dataset test;
    std::string source;  // "cifar10" or "synthetic"
};

// Real CIFAR-10 pair when a data root is configured and present, otherwise
// synthetic image-like records round-tripped through the binary loader.
inline ImageTask load_image_task(const json& cfg, ArtifactSink& sink, std::uint64_t seed) {
    const int class_a = get_or<int>(cfg, "class_a", 0);
    const int class_b = get_or<int>(cfg, "class_b", 7);
    const std::size_t n_train = get_or<std::size_t>(cfg, "n_train", 2000);
    const std::size_t n_test = get_or<std::size_t>(cfg, "n_test", 400);

    std::string root = get_or<std::string>(cfg, "cifar_dir", "");
    if (root.empty()) {
        if (const char* env = std::getenv(kCifarEnvVar)) root = env;
    }

    ImageTask task;
    if (!root.empty() && std::filesystem::exists(root)) {
        const auto train_files = find_cifar_files(root, true);
        const auto test_files = find_cifar_files(root, false);
        if (!train_files.empty() && !test_files.empty()) {
            Dataset train_all = load_cifar10_pair(train_files, std::uint8_t(class_a),
                                                  std::uint8_t(class_b), true);
            Dataset test_all =
                load_cifar10_pair(test_files, std::uint8_t(class_a), std::uint8_t(class_b), true);
            auto subsample = [&](const Dataset& ds, std::size_t n, std::uint64_t s) {
                if (n >= ds.size()) return ds;
                Rng rng(s);
                std::vector<std::size_t> idx(ds.size());
                std::iota(idx.begin(), idx.end(), 0);
                rng.shuffle(idx);
                idx.resize(n);
                std::vector<Vector> rows;
                std::vector<int> labels;
                for (std::size_t i : idx) {
                    rows.emplace_back(ds.point(i).begin(), ds.point(i).end());
                    labels.push_back(ds.label(i));
                }
                return Dataset::create(Matrix::from_rows(rows), std::move(labels), ds.name);
            };
            task.train = subsample(train_all, n_train, seed);
            task.test = subsample(test_all, n_test, seed + 1);
            task.source = "cifar10";
            return task;
        }
    }

    // synthetic fallback, written through the real binary format and loader
    const auto train_path = sink.dir() / "synthetic_train.bin";
    const auto test_path = sink.dir() / "synthetic_test.bin";
    write_cifar10_file(train_path.string(),
                       synth_image_records((n_train + 1) / 2, std::uint8_t(class_a),
                                           std::uint8_t(class_b), seed));
    write_cifar10_file(test_path.string(),
                       synth_image_records((n_test + 1) / 2, std::uint8_t(class_a),
                                           std::uint8_t(class_b), seed + 7919));
    task.train = load_cifar10_pair({train_path.string()}, std::uint8_t(class_a),
                                   std::uint8_t(class_b), true);
    task.test = load_cifar10_pair({test_path.string()}, std::uint8_t(class_a),
                                  std::uint8_t(class_b), true);
    task.source = "synthetic";
    std::filesystem::remove(train_path);
    std::filesystem::remove(test_path);
    return task;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// named experiments

// Low-rank 2-D instance: cross-entropy boundary vs the max-margin boundary,
// with the margin bound evaluated on the trained model.
inline void run_synth_margin(const json& cfg, detail::ArtifactSink& sink,
                             std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");
    AffineSubspaceSpec spec;
    spec.ambient_dim = 2;
    spec.directions = Matrix::from_rows({{0.0, 1.0}});
    spec.offsets = {detail::get_or<double>(cfg, "offset_delta", 1.0)};
    const Dataset ds = gen_affine_lowrank(spec, detail::get_or<std::size_t>(cfg, "n_pos", 4),
                                          detail::get_or<std::size_t>(cfg, "n_neg", 4),
                                          detail::get_or<double>(cfg, "separation", 1.5),
                                          detail::get_or<double>(cfg, "asymmetry", 2.0), seed);

    GdConfig gd;
    gd.max_iters = detail::get_or<long>(cfg, "iters", 300000);
    const TrainTrace ce = train_cross_entropy(ds, gd);
    const SvmSolution svm = svm_hard_margin_oracle(ds);
    const BoundReport bound = theorem1_bound(ds, ce.final_model);

    json report{{"dataset", ds.name},
                {"n_points", ds.size()},
                {"ce_margin", geometric_margin(ce.final_model, ds)},
                {"svm_margin", svm.gamma},
                {"ce_model", to_json(ce.final_model)},
                {"svm_model", to_json(LinearModel{svm.w, svm.b})},
                {"bound_report", to_json(bound)},
                {"iterations", ce.iterations},
                {"converged", ce.converged}};
    sink.write_json("margin_report.json", report);

    // scatter + the two boundary lines
    const GridBounds b = padded_bounds(ds, 0.2);
    SvgPlot plot(b.x_lo, b.x_hi, b.y_lo, b.y_hi);
    plot.line_equation(ce.final_model.w[0], ce.final_model.w[1], ce.final_model.b, "#d62728");
    plot.line_equation(svm.w[0], svm.w[1], svm.b, "#1f77b4");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        plot.circle(ds.point(i)[0], ds.point(i)[1], 4.0,
                    ds.label(i) == 1 ? "#ff7f0e" : "#2ca02c");
    }
    plot.label(b.x_lo + 0.02 * (b.x_hi - b.x_lo), b.y_hi - 0.03 * (b.y_hi - b.y_lo),
               "red: cross-entropy, blue: max-margin");
    plot.save(sink.file("boundaries.svg"));

    detail::check(checks, "margin_bound_holds", bound.theorem1_holds,
                  "measured " + detail::fmt(bound.measured_margin) + " <= bound " +
                      detail::fmt(bound.theorem1_bound.value_or(-1.0)));
    detail::check(checks, "bound_below_gamma",
                  bound.theorem1_bound && *bound.theorem1_bound <= bound.gamma + 1e-9,
                  "gamma " + detail::fmt(bound.gamma));
    detail::check(checks, "ce_margin_below_svm",
                  geometric_margin(ce.final_model, ds) <= svm.gamma + 1e-6);
}

// Feature-spectrum experiment: one net per optimizer, PCA of the penultimate
// features, plus the zero-head rank trace.
inline void run_rank_spectrum(const json& cfg, detail::ArtifactSink& sink,
                              std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");
    const std::size_t n_per_class = detail::get_or<std::size_t>(cfg, "n_per_class", 150);
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::two_moons, n_per_class,
                                        detail::get_or<double>(cfg, "noise", 0.08), seed);

    std::ofstream csv(sink.file("spectrum.csv"));
    csv << "optimizer,component,eigenvalue,cumulative_explained\n";

    json per_opt = json::object();
    const std::size_t feature_dim = detail::get_or<std::size_t>(cfg, "feature_dim", 24);
    const std::size_t batch = detail::get_or<std::size_t>(cfg, "batch", 32);
    for (auto [opt, name] : {std::pair{OptimizerKind::gd, "gd"},
                             std::pair{OptimizerKind::momentum, "momentum"},
                             std::pair{OptimizerKind::adam, "adam"}}) {
        FitConfig fit_cfg;
        fit_cfg.loss = LossKind::bce;
        fit_cfg.optimizer = opt;
        // the batch loss is a sum, so plain-gradient steps scale with batch
        fit_cfg.lr = opt == OptimizerKind::adam
                         ? detail::get_or<double>(cfg, "adam_lr", 0.01)
                         : detail::get_or<double>(cfg, "gd_lr", 0.3) / double(batch);
        if (opt == OptimizerKind::momentum) fit_cfg.lr *= 0.1;  // beta 0.9 amplifies 10x
        fit_cfg.iters = detail::get_or<long>(cfg, "iters", 1500);
        fit_cfg.batch = batch;
        fit_cfg.seed = seed;
        MlpSpec arch;
        arch.input_dim = 2;
        arch.hidden = {32, feature_dim};
        arch.activation = Activation::relu;
        arch.readout_bias = true;
        const FitResult res = fit(build_mlp(arch, seed + 1), ds, fit_cfg);

        const Matrix features = penultimate_features(res.model, ds);
        const SpectrumReport spectrum = pca_spectrum(features, true);
        for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k) {
            csv << name << ',' << (k + 1) << ',' << detail::fmt(spectrum.eigenvalues[k]) << ','
                << (k < spectrum.cumulative_explained.size()
                        ? detail::fmt(spectrum.cumulative_explained[k])
                        : "")
                << '\n';
        }
        const std::size_t quarter = std::max<std::size_t>(1, feature_dim / 4);
        const double explained_quarter =
            spectrum.cumulative_explained.empty()
                ? 0.0
                : spectrum.cumulative_explained[std::min(quarter, spectrum.cumulative_explained.size()) - 1];
        per_opt[name] = {{"train_accuracy", accuracy(res.model, ds, 0.0)},
                         {"numerical_rank", spectrum.numerical_rank},
                         {"explained_at_quarter", explained_quarter}};
        detail::check(checks, std::string("low_rank_features_") + name,
                      explained_quarter >= detail::get_or<double>(cfg, "explained_threshold", 0.9),
                      "first quarter of components explains " + detail::fmt(explained_quarter));
    }
    csv.close();

    // zero feature-head rank trace
    RankExperimentConfig rank_cfg;
    rank_cfg.init = RankInit::zero_w;
    rank_cfg.seed = seed;
    rank_cfg.lr = 0.05;
    rank_cfg.iters = detail::get_or<long>(cfg, "rank_iters", 1000);
    rank_cfg.checkpoint_every = 50;
    const RankTrace trace = prop1_rank_experiment(2, detail::get_or<std::size_t>(cfg, "rank_feature_dim", 6),
                                                  ds, rank_cfg);
    trace.write_csv(sink.file("rank_trace.csv"));
    sink.write_json("rank_trace.json", to_json(trace));
    detail::check(checks, "zero_head_rank_at_most_1", trace.zero_w_rank_ok);

    sink.write_json("spectrum_report.json", per_opt);
}

// The 2-D nonlinear comparison: cross-entropy vs the squared pair loss, with
// decision-boundary grids and the measured boundary distances.
inline void run_nonlinear_demo(const json& cfg, detail::ArtifactSink& sink,
                               std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::ring_vs_cluster,
                                        detail::get_or<std::size_t>(cfg, "n_per_class", 60),
                                        detail::get_or<double>(cfg, "noise", 0.03), seed);
    const std::size_t hidden = detail::get_or<std::size_t>(cfg, "hidden", 24);
    const std::size_t resolution = detail::get_or<std::size_t>(cfg, "resolution", 161);

    FitConfig bce_cfg;
    bce_cfg.loss = LossKind::bce;
    bce_cfg.optimizer = OptimizerKind::adam;
    bce_cfg.lr = detail::get_or<double>(cfg, "bce_lr", 0.01);
    bce_cfg.iters = detail::get_or<long>(cfg, "bce_iters", 4000);
    bce_cfg.seed = seed;
    const FitResult bce = fit(build_mlp({2, {hidden}, Activation::tanh, true}, seed + 1), ds, bce_cfg);

    FitConfig diff_cfg;
    diff_cfg.loss = LossKind::diff_squared;
    diff_cfg.optimizer = OptimizerKind::adam;
    diff_cfg.lr = detail::get_or<double>(cfg, "diff_lr", 0.01);
    diff_cfg.iters = detail::get_or<long>(cfg, "diff_iters", 4000);
    diff_cfg.seed = seed;
    const FitResult diff = fit(build_mlp({2, {hidden}, Activation::tanh, false}, seed + 1), ds, diff_cfg);
    const double diff_threshold = select_threshold(diff.model, ds);

    const GridBounds bounds = padded_bounds(ds, 0.15);
    const ScoredModel bce_scored = make_scored(bce.model, 0.0);
    const ScoredModel diff_scored = make_scored(diff.model, diff_threshold);
    const BoundaryGrid bce_grid = boundary_grid(bce_scored.score, bounds, resolution, 0.0);
    const BoundaryGrid diff_grid = boundary_grid(diff_scored.score, bounds, resolution, diff_threshold);
    bce_grid.write_csv(sink.file("grid_bce.csv"));
    diff_grid.write_csv(sink.file("grid_diff_squared.csv"));

    const double bce_acc = accuracy(bce.model, ds, 0.0);
    const double diff_acc = accuracy(diff.model, ds, diff_threshold);
    const double bce_dist = min_boundary_distance(bce_grid, ds);
    const double diff_dist = min_boundary_distance(diff_grid, ds);

    SvgPlot plot(bounds.x_lo, bounds.x_hi, bounds.y_lo, bounds.y_hi);
    for (const auto& [x, y] : boundary_nodes(bce_grid)) plot.circle(x, y, 1.2, "#d62728");
    for (const auto& [x, y] : boundary_nodes(diff_grid)) plot.circle(x, y, 1.2, "#1f77b4");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        plot.circle(ds.point(i)[0], ds.point(i)[1], 3.0, ds.label(i) == 1 ? "#ff7f0e" : "#2ca02c");
    }
    plot.label(bounds.x_lo + 0.02 * (bounds.x_hi - bounds.x_lo),
               bounds.y_hi - 0.03 * (bounds.y_hi - bounds.y_lo),
               "red: cross-entropy boundary, blue: squared pair loss boundary");
    plot.save(sink.file("boundaries.svg"));

    sink.write_json("nonlinear_report.json",
                    json{{"dataset", ds.name},
                         {"bce", {{"train_accuracy", bce_acc}, {"min_boundary_distance", bce_dist}}},
                         {"diff_squared",
                          {{"train_accuracy", diff_acc},
                           {"min_boundary_distance", diff_dist},
                           {"threshold", diff_threshold}}},
                         {"distance_ratio", diff_dist / bce_dist}});

    detail::check(checks, "bce_fits_training_set", bce_acc == 1.0,
                  "accuracy " + detail::fmt(bce_acc));
    detail::check(checks, "diff_squared_fits_training_set", diff_acc == 1.0,
                  "accuracy " + detail::fmt(diff_acc));
    const double required_ratio = detail::get_or<double>(cfg, "required_ratio", 1.5);
    detail::check(checks, "diff_squared_margin_dominates",
                  diff_dist >= required_ratio * bce_dist,
                  "distances " + detail::fmt(diff_dist) + " vs " + detail::fmt(bce_dist));
}

// Image-task robustness: cross-entropy vs differential training under PGD,
// curves on the training and test splits.
inline void run_robustness(const json& cfg, detail::ArtifactSink& sink,
                           std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");
    detail::ImageTask task = detail::load_image_task(cfg, sink, seed);

    MlpSpec arch;
    arch.input_dim = 3072;
    arch.hidden = detail::get_or<std::vector<std::size_t>>(cfg, "hidden", {256, 84});
    arch.activation = Activation::relu;

    const long iters = detail::get_or<long>(cfg, "iters", 1600);
    const std::size_t batch = detail::get_or<std::size_t>(cfg, "batch", 64);

    FitConfig bce_cfg;
    bce_cfg.loss = LossKind::bce;
    bce_cfg.optimizer = OptimizerKind::adam;
    bce_cfg.lr = detail::get_or<double>(cfg, "bce_lr", 1e-3);
    bce_cfg.iters = iters;
    bce_cfg.batch = batch;
    bce_cfg.seed = seed;
    arch.readout_bias = true;
    const FitResult bce = fit(build_mlp(arch, seed + 1), task.train, bce_cfg);

    FitConfig diff_cfg = bce_cfg;
    diff_cfg.loss = LossKind::diff_squared;
    diff_cfg.lr = detail::get_or<double>(cfg, "diff_lr", 1e-3);
    arch.readout_bias = false;
    const FitResult diff = fit(build_mlp(arch, seed + 1), task.train, diff_cfg);
    const double diff_threshold = select_threshold(diff.model, task.train);

    const ScoredModel bce_scored = make_scored(bce.model, 0.0);
    const ScoredModel diff_scored = make_scored(diff.model, diff_threshold);

    const double bce_train_acc = accuracy(bce.model, task.train, 0.0);
    const double bce_test_acc = accuracy(bce.model, task.test, 0.0);
    const double diff_train_acc = accuracy(diff.model, task.train, diff_threshold);
    const double diff_test_acc = accuracy(diff.model, task.test, diff_threshold);

    // evaluation subsets (attacking every training point is pointless work)
    const std::size_t eval_cap = detail::get_or<std::size_t>(cfg, "eval_cap", 600);
    auto subset = [&](const Dataset& ds, std::uint64_t s) {
        if (ds.size() <= eval_cap) return ds;
        Rng rng(s);
        std::vector<std::size_t> idx(ds.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(eval_cap);
        std::vector<Vector> rows;
        std::vector<int> labels;
        for (std::size_t i : idx) {
            rows.emplace_back(ds.point(i).begin(), ds.point(i).end());
            labels.push_back(ds.label(i));
        }
        return Dataset::create(Matrix::from_rows(rows), std::move(labels), ds.name);
    };
    const Dataset train_eval = subset(task.train, seed + 11);
    const Dataset test_eval = subset(task.test, seed + 12);

    AttackConfig attack;
    attack.norm = detail::get_or<std::string>(cfg, "attack_norm", "linf") == "l2" ? AttackNorm::l2
                                                                                  : AttackNorm::linf;
    attack.steps = detail::get_or<int>(cfg, "attack_steps", 20);
    attack.box_lo = 0.0;
    attack.box_hi = 1.0;
    attack.seed = seed;
    const Vector epsilons = detail::get_or<Vector>(
        cfg, "epsilons", Vector{0.0, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05});

    const RobustnessCurve bce_train = robustness_curve(bce_scored, train_eval, epsilons, attack,
                                                       AttackKind::pgd, "train");
    const RobustnessCurve bce_test =
        robustness_curve(bce_scored, test_eval, epsilons, attack, AttackKind::pgd, "test");
    const RobustnessCurve diff_train = robustness_curve(diff_scored, train_eval, epsilons, attack,
                                                        AttackKind::pgd, "train");
    const RobustnessCurve diff_test =
        robustness_curve(diff_scored, test_eval, epsilons, attack, AttackKind::pgd, "test");

    write_curves_csv(sink.file("pgd_bce.csv"), bce_train, bce_test);
    write_curves_csv(sink.file("pgd_diff_squared.csv"), diff_train, diff_test);

    bool dominates = true;
    double max_gap = 0.0;
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        if (diff_test.accuracy[e] < bce_test.accuracy[e] - 1e-12) dominates = false;
        if (diff_train.accuracy[e] < bce_train.accuracy[e] - 1e-12) dominates = false;
        max_gap = std::max(max_gap, std::abs(diff_train.accuracy[e] - diff_test.accuracy[e]));
    }

    // curve plot: solid = train, dashed approximated by a thinner line
    SvgPlot plot(epsilons.front(), epsilons.back() + 1e-9, 0.0, 1.0);
    auto to_pts = [&](const RobustnessCurve& c) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t k = 0; k < c.epsilons.size(); ++k) {
            pts.emplace_back(c.epsilons[k], c.accuracy[k]);
        }
        return pts;
    };
    plot.polyline(to_pts(bce_train), "#d62728", 2.5);
    plot.polyline(to_pts(bce_test), "#d62728", 1.0);
    plot.polyline(to_pts(diff_train), "#1f77b4", 2.5);
    plot.polyline(to_pts(diff_test), "#1f77b4", 1.0);
    plot.label(epsilons.front(), 0.05, "red: cross-entropy, blue: differential; thick: train");
    plot.save(sink.file("robustness.svg"));

    sink.write_json(
        "robustness_report.json",
        json{{"source", task.source},
             {"n_train", task.train.size()},
             {"n_test", task.test.size()},
             {"eval_cap", eval_cap},
             {"epsilons", epsilons},
             {"attack_norm", attack.norm == AttackNorm::l2 ? "l2" : "linf"},
             {"bce", {{"train_accuracy", bce_train_acc}, {"test_accuracy", bce_test_acc},
                      {"pgd_train", bce_train.accuracy}, {"pgd_test", bce_test.accuracy}}},
             {"diff_squared",
              {{"train_accuracy", diff_train_acc}, {"test_accuracy", diff_test_acc},
               {"threshold", diff_threshold}, {"pgd_train", diff_train.accuracy},
               {"pgd_test", diff_test.accuracy}}},
             {"max_train_test_gap_diff_model", max_gap}});

    // optional per-sample dump at the largest epsilon of the sweep
    if (detail::get_or<bool>(cfg, "dump_attacks", false)) {
        std::ofstream lines(sink.file("attacks.jsonl"));
        AttackConfig one = attack;
        one.epsilon = epsilons.back();
        for (std::size_t i = 0; i < test_eval.size(); ++i) {
            one.seed = seed + i;
            const AttackResult res = pgd(diff_scored, test_eval.point(i), test_eval.label(i), one);
            lines << to_json(res).dump() << '\n';
        }
    }

    detail::check(checks, "clean_accuracies_close",
                  std::abs(bce_test_acc - diff_test_acc) <= 0.03,
                  detail::fmt(bce_test_acc) + " vs " + detail::fmt(diff_test_acc));
    detail::check(checks, "differential_curve_dominates", dominates);
    detail::check(checks, "train_test_gap_small", max_gap <= 0.05,
                  "max gap " + detail::fmt(max_gap));
}

// Bound/convergence/rank suites at desk scale, one report per claim.
inline void run_theorems(const json& cfg, detail::ArtifactSink& sink,
                         std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");

    // margin bound on an asymmetric low-rank instance
    {
        AffineSubspaceSpec spec;
        spec.ambient_dim = 3;
        spec.directions = Matrix::from_rows({{0.0, 0.0, 1.0}});
        spec.offsets = {1.0};
        const Dataset ds = gen_affine_lowrank(spec, 4, 3, 1.5, 2.0, seed);
        GdConfig gd;
        gd.max_iters = 300000;
        const TrainTrace ce = train_cross_entropy(ds, gd);
        const BoundReport rep = theorem1_bound(ds, ce.final_model);
        sink.write_json("margin_bound.json", to_json(rep));
        detail::check(checks, "margin_bound_holds", rep.theorem1_holds);
        detail::check(checks, "bound_ordering",
                      rep.theorem1_bound && *rep.theorem1_bound <= rep.gamma + 1e-9);

        // translation table: shift along the class axis, offsets fixed
        std::ofstream table(sink.file("translation_table.csv"));
        table << "c,svm_margin,ce_margin\n";
        const double gamma0 = svm_hard_margin_oracle(ds).gamma;
        bool svm_constant = true;
        Vector ce_margins;
        for (double c : {0.0, 5.0, 10.0, 20.0}) {
            const Dataset moved = translate(ds, {c, 0.0, 0.0});
            const double g = svm_hard_margin_oracle(moved).gamma;
            if (std::abs(g - gamma0) > 1e-9) svm_constant = false;
            const TrainTrace t = train_cross_entropy(moved, gd);
            const double m = geometric_margin(t.final_model, moved);
            ce_margins.push_back(m);
            table << c << ',' << detail::fmt(g) << ',' << detail::fmt(m) << '\n';
        }
        detail::check(checks, "translation_svm_margin_constant", svm_constant);
        detail::check(checks, "translation_ce_margin_degrades",
                      ce_margins.back() < ce_margins.front(),
                      detail::fmt(ce_margins.back()) + " < " + detail::fmt(ce_margins.front()));
    }

    // differential direction convergence on a few random separable instances
    {
        bool all_converged = true;
        json rows = json::array();
        for (std::uint64_t s = 0; s < 5; ++s) {
            AffineSubspaceSpec none;
            none.ambient_dim = 3 + s % 3;
            none.directions = Matrix(0, none.ambient_dim);
            const Dataset ds = gen_affine_lowrank(none, 4, 4, 1.0, 0.5, seed + s);
            PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, seed + s);
            GdConfig gd;
            gd.max_iters = 300000;
            const TrainTrace trace = train_differential_linear(stream, gd);
            const SvmSolution oracle = svm_hard_margin_oracle(ds);
            const double cos = cosine_similarity(trace.final_model.w, oracle.w);
            rows.push_back({{"seed", seed + s}, {"cosine", cos}, {"iterations", trace.iterations}});
            if (cos < 0.999) all_converged = false;
        }
        sink.write_json("direction_convergence.json", rows);
        detail::check(checks, "differential_direction_matches_svm", all_converged);
    }

    // one-step experiments on well-separated clusters
    {
        std::size_t zero_error = 0;
        const std::size_t trials = 25;
        for (std::uint64_t s = 0; s < trials; ++s) {
            Rng r(seed + s);
            Vector axis = r.normal_vector(3);
            scale(axis, 1.0 / norm2(axis));
            std::vector<Vector> rows;
            std::vector<int> labels;
            for (int k = 0; k < 4; ++k) {
                Vector p = r.normal_vector(3);
                scale(p, 1.0 / std::max(norm2(p), 1e-9));
                axpy(6.0, axis, std::span<double>(p));
                rows.push_back(p);
                labels.push_back(1);
            }
            for (int k = 0; k < 4; ++k) {
                Vector p = r.normal_vector(3);
                scale(p, 1.0 / std::max(norm2(p), 1e-9));
                axpy(-6.0, axis, std::span<double>(p));
                rows.push_back(p);
                labels.push_back(-1);
            }
            const Dataset ds = Dataset::create(Matrix::from_rows(rows), std::move(labels));
            const OneStepReport rep = one_step_sgd_experiment(ds, seed + s);
            if (rep.condition_holds && rep.train_error == 0.0 && pairwise_positivity_holds(ds)) {
                ++zero_error;
            }
        }
        sink.write_json("one_step.json", json{{"trials", trials}, {"zero_error", zero_error}});
        detail::check(checks, "one_step_zero_error", zero_error == trials,
                      std::to_string(zero_error) + "/" + std::to_string(trials));
    }

    // zero-head rank collapse
    {
        bool ok = true;
        for (std::uint64_t s = 0; s < 5; ++s) {
            AffineSubspaceSpec none;
            none.ambient_dim = 4;
            none.directions = Matrix(0, 4);
            const Dataset ds = gen_affine_lowrank(none, 5, 5, 1.0, 0.3, seed + 100 + s);
            RankExperimentConfig rc;
            rc.init = RankInit::zero_w;
            rc.seed = seed + s;
            rc.iters = 800;
            rc.checkpoint_every = 40;
            const RankTrace trace = prop1_rank_experiment(4, 5, ds, rc);
            if (!trace.zero_w_rank_ok) ok = false;
        }
        detail::check(checks, "zero_head_rank_at_most_1", ok, "5 seeds");
    }

    // block-matrix eigenvalue check
    {
        Rng r(seed);
        bool ok = true;
        for (int t = 0; t < 20; ++t) {
            const Vector v = r.normal_vector(5);
            const auto [lam, vec] = lemma2_check(v);
            if (std::abs(lam - norm2(v)) > 1e-8 * std::max(1.0, norm2(v))) ok = false;
        }
        detail::check(checks, "block_matrix_eigenvalue", ok, "20 random vectors");
    }
}

// Generic fit-and-evaluate run driven entirely by the config.
inline void run_train(const json& cfg, detail::ArtifactSink& sink,
                      std::vector<CheckResult>& checks) {
    const std::uint64_t seed = cfg.at("seed");
    const std::string dataset_kind = detail::get_or<std::string>(cfg, "dataset", "ring-vs-cluster");

    Dataset ds;
    if (dataset_kind == "ring-vs-cluster" || dataset_kind == "two-moons") {
        ds = gen_nonlinear_2d(dataset_kind == "two-moons" ? Nonlinear2dKind::two_moons
                                                          : Nonlinear2dKind::ring_vs_cluster,
                              detail::get_or<std::size_t>(cfg, "n_per_class", 50),
                              detail::get_or<double>(cfg, "noise", 0.05), seed);
    } else if (dataset_kind == "affine-lowrank") {
        AffineSubspaceSpec spec;
        spec.ambient_dim = detail::get_or<std::size_t>(cfg, "d", 3);
        spec.directions = Matrix(0, spec.ambient_dim);
        ds = gen_affine_lowrank(spec, detail::get_or<std::size_t>(cfg, "n_pos", 10),
                                detail::get_or<std::size_t>(cfg, "n_neg", 10),
                                detail::get_or<double>(cfg, "separation", 1.0),
                                detail::get_or<double>(cfg, "asymmetry", 0.5), seed);
    } else if (dataset_kind == "cifar") {
        detail::ImageTask task = detail::load_image_task(cfg, sink, seed);
        ds = std::move(task.train);
    } else {
        throw std::invalid_argument("train: unknown dataset '" + dataset_kind + "'");
    }

    const std::string model_kind = detail::get_or<std::string>(cfg, "model", "mlp");
    json metrics;
    if (model_kind == "linear") {
        GdConfig gd;
        gd.lr = detail::get_or<double>(cfg, "lr", 0.0);
        gd.max_iters = detail::get_or<long>(cfg, "iters", 100000);
        const std::string loss = detail::get_or<std::string>(cfg, "loss", "bce");
        TrainTrace trace;
        if (loss == "bce") {
            trace = train_cross_entropy(ds, gd);
        } else {
            PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, seed);
            trace = train_differential_linear(stream, gd);
            trace.final_model.b = select_bias(trace.final_model.w, ds).b;
        }
        sink.write_json("model.json", to_json(trace.final_model));
        metrics = {{"loss", trace.loss_curve.back()},
                   {"train_error", train_error(trace.final_model, ds)},
                   {"margin", geometric_margin(trace.final_model, ds)},
                   {"iterations", trace.iterations},
                   {"converged", trace.converged}};
        detail::check(checks, "finished", true);
    } else {
        FitConfig fit_cfg;
        fit_cfg.loss = loss_from_name(detail::get_or<std::string>(cfg, "loss", "diff_squared"));
        const std::string opt = detail::get_or<std::string>(cfg, "optimizer", "adam");
        fit_cfg.optimizer = opt == "gd" ? OptimizerKind::gd
                            : opt == "momentum" ? OptimizerKind::momentum
                                                : OptimizerKind::adam;
        fit_cfg.lr = detail::get_or<double>(cfg, "lr", 0.01);
        fit_cfg.iters = detail::get_or<long>(cfg, "iters", 2000);
        fit_cfg.batch = detail::get_or<std::size_t>(cfg, "batch", 0);
        fit_cfg.seed = seed;
        MlpSpec arch;
        arch.input_dim = ds.dim();
        arch.hidden = detail::get_or<std::vector<std::size_t>>(cfg, "hidden", {16});
        arch.activation = Activation::tanh;
        arch.readout_bias = fit_cfg.loss == LossKind::bce;
        const FitResult res = fit(build_mlp(arch, seed + 1), ds, fit_cfg);
        const double midpoint =
            fit_cfg.loss == LossKind::bce ? 0.0 : select_threshold(res.model, ds);
        const double best = best_threshold(res.model, ds);
        sink.write_json("model.json", to_json(res.model));
        metrics = {{"loss", res.history.loss.empty() ? 0.0 : res.history.loss.back()},
                   {"train_accuracy", accuracy(res.model, ds, midpoint)},
                   {"threshold_midpoint", midpoint},
                   {"accuracy_at_midpoint_threshold", accuracy(res.model, ds, midpoint)},
                   {"threshold_best", best},
                   {"accuracy_at_best_threshold", accuracy(res.model, ds, best)},
                   {"diverged", res.history.diverged}};
        detail::check(checks, "finished", !res.history.diverged, res.history.note);
    }
    metrics["dataset"] = ds.name;
    metrics["n_points"] = ds.size();
    sink.write_json("metrics.json", metrics);
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"synth-margin", "rank-spectrum",
                                                   "nonlinear-demo", "robustness", "theorems",
                                                   "train"};
    return names;
}

// Executes one named experiment, digests everything it wrote, and emits
// manifest.json. A failure still produces the manifest plus a `failed` marker
// next to whatever artifacts were completed.
inline RunManifest run_experiment(const std::string& name, json config,
                                  const std::filesystem::path& out_dir) {
    if (!config.contains("seed")) {
        throw std::invalid_argument("config field 'seed' is required (no wall-clock seeding)");
    }
    if (!config.at("seed").is_number()) {
        throw std::invalid_argument("config field 'seed' must be a number");
    }

    RunManifest manifest;
    manifest.experiment = name;
    manifest.config_hash = sha256_hex(config.dump());

    detail::ArtifactSink sink(out_dir);
    sink.write_json("config.json", config);

    const auto start = std::chrono::steady_clock::now();
    try {
        if (name == "synth-margin") {
            run_synth_margin(config, sink, manifest.checks);
        } else if (name == "rank-spectrum") {
            run_rank_spectrum(config, sink, manifest.checks);
        } else if (name == "nonlinear-demo") {
            run_nonlinear_demo(config, sink, manifest.checks);
        } else if (name == "robustness") {
            run_robustness(config, sink, manifest.checks);
        } else if (name == "theorems") {
            run_theorems(config, sink, manifest.checks);
        } else if (name == "train") {
            run_train(config, sink, manifest.checks);
        } else {
            throw std::invalid_argument("unknown experiment '" + name +
                                        "'; expected one of: synth-margin, rank-spectrum, "
                                        "nonlinear-demo, robustness, theorems, train");
        }
        manifest.ok = true;
        for (const CheckResult& c : manifest.checks) {
            if (!c.passed) manifest.ok = false;
        }
    } catch (const std::exception& e) {
        manifest.ok = false;
        manifest.error = e.what();
        std::ofstream marker(sink.file("failed"));
        marker << e.what() << '\n';
    }

    {
        json checks = json::array();
        for (const CheckResult& c : manifest.checks) {
            checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        }
        json report{{"experiment", name}, {"ok", manifest.ok}, {"checks", checks}};
        if (!manifest.error.empty()) report["error"] = manifest.error;
        sink.write_json("report.json", report);
    }
    manifest.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    manifest.artifacts = sink.digests();
    std::ofstream out(out_dir / "manifest.json");
    out << manifest.to_json().dump(2) << '\n';
    return manifest;
}

}  // namespace difftrain::cli
