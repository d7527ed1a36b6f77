#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/data/pairs.hpp"
#include "difftrain/nn/loss.hpp"
#include "difftrain/nn/model.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

enum class OptimizerKind { gd, momentum, adam };

struct FitConfig {
    LossKind loss = LossKind::bce;
    OptimizerKind optimizer = OptimizerKind::gd;
    double lr = 0.01;
    double momentum_beta = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long iters = 1000;
    // bce: points per iteration (0 = full batch). Pair losses: pairs per
    // iteration (0 = 5% of |I|*|J|, clamped to [1, 4096]; a few percent of
    // the pairs is enough).
    std::size_t batch = 0;
    PairStrategy pair_strategy = PairStrategy::uniform_random;
    std::uint64_t seed = 0;
    long snapshot_every = 0;  // 0 = record loss only

    void validate() const {
        if (lr < 0.0) throw std::invalid_argument("FitConfig: lr must be nonnegative");
        if (momentum_beta < 0.0 || momentum_beta >= 1.0 || adam_beta1 < 0.0 || adam_beta1 >= 1.0 ||
            adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
            throw std::invalid_argument("FitConfig: momentum coefficients must lie in [0,1)");
        }
        if (iters < 0) throw std::invalid_argument("FitConfig: iters must be nonnegative");
    }
};

struct FitHistory {
    Vector loss;  // per iteration
    std::vector<long> snapshot_iters;
    std::vector<MlpModel> snapshots;
    bool diverged = false;
    std::string note;
};

struct FitResult {
    MlpModel model;
    FitHistory history;
};

// Deterministic training loop: plain gradient descent, classical momentum, or
// adaptive moments, over point batches (bce) or weight-sharing pair batches
// (differential losses). Aborts on a non-finite loss and returns the last
// good parameters.
inline FitResult fit(MlpModel model, const Dataset& ds, const FitConfig& cfg) {
    cfg.validate();
    model.validate();
    if (cfg.loss == LossKind::bce) {
        if (ds.size() == 0) throw std::invalid_argument("fit: empty dataset");
    } else {
        ds.require_two_class("fit");
    }

    Rng rng(cfg.seed);
    std::optional<PairStream> pairs;
    std::size_t pair_batch = 0;
    if (cfg.loss != LossKind::bce) {
        pairs.emplace(sample_pairs(ds, cfg.pair_strategy, cfg.seed));
        pair_batch = cfg.batch;
        if (pair_batch == 0) {
            pair_batch = std::clamp<std::size_t>(
                static_cast<std::size_t>(0.05 * static_cast<double>(pairs->epoch_size())), 1, 4096);
        }
    }

    MlpModel velocity = zeros_like(model);
    MlpModel adam_m = zeros_like(model);
    MlpModel adam_v = zeros_like(model);

    FitResult res;
    res.model = std::move(model);
    MlpModel last_good = res.model;
    long adam_t = 0;

    for (long it = 1; it <= cfg.iters; ++it) {
        Batch batch;
        if (cfg.loss == LossKind::bce) {
            if (cfg.batch == 0 || cfg.batch >= ds.size()) {
                batch.points.resize(ds.size());
                for (std::size_t i = 0; i < ds.size(); ++i) batch.points[i] = i;
            } else {
                batch.points.reserve(cfg.batch);
                for (std::size_t k = 0; k < cfg.batch; ++k) batch.points.push_back(rng.index(ds.size()));
            }
        } else {
            batch.pairs.reserve(pair_batch);
            for (std::size_t k = 0; k < pair_batch; ++k) batch.pairs.push_back(pairs->next());
        }

        MlpModel grads = zeros_like(res.model);
        const double loss = loss_and_grads(res.model, ds, batch, cfg.loss, grads);
        if (!std::isfinite(loss)) {
            res.model = std::move(last_good);
            res.history.diverged = true;
            res.history.note = "non-finite loss at iteration " + std::to_string(it) +
                               "; restored the last good snapshot";
            break;
        }
        res.history.loss.push_back(loss);
        last_good = res.model;

        switch (cfg.optimizer) {
            case OptimizerKind::gd:
                for_each_param(res.model, grads, [&](std::span<double> p, std::span<double> g) {
                    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * g[k];
                });
                break;
            case OptimizerKind::momentum: {
                MlpModel* vel = &velocity;
                for_each_param(grads, *vel, [&](std::span<double> g, std::span<double> v) {
                    for (std::size_t k = 0; k < g.size(); ++k) v[k] = cfg.momentum_beta * v[k] + g[k];
                });
                for_each_param(res.model, *vel, [&](std::span<double> p, std::span<double> v) {
                    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * v[k];
                });
                break;
            }
            case OptimizerKind::adam: {
                ++adam_t;
                const double bc1 = 1.0 - std::pow(cfg.adam_beta1, adam_t);
                const double bc2 = 1.0 - std::pow(cfg.adam_beta2, adam_t);
                for_each_param(grads, adam_m, [&](std::span<double> g, std::span<double> m) {
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
                    }
                });
                for_each_param(grads, adam_v, [&](std::span<double> g, std::span<double> v) {
                    for (std::size_t k = 0; k < g.size(); ++k) {
                        v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
                    }
                });
                MlpModel step = zeros_like(res.model);
                for_each_param(adam_m, step, [&](std::span<double> m, std::span<double> s) {
                    for (std::size_t k = 0; k < m.size(); ++k) s[k] = m[k] / bc1;
                });
                for_each_param(adam_v, step, [&](std::span<double> v, std::span<double> s) {
                    for (std::size_t k = 0; k < v.size(); ++k) {
                        s[k] /= std::sqrt(v[k] / bc2) + cfg.adam_eps;
                    }
                });
                for_each_param(res.model, step, [&](std::span<double> p, std::span<double> s) {
                    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * s[k];
                });
                break;
            }
        }

        if (cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0) {
            res.history.snapshot_iters.push_back(it);
            res.history.snapshots.push_back(res.model);
        }
    }
    return res;
}

// Accuracy of thresholded scores: prediction is +1 iff score >= threshold.
inline double accuracy(const MlpModel& model, const Dataset& ds, double threshold = 0.0) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double s = forward(model, ds.point(i)).score;
        const int pred = s >= threshold ? 1 : -1;
        if (pred == ds.label(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

// Midpoint decision threshold for differentially trained nets: halfway
// between the lowest positive score and the highest negative score (the
// fixed-direction bias rule applied to readout scores).
inline double select_threshold(const MlpModel& model, const Dataset& ds) {
    ds.require_two_class("select_threshold");
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (std::size_t i : ds.positives) {
        min_pos = std::min(min_pos, forward(model, ds.point(i)).score);
    }
    for (std::size_t j : ds.negatives) {
        max_neg = std::max(max_neg, forward(model, ds.point(j)).score);
    }
    return 0.5 * min_pos + 0.5 * max_neg;
}

// Threshold sweep trading type-I against type-II errors; returns the value
// with the best balanced accuracy on the given (validation) set.
inline double best_threshold(const MlpModel& model, const Dataset& ds, std::size_t grid = 201) {
    ds.require_two_class("best_threshold");
    Vector scores(ds.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        scores[i] = forward(model, ds.point(i)).score;
        lo = std::min(lo, scores[i]);
        hi = std::max(hi, scores[i]);
    }
    double best = lo, best_acc = -1.0;
    for (std::size_t g = 0; g < grid; ++g) {
        const double th = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid - 1);
        std::size_t tp = 0, tn = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const bool pos = scores[i] >= th;
            if (pos && ds.label(i) == 1) ++tp;
            if (!pos && ds.label(i) == -1) ++tn;
        }
        const double acc = 0.5 * (static_cast<double>(tp) / ds.positives.size() +
                                  static_cast<double>(tn) / ds.negatives.size());
        if (acc > best_acc) {
            best_acc = acc;
            best = th;
        }
    }
    return best;
}

}  // namespace difftrain
