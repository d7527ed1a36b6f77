#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/data/pairs.hpp"
#include "difftrain/linear/logistic.hpp"
#include "difftrain/linear/model.hpp"

namespace difftrain {

struct TrainTrace {
    std::vector<TraceSnapshot> iterates;  // normalized directions at sampled iterations
    LinearModel final_model;
    Vector loss_curve;
    bool converged = false;
    bool diverged = false;
    long iterations = 0;
    std::string note;
};

// Full-batch gradient descent on the cross-entropy loss, run on the augmented
// variable [w; b] (equivalently: every point is extended with a constant 1
// coordinate). Snapshots hold the normalized augmented direction.
inline TrainTrace train_cross_entropy(const Dataset& ds, const GdConfig& cfg) {
    ds.require_two_class("train_cross_entropy");
    const std::size_t d = ds.dim();
    Matrix rows(ds.size(), d + 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double sign = ds.label(i);
        auto src = ds.point(i);
        auto dst = rows.row(i);
        for (std::size_t c = 0; c < d; ++c) dst[c] = sign * src[c];
        dst[d] = sign;
    }

    LogisticGdResult gd = logistic_gd(rows, cfg);
    if (gd.diverged) {
        throw std::runtime_error("train_cross_entropy: " + gd.note);
    }

    TrainTrace trace;
    trace.iterates = std::move(gd.snapshots);
    trace.loss_curve = std::move(gd.loss_curve);
    trace.converged = gd.converged;
    trace.iterations = gd.iterations;
    trace.note = std::move(gd.note);
    trace.final_model.w.assign(gd.z.begin(), gd.z.begin() + static_cast<std::ptrdiff_t>(d));
    trace.final_model.b = gd.z[d];
    return trace;
}

// Gradient descent on the pairwise logistic loss
//   sum_pairs log(1 + e^{-<w, x_i - y_j>}).
// The stream is materialized into one batch of difference vectors and trained
// full-batch: an exhaustive-shuffled stream contributes each of the |I|*|J|
// differences exactly once, a nonzero pair_budget keeps only that many draws
// (with hard mining this is exactly the hardest pairs). The bias is not
// trained here; pick it afterwards with select_bias.
inline TrainTrace train_differential_linear(PairStream& pairs, const GdConfig& cfg,
                                            std::size_t pair_budget = 0) {
    const Dataset& ds = pairs.dataset();
    const std::size_t d = ds.dim();

    TrainTrace trace;
    if (pairs.epoch_size() == 0) {
        throw std::invalid_argument("train_differential_linear: empty pair stream");
    }

    const std::size_t n_pairs = pair_budget == 0 ? pairs.epoch_size() : pair_budget;
    Matrix rows(n_pairs, d);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const auto [i, j] = pairs.next();
        auto xi = ds.point(i);
        auto yj = ds.point(j);
        auto dst = rows.row(p);
        for (std::size_t c = 0; c < d; ++c) dst[c] = xi[c] - yj[c];
    }

    LogisticGdResult gd = logistic_gd(rows, cfg);
    if (gd.diverged) {
        throw std::runtime_error("train_differential_linear: " + gd.note);
    }
    trace.iterates = std::move(gd.snapshots);
    trace.loss_curve = std::move(gd.loss_curve);
    trace.converged = gd.converged;
    trace.iterations = gd.iterations;
    trace.note = std::move(gd.note);
    trace.final_model.w = std::move(gd.z);
    trace.final_model.b = 0.0;
    return trace;
}

// Single-pair stochastic steps for the same objective, driven by the stream
// order. Used where the full batch is deliberately not wanted.
inline TrainTrace train_differential_sgd(PairStream& pairs, double lr, long iters,
                                         long snapshot_every = 100) {
    if (lr <= 0.0) {
        throw std::invalid_argument("train_differential_sgd: lr must be positive");
    }
    const Dataset& ds = pairs.dataset();
    const std::size_t d = ds.dim();
    TrainTrace trace;
    Vector w(d, 0.0);

    auto snapshot = [&](long iter) {
        Vector u = w;
        const double n = norm2(u);
        if (n > 0.0) scale(u, 1.0 / n);
        trace.iterates.push_back({iter, std::move(u)});
    };
    snapshot(0);

    for (long it = 1; it <= iters; ++it) {
        const auto [i, j] = pairs.next();
        Vector diff = subtract(ds.point(i), ds.point(j));
        const double m = dot(w, diff);
        axpy(lr * sigmoid(-m), diff, std::span<double>(w));
        trace.loss_curve.push_back(softplus(-m));
        if (snapshot_every > 0 && it % snapshot_every == 0) snapshot(it);
    }
    trace.final_model.w = std::move(w);
    trace.final_model.b = 0.0;
    trace.iterations = iters;
    return trace;
}

}  // namespace difftrain
