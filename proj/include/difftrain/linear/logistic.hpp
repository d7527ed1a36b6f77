#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/linear/model.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/numerics/spectrum.hpp"

namespace difftrain {

// log(1 + e^z) without overflow.
inline double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// 1 / (1 + e^-z) without overflow.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct CeEval {
    double loss = 0.0;
    Vector grad_w;
    double grad_b = 0.0;
};

// Two-class cross-entropy loss and its analytic gradient:
//   sum_I log(1+e^-(w^T x_i + b)) + sum_J log(1+e^(w^T y_j + b)).
inline CeEval ce_loss_and_grad(const LinearModel& model, const Dataset& ds) {
    ds.require_two_class("ce_loss_and_grad");
    CeEval out;
    out.grad_w.assign(ds.dim(), 0.0);
    for (std::size_t i : ds.positives) {
        const double s = model.score(ds.point(i));
        out.loss += softplus(-s);
        const double g = -sigmoid(-s);
        axpy(g, ds.point(i), std::span<double>(out.grad_w));
        out.grad_b += g;
    }
    for (std::size_t j : ds.negatives) {
        const double s = model.score(ds.point(j));
        out.loss += softplus(s);
        const double g = sigmoid(s);
        axpy(g, ds.point(j), std::span<double>(out.grad_w));
        out.grad_b += g;
    }
    if (!std::isfinite(out.loss) || !all_finite(out.grad_w) || !std::isfinite(out.grad_b)) {
        throw std::runtime_error("ce_loss_and_grad: non-finite result");
    }
    return out;
}

struct GdConfig {
    // lr > 0 runs plain fixed-step gradient descent and aborts on divergence.
    // lr == 0 selects the adaptive mode: the step is seeded from the logistic
    // smoothness bound 0.5/sigma_max^2 of the data matrix and then grown or
    // backtracked so the loss never increases. The adaptive mode keeps making
    // progress long after the fixed step has stalled, which is what the
    // direction-convergence experiments need.
    double lr = 0.0;
    long max_iters = 200000;
    long snapshot_every = 1000;
    // Stop once the normalized direction moves less than this per
    // snapshot_every iterations.
    double direction_tol = 1e-9;
};

struct TraceSnapshot {
    long iteration = 0;
    Vector direction;  // unit-normalized iterate (zero vector before any step)
};

struct LogisticGdResult {
    Vector z;
    std::vector<TraceSnapshot> snapshots;
    Vector loss_curve;  // one entry per iteration, entry 0 = initial loss
    bool converged = false;
    bool diverged = false;
    long iterations = 0;
    std::string note;
};

namespace detail {

struct MarginStats {
    double loss = 0.0;       // sum softplus(-m_p); underflows to 0 at huge margins
    double log_sum_exp = 0.0;  // log sum e^{-m_p}, stable at any margin
    double min_margin = 0.0;
};

inline MarginStats margin_stats(const Matrix& rows, const Vector& z, Vector& margins) {
    margins.resize(rows.rows());
    MarginStats st;
    st.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < rows.rows(); ++p) {
        margins[p] = dot(rows.row(p), z);
        st.min_margin = std::min(st.min_margin, margins[p]);
    }
    double s = 0.0;
    for (double m : margins) {
        st.loss += softplus(-m);
        s += std::exp(-(m - st.min_margin));
    }
    st.log_sum_exp = -st.min_margin + std::log(s);
    return st;
}

}  // namespace detail

// Full-batch gradient descent on the through-origin logistic objective
//   L(z) = sum_p log(1 + e^{-<z, a_p>})
// over the rows a_p. Both linear trainers reduce to this: cross-entropy uses
// signed augmented points, differential training uses pair differences.
//
// Stability: once every margin exceeds ~30, softplus(-m) equals e^{-m} in
// double precision, so descent is steered by the shifted-exponent weights
// q_p = e^{-(m_p - m_min)} and monotonicity is checked on log sum e^{-m_p}.
// That keeps the direction refining long past the point where the raw loss
// underflows to zero.
inline LogisticGdResult logistic_gd(const Matrix& rows, const GdConfig& cfg, Vector z0 = {}) {
    if (rows.rows() == 0) {
        throw std::invalid_argument("logistic_gd: no data rows");
    }
    if (cfg.lr < 0.0) {
        throw std::invalid_argument("logistic_gd: lr must be positive (or 0 for adaptive)");
    }
    const std::size_t d = rows.cols();
    LogisticGdResult res;
    res.z = z0.empty() ? Vector(d, 0.0) : std::move(z0);
    if (res.z.size() != d) {
        throw std::invalid_argument("logistic_gd: initial point dimension mismatch");
    }

    const bool adaptive = (cfg.lr == 0.0);
    const double smq = sigma_max_sq(rows);
    double eta = adaptive ? (smq > 0.0 ? 0.5 / smq : 1.0) : cfg.lr;
    constexpr double kDeepMargin = 30.0;
    // The iterate may only move by a bounded amount per step. Without this
    // cap the grown step dwarfs the accumulated iterate and the direction
    // locks onto whichever pair is currently hardest instead of averaging
    // the support set.
    double max_row_norm = 0.0;
    for (std::size_t p = 0; p < rows.rows(); ++p) {
        max_row_norm = std::max(max_row_norm, norm2(rows.row(p)));
    }
    const double step_norm_cap = max_row_norm > 0.0 ? 1.0 / max_row_norm : 1.0;

    Vector margins;
    detail::MarginStats st = detail::margin_stats(rows, res.z, margins);
    const double initial_loss = st.loss;
    res.loss_curve.push_back(st.loss);

    Vector dir(d, 0.0);
    Vector prev_snapshot_dir;
    auto push_snapshot = [&](long iter) {
        Vector u = res.z;
        const double n = norm2(u);
        if (n > 0.0) scale(u, 1.0 / n);
        res.snapshots.push_back({iter, u});
        return u;
    };
    prev_snapshot_dir = push_snapshot(0);

    Vector candidate(d);
    long it = 0;
    for (it = 1; it <= cfg.max_iters; ++it) {
        const bool deep = st.min_margin > kDeepMargin;
        std::fill(dir.begin(), dir.end(), 0.0);
        if (!deep) {
            for (std::size_t p = 0; p < rows.rows(); ++p) {
                axpy(sigmoid(-margins[p]), rows.row(p), std::span<double>(dir));
            }
        } else {
            double wsum = 0.0;
            for (std::size_t p = 0; p < rows.rows(); ++p) {
                const double q = std::exp(-(margins[p] - st.min_margin));
                wsum += q;
                axpy(q, rows.row(p), std::span<double>(dir));
            }
            if (wsum > 0.0) scale(dir, 1.0 / wsum);
        }
        const double dn = norm2(dir);
        if (dn == 0.0) {
            res.converged = true;
            res.note = "gradient vanished";
            break;
        }

        if (!adaptive) {
            candidate = res.z;
            axpy(eta, dir, std::span<double>(candidate));
            res.z = candidate;
            st = detail::margin_stats(rows, res.z, margins);
            res.loss_curve.push_back(st.loss);
            if (!std::isfinite(st.loss) || st.loss > 1.0e3 * std::max(initial_loss, 1e-300)) {
                res.diverged = true;
                res.note = "loss diverged; reduce the learning rate";
                break;
            }
        } else {
            const double ref = deep ? st.log_sum_exp : st.loss;
            double trial_eta = std::min(eta, step_norm_cap / dn);
            bool accepted = false;
            for (int half = 0; half < 120; ++half) {
                candidate = res.z;
                axpy(trial_eta, dir, std::span<double>(candidate));
                Vector cand_margins;
                detail::MarginStats cand = detail::margin_stats(rows, candidate, cand_margins);
                const double trial = deep ? cand.log_sum_exp : cand.loss;
                if (std::isfinite(trial) && trial <= ref) {
                    res.z.swap(candidate);
                    margins.swap(cand_margins);
                    st = cand;
                    eta = trial_eta * 1.25;
                    accepted = true;
                    break;
                }
                trial_eta *= 0.5;
            }
            res.loss_curve.push_back(st.loss);
            if (!accepted) {
                res.converged = true;
                res.note = "step stalled at machine precision";
                break;
            }
        }

        if (cfg.snapshot_every > 0 && it % cfg.snapshot_every == 0) {
            Vector u = push_snapshot(it);
            Vector diff = subtract(u, prev_snapshot_dir);
            const double change = norm2(diff);
            if (norm2(prev_snapshot_dir) > 0.0 && change < cfg.direction_tol) {
                res.converged = true;
                res.note = "direction settled";
                prev_snapshot_dir = u;
                break;
            }
            prev_snapshot_dir = u;
        }
    }

    res.iterations = std::min(it, cfg.max_iters);
    if (res.snapshots.empty() || res.snapshots.back().iteration != res.iterations) {
        push_snapshot(res.iterations);
    }
    return res;
}

}  // namespace difftrain
