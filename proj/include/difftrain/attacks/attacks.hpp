#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "difftrain/linear/model.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/random.hpp"
#include "difftrain/scored_model.hpp"

namespace difftrain {

enum class AttackNorm { l2, linf };

struct CwParams {
    double c_init = 1e-2;
    int binary_search_steps = 9;
    int inner_iters = 200;
    double confidence = 0.0;  // kappa
    double inner_lr = 1e-2;
};

struct AttackConfig {
    AttackNorm norm = AttackNorm::l2;
    double epsilon = 0.0;
    int steps = 40;
    double step_size = 0.0;  // 0 = epsilon/10
    double box_lo = 0.0;
    double box_hi = 1.0;
    bool random_start = true;
    std::uint64_t seed = 0;
    CwParams cw;

    void validate() const {
        if (epsilon < 0.0) throw std::invalid_argument("AttackConfig: epsilon must be >= 0");
        if (box_lo >= box_hi) throw std::invalid_argument("AttackConfig: box_lo must be < box_hi");
        if (steps < 1) throw std::invalid_argument("AttackConfig: steps must be >= 1");
    }
    double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 10.0; }
};

struct AttackResult {
    Vector original;
    Vector adversarial;
    double perturbation_norm = 0.0;
    bool success = false;
    long queries = 0;
    std::string note;
};

namespace detail {

inline void clip_box(Vector& x, double lo, double hi) {
    for (double& v : x) v = std::clamp(v, lo, hi);
}

// Projection onto the epsilon-ball around x0 (per-norm). Box clipping after
// the ball projection never leaves the ball as long as x0 itself is in the
// box, because clipping moves each coordinate towards x0's.
inline void project_ball(Vector& x, const Vector& x0, double epsilon, AttackNorm norm) {
    if (norm == AttackNorm::linf) {
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] = std::clamp(x[k], x0[k] - epsilon, x0[k] + epsilon);
        }
        return;
    }
    Vector delta = subtract(x, x0);
    const double n = norm2(delta);
    if (n > epsilon) {
        const double f = epsilon / n;
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = x0[k] + f * delta[k];
    }
}

inline double perturbation_norm(const Vector& adv, const Vector& orig, AttackNorm norm) {
    double v = 0.0;
    if (norm == AttackNorm::linf) {
        for (std::size_t k = 0; k < adv.size(); ++k) v = std::max(v, std::abs(adv[k] - orig[k]));
    } else {
        v = norm2(subtract(adv, orig));
    }
    return v;
}

// Every reported success is re-checked with a fresh forward pass.
inline AttackResult finish(const ScoredModel& model, Vector original, Vector adversarial,
                           int label, AttackNorm norm, long queries, std::string note = "") {
    AttackResult res;
    res.success = model.predict(adversarial) != label;
    res.perturbation_norm = perturbation_norm(adversarial, original, norm);
    res.original = std::move(original);
    res.adversarial = std::move(adversarial);
    res.queries = queries + 1;
    res.note = std::move(note);
    return res;
}

}  // namespace detail

// One signed gradient step: x' = clip(x - label * epsilon * g) with g the
// sign (linf) or unit (l2) input gradient of the score.
inline AttackResult fgsm(const ScoredModel& model, std::span<const double> x, int label,
                         const AttackConfig& cfg) {
    cfg.validate();
    Vector x0(x.begin(), x.end());
    Vector grad = model.input_grad(x);
    const double gn = norm2(grad);
    if (gn == 0.0) {
        AttackResult res = detail::finish(model, x0, x0, label, cfg.norm, 1, "zero-gradient");
        res.success = false;
        return res;
    }
    Vector adv = x0;
    if (cfg.norm == AttackNorm::linf) {
        for (std::size_t k = 0; k < adv.size(); ++k) {
            const double s = grad[k] > 0.0 ? 1.0 : (grad[k] < 0.0 ? -1.0 : 0.0);
            adv[k] -= label * cfg.epsilon * s;
        }
    } else {
        axpy(-label * cfg.epsilon / gn, grad, std::span<double>(adv));
    }
    detail::project_ball(adv, x0, cfg.epsilon, cfg.norm);  // exact up to round-off
    detail::clip_box(adv, cfg.box_lo, cfg.box_hi);
    return detail::finish(model, std::move(x0), std::move(adv), label, cfg.norm, 2);
}

// Iterated projected descent on label*score inside the epsilon ball
// intersected with the box. Optional seeded random start. Returns at the
// first verified success, else the final iterate.
inline AttackResult pgd(const ScoredModel& model, std::span<const double> x, int label,
                        const AttackConfig& cfg) {
    cfg.validate();
    Vector x0(x.begin(), x.end());
    Vector cur = x0;
    long queries = 0;

    if (cfg.epsilon > 0.0 && cfg.random_start) {
        Rng rng(cfg.seed);
        if (cfg.norm == AttackNorm::linf) {
            for (double& v : cur) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
        } else {
            Vector dir = rng.normal_vector(cur.size());
            const double n = norm2(dir);
            if (n > 0.0) {
                const double radius =
                    cfg.epsilon * std::pow(rng.uniform(0.0, 1.0), 1.0 / double(cur.size()));
                axpy(radius / n, dir, std::span<double>(cur));
            }
        }
        detail::project_ball(cur, x0, cfg.epsilon, cfg.norm);
        detail::clip_box(cur, cfg.box_lo, cfg.box_hi);
    }

    const double step = cfg.effective_step();
    for (int it = 0; it < cfg.steps; ++it) {
        if (model.predict(cur) != label) {
            return detail::finish(model, std::move(x0), std::move(cur), label, cfg.norm, queries);
        }
        ++queries;
        Vector grad = model.input_grad(cur);
        ++queries;
        const double gn = norm2(grad);
        if (gn == 0.0) {
            return detail::finish(model, std::move(x0), std::move(cur), label, cfg.norm, queries,
                                  "zero-gradient");
        }
        if (cfg.norm == AttackNorm::linf) {
            for (std::size_t k = 0; k < cur.size(); ++k) {
                const double s = grad[k] > 0.0 ? 1.0 : (grad[k] < 0.0 ? -1.0 : 0.0);
                cur[k] -= label * step * s;
            }
        } else {
            axpy(-label * step / gn, grad, std::span<double>(cur));
        }
        detail::project_ball(cur, x0, cfg.epsilon, cfg.norm);
        detail::clip_box(cur, cfg.box_lo, cfg.box_hi);
    }
    return detail::finish(model, std::move(x0), std::move(cur), label, cfg.norm, queries);
}

// Minimum-norm attack: minimize ||delta||^2 + c * max(label*(score - thr), -kappa)
// with the box handled by a tanh change of variables, binary search over c,
// and plain inner gradient descent for determinism. Returns the smallest-norm
// verified success found, else the failure with the best objective.
inline AttackResult carlini_wagner_l2(const ScoredModel& model, std::span<const double> x,
                                      int label, const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.cw.inner_iters < 1) {
        throw std::invalid_argument("carlini_wagner_l2: inner_iters must be >= 1");
    }
    Vector x0(x.begin(), x.end());
    long queries = 0;

    if (model.predict(x0) != label) {
        ++queries;
        AttackResult res = detail::finish(model, x0, x0, label, AttackNorm::l2, queries,
                                          "already misclassified");
        return res;
    }

    const double lo = cfg.box_lo, hi = cfg.box_hi;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    auto to_box = [&](double u) { return mid + half * std::tanh(u); };
    auto from_box = [&](double v) {
        const double t = std::clamp((v - mid) / half, -0.999999, 0.999999);
        return std::atanh(t);
    };
    // du = dv/half near the center, so this makes inner_lr an input-space
    // step size regardless of how wide the box is.
    const double lr_u = cfg.cw.inner_lr / (half * half);

    Vector best_adv;
    double best_norm = std::numeric_limits<double>::infinity();
    double c = cfg.cw.c_init;
    double c_lo = 0.0, c_hi = -1.0;  // c_hi < 0 = unbounded so far

    Vector u0(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) u0[k] = from_box(x0[k]);

    for (int bs = 0; bs < cfg.cw.binary_search_steps; ++bs) {
        Vector u = u0;
        bool success_at_c = false;
        for (int it = 0; it < cfg.cw.inner_iters; ++it) {
            Vector adv(u.size());
            for (std::size_t k = 0; k < u.size(); ++k) adv[k] = to_box(u[k]);
            const double margin = label * (model.score(adv) - model.threshold);
            ++queries;

            if (margin < 0.0) {
                const double n = norm2(subtract(adv, x0));
                success_at_c = true;
                if (n < best_norm) {
                    best_norm = n;
                    best_adv = adv;
                }
            }

            // d/d u of ||adv-x0||^2 + c*max(margin, -kappa)
            Vector grad_adv = subtract(adv, x0);
            scale(grad_adv, 2.0);
            if (margin > -cfg.cw.confidence) {
                Vector sg = model.input_grad(adv);
                ++queries;
                axpy(c * label, sg, std::span<double>(grad_adv));
            }
            for (std::size_t k = 0; k < u.size(); ++k) {
                const double duv = half * (1.0 - std::tanh(u[k]) * std::tanh(u[k]));
                u[k] -= lr_u * grad_adv[k] * duv;
            }
        }
        if (success_at_c) {
            c_hi = c;
            c = 0.5 * (c_lo + c_hi);
        } else {
            c_lo = c;
            c = (c_hi > 0.0) ? 0.5 * (c_lo + c_hi) : c * 10.0;
        }
    }

    if (best_adv.empty()) {
        AttackResult res;
        res.original = std::move(x0);
        res.adversarial = res.original;
        res.success = false;
        res.queries = queries;
        res.note = "no adversarial point found";
        return res;
    }
    return detail::finish(model, std::move(x0), std::move(best_adv), label, AttackNorm::l2, queries);
}

inline nlohmann::json to_json(const AttackResult& r) {
    return nlohmann::json{{"original", r.original},
                          {"adversarial", r.adversarial},
                          {"perturbation_norm", r.perturbation_norm},
                          {"success", r.success},
                          {"queries", r.queries},
                          {"note", r.note}};
}

// Distance from x to the hyperplane: the exact smallest perturbation that
// flips a linear model.
inline double linear_minimal_perturbation(const LinearModel& model, std::span<const double> x) {
    const double wn = norm2(model.w);
    if (wn == 0.0) {
        throw std::invalid_argument("linear_minimal_perturbation: ||w|| must be positive");
    }
    return std::abs(model.score(x)) / wn;
}

}  // namespace difftrain
