#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/attacks/attacks.hpp"
#include "difftrain/data/dataset.hpp"

namespace difftrain {

enum class AttackKind { fgsm, pgd, cw };

struct RobustnessCurve {
    Vector epsilons;   // ascending
    Vector accuracy;   // fraction correctly classified after attack, per epsilon
    std::string dataset_tag;
};

// Accuracy under attack across an ascending epsilon grid. Per sample, the
// attack at each epsilon warm-starts from the previous (smaller-ball)
// adversarial point; a success therefore stays a success at every larger
// epsilon and the curve is nonincreasing by construction. At epsilon = 0 the
// entry is the clean accuracy.
inline RobustnessCurve robustness_curve(const ScoredModel& model, const Dataset& ds,
                                        const Vector& epsilons, AttackConfig cfg,
                                        AttackKind kind = AttackKind::pgd,
                                        std::string tag = "") {
    for (std::size_t k = 1; k < epsilons.size(); ++k) {
        if (epsilons[k] < epsilons[k - 1]) {
            throw std::invalid_argument("robustness_curve: epsilons must be ascending");
        }
    }
    RobustnessCurve curve;
    curve.epsilons = epsilons;
    curve.dataset_tag = std::move(tag);
    std::vector<std::size_t> broken_at(ds.size(), epsilons.size());

    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = ds.point(i);
        const int label = ds.label(i);
        if (model.predict(x) != label) {
            broken_at[i] = 0;  // clean mistake: wrong at every epsilon
            continue;
        }
        if (kind == AttackKind::cw) {
            // minimum-norm attack: one run decides the whole row
            AttackConfig cw_cfg = cfg;
            cw_cfg.seed = cfg.seed + i;
            const AttackResult res = carlini_wagner_l2(model, x, label, cw_cfg);
            if (res.success) {
                for (std::size_t e = 0; e < epsilons.size(); ++e) {
                    if (res.perturbation_norm <= epsilons[e]) {
                        broken_at[i] = e;
                        break;
                    }
                }
            }
            continue;
        }
        Vector start(x.begin(), x.end());
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            if (epsilons[e] == 0.0) continue;
            AttackConfig step_cfg = cfg;
            step_cfg.epsilon = epsilons[e];
            step_cfg.seed = cfg.seed + i;
            AttackResult res;
            switch (kind) {
                case AttackKind::fgsm: res = fgsm(model, x, label, step_cfg); break;
                case AttackKind::pgd:
                default: {
                    // warm start: run from the previous epsilon's iterate too
                    // and keep any success
                    res = pgd(model, x, label, step_cfg);
                    if (!res.success && start != Vector(x.begin(), x.end())) {
                        AttackConfig warm = step_cfg;
                        warm.random_start = false;
                        AttackResult res2 = pgd(model, start, label, warm);
                        // re-project against the true original
                        detail::project_ball(res2.adversarial, res.original, step_cfg.epsilon,
                                             step_cfg.norm);
                        detail::clip_box(res2.adversarial, step_cfg.box_lo, step_cfg.box_hi);
                        if (model.predict(res2.adversarial) != label) {
                            res2.success = true;
                            res2.original = res.original;
                            res = std::move(res2);
                        }
                    }
                    break;
                }
            }
            if (res.success) {
                broken_at[i] = e;
                break;
            }
            if (kind == AttackKind::pgd) start = res.adversarial;
        }
    }

    curve.accuracy.assign(epsilons.size(), 0.0);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        std::size_t ok = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (broken_at[i] > e) ++ok;
        }
        curve.accuracy[e] = static_cast<double>(ok) / static_cast<double>(ds.size());
    }
    return curve;
}

inline void write_curves_csv(const std::string& path, const RobustnessCurve& train,
                             const RobustnessCurve& test) {
    if (train.epsilons != test.epsilons) {
        throw std::invalid_argument("write_curves_csv: epsilon grids differ");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_curves_csv: cannot write " + path);
    out << "epsilon,accuracy_train,accuracy_test\n";
    for (std::size_t k = 0; k < train.epsilons.size(); ++k) {
        out << train.epsilons[k] << ',' << train.accuracy[k] << ',' << test.accuracy[k] << '\n';
    }
}

}  // namespace difftrain
