#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>

#include "difftrain/data/dataset.hpp"
#include "difftrain/linear/logistic.hpp"
#include "difftrain/linear/model.hpp"
#include "difftrain/linear/svm.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

struct OneStepReport {
    std::size_t pair_i = 0;  // dataset index of the positive point used
    std::size_t pair_j = 0;  // dataset index of the negative point used
    LinearModel model;
    bool bias_feasible = false;
    double train_error = 0.0;
    double gamma = 0.0;
    double r_x = 0.0;  // positive-class diameter
    double r_y = 0.0;  // negative-class diameter
    bool condition_holds = false;         // 2*gamma >= 5*max(R_x, R_y)
    bool condition_holds_strict = false;  // 2*gamma >  5*max(R_x, R_y)
};

inline double class_diameter(const Dataset& ds, const std::vector<std::size_t>& idx) {
    double r = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            r = std::max(r, norm2(subtract(ds.point(idx[a]), ds.point(idx[b]))));
        }
    }
    return r;
}

// One stochastic step of the pairwise logistic loss from w = 0 for a chosen
// pair: the gradient there is -(x_i - y_j)/2, so a unit step lands on half the
// difference vector. Any positive step size gives the same direction; unit
// step is the documented convention. The bias then comes from the
// fixed-direction rule.
inline OneStepReport one_step_from_pair(const Dataset& ds, std::size_t i, std::size_t j) {
    OneStepReport rep;
    rep.pair_i = i;
    rep.pair_j = j;
    rep.model.w = subtract(ds.point(i), ds.point(j));
    scale(rep.model.w, sigmoid(0.0));
    const BiasChoice bias = select_bias(rep.model.w, ds);
    rep.model.b = bias.b;
    rep.bias_feasible = bias.feasible;
    rep.train_error = train_error(rep.model, ds);
    return rep;
}

// Picks one random opposite-class pair, takes the single stochastic step and
// reports whether the class-separation condition 2*gamma >= 5*max(R_x, R_y)
// held. Both the non-strict and the strict reading of the condition are
// reported. When the condition holds, the single step already classifies the
// whole training set correctly.
inline OneStepReport one_step_sgd_experiment(const Dataset& ds, std::uint64_t seed) {
    ds.require_two_class("one_step_sgd_experiment");
    Rng rng(seed);
    const std::size_t i = ds.positives[rng.index(ds.positives.size())];
    const std::size_t j = ds.negatives[rng.index(ds.negatives.size())];
    OneStepReport rep = one_step_from_pair(ds, i, j);

    const SvmSolution svm = svm_hard_margin_oracle(ds);
    rep.gamma = svm.gamma;
    rep.r_x = class_diameter(ds, ds.positives);
    rep.r_y = class_diameter(ds, ds.negatives);
    const double rhs = 5.0 * std::max(rep.r_x, rep.r_y);
    rep.condition_holds = 2.0 * rep.gamma >= rhs;
    rep.condition_holds_strict = 2.0 * rep.gamma > rhs;
    return rep;
}

// The positivity condition behind the one-step guarantee: every pair
// difference has positive inner product with every other pair difference.
inline bool pairwise_positivity_holds(const Dataset& ds) {
    std::vector<Vector> diffs;
    for (std::size_t i : ds.positives) {
        for (std::size_t j : ds.negatives) {
            diffs.push_back(subtract(ds.point(i), ds.point(j)));
        }
    }
    for (std::size_t a = 0; a < diffs.size(); ++a) {
        for (std::size_t b = 0; b < diffs.size(); ++b) {
            if (dot(diffs[a], diffs[b]) <= 0.0) return false;
        }
    }
    return true;
}

}  // namespace difftrain
