#pragma once

#include <functional>
#include <memory>
#include <span>

#include "difftrain/linear/model.hpp"
#include "difftrain/nn/loss.hpp"
#include "difftrain/nn/model.hpp"
#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Uniform attack/evaluation surface over any trained classifier: a raw score,
// its input gradient, and the decision threshold (prediction = +1 iff
// score >= threshold). Carrying the threshold here keeps attacks correct for
// differentially trained nets, whose threshold is chosen after training.
struct ScoredModel {
    std::function<double(std::span<const double>)> score;
    std::function<Vector(std::span<const double>)> input_grad;
    double threshold = 0.0;

    int predict(std::span<const double> x) const { return score(x) >= threshold ? 1 : -1; }
    double margin(std::span<const double> x) const { return score(x) - threshold; }
};

inline ScoredModel make_scored(const LinearModel& m) {
    auto model = std::make_shared<LinearModel>(m);
    ScoredModel s;
    s.score = [model](std::span<const double> x) { return model->score(x); };
    s.input_grad = [model](std::span<const double>) { return model->w; };
    s.threshold = 0.0;
    return s;
}

inline ScoredModel make_scored(const MlpModel& m, double threshold = 0.0) {
    auto model = std::make_shared<MlpModel>(m);
    ScoredModel s;
    s.score = [model](std::span<const double> x) { return forward(*model, x).score; };
    s.input_grad = [model](std::span<const double> x) {
        return score_and_input_grad(*model, x).input_grad;
    };
    s.threshold = threshold;
    return s;
}

}  // namespace difftrain
