#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "difftrain/data/dataset.hpp"
#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Separating hyperplane <w, x> + b = 0.
struct LinearModel {
    Vector w;
    double b = 0.0;

    double score(std::span<const double> x) const { return dot(w, x) + b; }
};

struct BiasChoice {
    double b = 0.0;
    bool feasible = false;
};

// The bias that maximizes the hard margin for a fixed weight direction:
// halfway between the lowest positive projection and the highest negative
// one. Feasible when the resulting boundary puts every point on its side
// (non-strict inequalities).
inline BiasChoice select_bias(const Vector& w, const Dataset& ds) {
    ds.require_two_class("select_bias");
    if (norm2(w) == 0.0) {
        throw std::invalid_argument("select_bias: weight vector must be nonzero");
    }
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (std::size_t i : ds.positives) min_pos = std::min(min_pos, dot(w, ds.point(i)));
    for (std::size_t j : ds.negatives) max_neg = std::max(max_neg, dot(w, ds.point(j)));

    BiasChoice choice;
    choice.b = -0.5 * min_pos - 0.5 * max_neg;
    choice.feasible = (min_pos + choice.b >= 0.0) && (max_neg + choice.b <= 0.0);
    return choice;
}

// min over points of label*(w^T p + b)/||w||. Negative when the model
// misclassifies: the value is then the worst signed violation.
inline double geometric_margin(const LinearModel& model, const Dataset& ds) {
    const double wn = norm2(model.w);
    if (wn == 0.0) {
        throw std::invalid_argument("geometric_margin: ||w|| must be positive");
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        worst = std::min(worst, ds.label(i) * model.score(ds.point(i)) / wn);
    }
    return worst;
}

inline double train_error(const LinearModel& model, const Dataset& ds) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double s = model.score(ds.point(i));
        if ((s >= 0.0 ? 1 : -1) != ds.label(i)) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

inline constexpr int kLinearModelSchemaVersion = 1;

inline nlohmann::json to_json(const LinearModel& m) {
    return nlohmann::json{{"schema_version", kLinearModelSchemaVersion},
                          {"d", m.w.size()},
                          {"w", m.w},
                          {"b", m.b}};
}

inline LinearModel linear_model_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kLinearModelSchemaVersion) {
        throw std::runtime_error("linear model: unsupported schema_version");
    }
    LinearModel m;
    m.w = j.at("w").get<Vector>();
    m.b = j.at("b").get<double>();
    if (m.w.size() != j.at("d").get<std::size_t>()) {
        throw std::runtime_error("linear model: declared dimension disagrees with weight length");
    }
    if (!all_finite(m.w) || !std::isfinite(m.b)) {
        throw std::runtime_error("linear model: non-finite parameters");
    }
    return m;
}

}  // namespace difftrain
