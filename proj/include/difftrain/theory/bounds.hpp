#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "difftrain/data/dataset.hpp"
#include "difftrain/data/generators.hpp"
#include "difftrain/linear/model.hpp"
#include "difftrain/linear/svm.hpp"
#include "difftrain/theory/affine_detect.hpp"

namespace difftrain {

// Margin certificates for a trained boundary against the two closed-form
// bounds that hold on affine-constrained data. `scaled_bias` is the bias of
// the trained model after canonical rescaling (min pair separation = 2);
// the bounds read
//   exact-affine:  1 / sqrt(1/gamma^2 + B^2 * sum_k delta_k^2)
//   one-sided:     1 / sqrt(B^2 * sum_k delta_k^2)        (absent when zero)
struct BoundReport {
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double scaled_bias = 0.0;  // B
    double delta_sq_sum = 0.0;
    std::optional<double> theorem1_bound;
    std::optional<double> corollary1_bound;
    double measured_margin = 0.0;
    bool theorem1_holds = false;
    bool corollary1_holds = false;
    std::size_t n_constraints = 0;
};

inline nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j{{"gamma", r.gamma},
                     {"scaled_bias", r.scaled_bias},
                     {"delta_sq_sum", r.delta_sq_sum},
                     {"measured_margin", r.measured_margin},
                     {"theorem1_holds", r.theorem1_holds},
                     {"corollary1_holds", r.corollary1_holds},
                     {"n_constraints", r.n_constraints}};
    j["theorem1_bound"] = r.theorem1_bound ? nlohmann::json(*r.theorem1_bound) : nlohmann::json();
    j["corollary1_bound"] = r.corollary1_bound ? nlohmann::json(*r.corollary1_bound) : nlohmann::json();
    return j;
}

namespace detail {

// Rescale factor making the minimum pair separation equal 2 (the
// normalization under which the bounds are stated).
inline double canonical_scale(const LinearModel& model, const Dataset& ds) {
    double min_sep = std::numeric_limits<double>::infinity();
    for (std::size_t i : ds.positives) {
        for (std::size_t j : ds.negatives) {
            min_sep = std::min(min_sep, dot(model.w, subtract(ds.point(i), ds.point(j))));
        }
    }
    if (!(min_sep > 0.0)) {
        throw std::invalid_argument(
            "bound evaluation: trained model does not separate the classes (min pair separation "
            "<= 0), so the canonical scaling is undefined");
    }
    return 2.0 / min_sep;
}

inline double delta_sq_sum(const AffineSubspaceSpec& spec) {
    double s = 0.0;
    for (double d : spec.offsets) s += d * d;
    return s;
}

}  // namespace detail

// Bound for data lying exactly on an affine subspace (detected at 1e-8).
// holds = measured margin <= bound + 1e-6.
inline BoundReport theorem1_bound(const Dataset& ds, const LinearModel& trained) {
    ds.require_two_class("theorem1_bound");
    const AffineSubspaceSpec spec = detect_affine_subspace(ds, kAffineExactTol);
    if (spec.n_constraints() == 0) {
        throw std::invalid_argument(
            "theorem1_bound: hypothesis failed: data span the full space (no affine constraint "
            "detected at tol 1e-8)");
    }
    SvmSolution svm;
    try {
        svm = svm_hard_margin_oracle(ds);
    } catch (const std::exception&) {
        throw std::invalid_argument("theorem1_bound: hypothesis failed: data are not linearly separable");
    }

    BoundReport rep;
    rep.n_constraints = spec.n_constraints();
    rep.gamma = svm.gamma;
    rep.delta_sq_sum = detail::delta_sq_sum(spec);
    rep.scaled_bias = detail::canonical_scale(trained, ds) * trained.b;
    rep.measured_margin = geometric_margin(trained, ds);

    const double under_root =
        1.0 / (rep.gamma * rep.gamma) + rep.scaled_bias * rep.scaled_bias * rep.delta_sq_sum;
    rep.theorem1_bound = 1.0 / std::sqrt(under_root);
    rep.theorem1_holds = rep.measured_margin <= *rep.theorem1_bound + 1e-6;

    const double cor = rep.scaled_bias * rep.scaled_bias * rep.delta_sq_sum;
    if (cor > 0.0) {
        rep.corollary1_bound = 1.0 / std::sqrt(cor);
        rep.corollary1_holds = rep.measured_margin <= *rep.corollary1_bound + 1e-6;
    } else {
        rep.corollary1_holds = true;  // bound absent = no constraint
    }
    return rep;
}

// Bound for data satisfying the one-sided condition <r_k, x_i> >= delta_k,
// <r_k, y_j> <= delta_k. The subspace description may be supplied (for
// genuinely one-sided data) or detected from exactly-affine data.
inline BoundReport corollary1_bound(const Dataset& ds, const LinearModel& trained,
                                    std::optional<AffineSubspaceSpec> supplied = std::nullopt,
                                    double verify_tol = kAffineExactTol) {
    ds.require_two_class("corollary1_bound");
    const AffineSubspaceSpec spec =
        supplied ? std::move(*supplied) : detect_affine_subspace(ds, kAffineExactTol);
    spec.validate();
    for (std::size_t k = 0; k < spec.n_constraints(); ++k) {
        for (std::size_t i : ds.positives) {
            if (dot(spec.directions.row(k), ds.point(i)) < spec.offsets[k] - verify_tol) {
                throw std::invalid_argument("corollary1_bound: hypothesis violated at point " +
                                            std::to_string(i) + ", constraint " + std::to_string(k) +
                                            " (positive side)");
            }
        }
        for (std::size_t j : ds.negatives) {
            if (dot(spec.directions.row(k), ds.point(j)) > spec.offsets[k] + verify_tol) {
                throw std::invalid_argument("corollary1_bound: hypothesis violated at point " +
                                            std::to_string(j) + ", constraint " + std::to_string(k) +
                                            " (negative side)");
            }
        }
    }

    BoundReport rep;
    rep.n_constraints = spec.n_constraints();
    rep.delta_sq_sum = detail::delta_sq_sum(spec);
    rep.scaled_bias = detail::canonical_scale(trained, ds) * trained.b;
    rep.measured_margin = geometric_margin(trained, ds);

    const double cor = rep.scaled_bias * rep.scaled_bias * rep.delta_sq_sum;
    if (cor > 0.0) {
        rep.corollary1_bound = 1.0 / std::sqrt(cor);
        rep.corollary1_holds = rep.measured_margin <= *rep.corollary1_bound + 1e-6;
    } else {
        rep.corollary1_holds = true;
    }
    return rep;
}

}  // namespace difftrain
