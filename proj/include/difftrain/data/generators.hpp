#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

// Orthonormal directions r_k with fixed offsets: every generated point p
// satisfies <r_k, p> = delta_k, i.e. the data live on an affine subspace.
struct AffineSubspaceSpec {
    std::size_t ambient_dim = 0;
    Matrix directions;   // one row per r_k
    Vector offsets;      // delta_k

    std::size_t n_constraints() const { return directions.rows(); }

    void validate() const {
        if (directions.rows() != offsets.size()) {
            throw std::invalid_argument("AffineSubspaceSpec: direction/offset count mismatch");
        }
        if (directions.rows() > 0 && directions.cols() != ambient_dim) {
            throw std::invalid_argument("AffineSubspaceSpec: direction dimension mismatch");
        }
        for (std::size_t a = 0; a < directions.rows(); ++a) {
            for (std::size_t b = a; b < directions.rows(); ++b) {
                const double g = dot(directions.row(a), directions.row(b));
                const double want = (a == b) ? 1.0 : 0.0;
                if (std::abs(g - want) > 1e-10) {
                    throw std::invalid_argument("AffineSubspaceSpec: directions not orthonormal");
                }
            }
        }
    }
};

namespace detail {

// Orthonormal basis of the complement of the row space of `rows` in R^d,
// by Gram-Schmidt over the standard basis.
inline std::vector<Vector> complement_basis(const Matrix& rows, std::size_t d) {
    std::vector<Vector> basis;
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        basis.emplace_back(rows.row(r).begin(), rows.row(r).end());
    }
    const std::size_t n_constraints = basis.size();
    for (std::size_t e = 0; e < d && basis.size() < d; ++e) {
        Vector cand(d, 0.0);
        cand[e] = 1.0;
        for (const Vector& b : basis) {
            const double proj = dot(std::span<const double>(cand), std::span<const double>(b));
            axpy(-proj, b, std::span<double>(cand));
        }
        const double n = norm2(cand);
        if (n > 1e-8) {
            scale(cand, 1.0 / n);
            basis.push_back(std::move(cand));
        }
    }
    return {basis.begin() + static_cast<std::ptrdiff_t>(n_constraints), basis.end()};
}

}  // namespace detail

// Generates a linearly separable two-class set confined to the affine
// subspace of `spec`. Along one complement direction the positive class sits
// at distance +separation/2 and the negative class at -separation/2 from a
// common center, so the hard margin is exactly separation/2. Spread in the
// remaining complement directions comes in +/- pairs, which keeps that margin
// optimal. `asymmetry` shifts both class centers along the margin direction,
// moving the positive centroid further from the origin than the negative one.
inline Dataset gen_affine_lowrank(const AffineSubspaceSpec& spec, std::size_t n_pos,
                                  std::size_t n_neg, double separation, double asymmetry,
                                  std::uint64_t seed) {
    spec.validate();
    if (n_pos == 0 || n_neg == 0) {
        throw std::invalid_argument("gen_affine_lowrank: both classes need at least one point");
    }
    if (separation <= 0.0) {
        throw std::invalid_argument("gen_affine_lowrank: separation must be positive");
    }
    const std::size_t d = spec.ambient_dim;
    const auto complement = detail::complement_basis(spec.directions, d);
    if (complement.empty()) {
        throw std::invalid_argument("gen_affine_lowrank: constraints leave no room to separate");
    }

    Vector offset_vec(d, 0.0);
    for (std::size_t k = 0; k < spec.n_constraints(); ++k) {
        axpy(spec.offsets[k], spec.directions.row(k), std::span<double>(offset_vec));
    }

    const Vector& margin_dir = complement.front();
    Rng rng(seed);

    auto make_class = [&](std::size_t n, double center_proj, std::vector<Vector>& out) {
        // Spread vectors in the remaining complement directions, emitted in
        // +/- pairs so no tilted hyperplane can beat the planted margin.
        std::vector<Vector> spreads;
        while (spreads.size() < n) {
            Vector s(d, 0.0);
            for (std::size_t l = 1; l < complement.size(); ++l) {
                axpy(rng.uniform(-1.0, 1.0) * separation, complement[l], std::span<double>(s));
            }
            spreads.push_back(s);
            if (spreads.size() < n) {
                Vector neg = s;
                scale(neg, -1.0);
                spreads.push_back(std::move(neg));
            }
        }
        if (n % 2 == 1) {
            std::fill(spreads.back().begin(), spreads.back().end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            Vector p = offset_vec;
            axpy(center_proj, margin_dir, std::span<double>(p));
            axpy(1.0, spreads[i], std::span<double>(p));
            out.push_back(std::move(p));
        }
    };

    std::vector<Vector> rows;
    std::vector<int> labels;
    make_class(n_pos, asymmetry + separation / 2.0, rows);
    labels.insert(labels.end(), n_pos, 1);
    make_class(n_neg, asymmetry - separation / 2.0, rows);
    labels.insert(labels.end(), n_neg, -1);

    return Dataset::create(Matrix::from_rows(rows), std::move(labels), "affine-lowrank");
}

enum class Nonlinear2dKind { two_moons, ring_vs_cluster };

// 2-D sets that no hyperplane separates (at low noise): interleaved half
// moons, or a tight cluster enclosed by a ring.
inline Dataset gen_nonlinear_2d(Nonlinear2dKind kind, std::size_t n_per_class, double noise,
                                std::uint64_t seed) {
    if (noise < 0.0) {
        throw std::invalid_argument("gen_nonlinear_2d: noise must be nonnegative");
    }
    Rng rng(seed);
    std::vector<Vector> rows;
    std::vector<int> labels;
    rows.reserve(2 * n_per_class);

    if (kind == Nonlinear2dKind::ring_vs_cluster) {
        const double cluster_radius = 0.35;
        const double ring_radius = 2.0;
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double rad = cluster_radius * std::sqrt(rng.uniform(0.0, 1.0));
            rows.push_back({rad * std::cos(ang) + rng.normal(0.0, noise),
                            rad * std::sin(ang) + rng.normal(0.0, noise)});
            labels.push_back(1);
        }
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
            rows.push_back({ring_radius * std::cos(ang) + rng.normal(0.0, noise),
                            ring_radius * std::sin(ang) + rng.normal(0.0, noise)});
            labels.push_back(-1);
        }
        return Dataset::create(Matrix::from_rows(rows), std::move(labels), "ring-vs-cluster");
    }

    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double t = std::numbers::pi * rng.uniform(0.0, 1.0);
        rows.push_back({std::cos(t) + rng.normal(0.0, noise),
                        std::sin(t) + rng.normal(0.0, noise)});
        labels.push_back(1);
    }
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double t = std::numbers::pi * rng.uniform(0.0, 1.0);
        rows.push_back({1.0 - std::cos(t) + rng.normal(0.0, noise),
                        0.5 - std::sin(t) + rng.normal(0.0, noise)});
        labels.push_back(-1);
    }
    return Dataset::create(Matrix::from_rows(rows), std::move(labels), "two-moons");
}

}  // namespace difftrain
