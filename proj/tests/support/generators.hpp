#pragma once

// Test-side data generators. Kept independent of the library's solvers so
// they can serve as oracles for them.

#include <cstdint>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/random.hpp"

namespace difftrain::testing {

inline Matrix random_symmetric(std::size_t n, Rng& rng, double scale_v = 1.0) {
    Matrix m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r; c < n; ++c) {
            const double v = rng.normal(0.0, scale_v);
            m(r, c) = v;
            m(c, r) = v;
        }
    }
    return m;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

// Separable by construction: sample points, then push each to its side of a
// random unit hyperplane so the planted margin is at least `margin`. Does not
// consult any solver.
inline Dataset random_separable(std::size_t n_pos, std::size_t n_neg, std::size_t d,
                                double margin, std::uint64_t seed) {
    Rng rng(seed);
    Vector u = rng.normal_vector(d);
    scale(u, 1.0 / norm2(u));
    std::vector<Vector> rows;
    std::vector<int> labels;
    auto make_point = [&](int label) {
        Vector p = rng.normal_vector(d);
        const double proj = dot(p, u);
        // move to  label * <u, p> >= margin + |extra|
        const double want = (margin + std::abs(rng.normal())) * label;
        axpy(want - proj, u, std::span<double>(p));
        rows.push_back(std::move(p));
        labels.push_back(label);
    };
    for (std::size_t i = 0; i < n_pos; ++i) make_point(1);
    for (std::size_t j = 0; j < n_neg; ++j) make_point(-1);
    return Dataset::create(Matrix::from_rows(rows), std::move(labels), "random-separable");
}

// Two tight clusters far apart: satisfies the one-step separation condition
// 2*gamma >= 5*max(R_x, R_y) by a wide margin.
inline Dataset well_separated_clusters(std::size_t n_pos, std::size_t n_neg, std::size_t d,
                                       double center_distance, double cluster_radius,
                                       std::uint64_t seed) {
    Rng rng(seed);
    Vector axis = rng.normal_vector(d);
    scale(axis, 1.0 / norm2(axis));
    std::vector<Vector> rows;
    std::vector<int> labels;
    auto cluster = [&](double center_sign, std::size_t n, int label) {
        for (std::size_t k = 0; k < n; ++k) {
            Vector p = rng.normal_vector(d);
            scale(p, cluster_radius / std::max(norm2(p), 1e-12));
            axpy(center_sign * center_distance / 2.0, axis, std::span<double>(p));
            rows.push_back(std::move(p));
            labels.push_back(label);
        }
    };
    cluster(1.0, n_pos, 1);
    cluster(-1.0, n_neg, -1);
    return Dataset::create(Matrix::from_rows(rows), std::move(labels), "well-separated");
}

}  // namespace difftrain::testing
