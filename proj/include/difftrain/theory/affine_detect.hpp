#pragma once

#include <cmath>
#include <stdexcept>

#include "difftrain/data/dataset.hpp"
#include "difftrain/data/generators.hpp"
#include "difftrain/numerics/eigh.hpp"

namespace difftrain {

// Exact-affine detection tolerance ("the data lie on the subspace") and the
// looser advisory threshold for "nearly affine" warnings.
inline constexpr double kAffineExactTol = 1e-8;
inline constexpr double kAffineNearTol = 1e-3;

// Recovers the orthonormal directions along which every point shares one
// projection: eigenvectors of the centered covariance whose projection spread
// stays within tol. Empty spec when the data span the full space.
inline AffineSubspaceSpec detect_affine_subspace(const Dataset& ds, double tol = kAffineExactTol) {
    if (ds.size() < 2) {
        throw std::invalid_argument("detect_affine_subspace: need at least 2 points");
    }
    const std::size_t n = ds.size();
    const std::size_t d = ds.dim();

    Vector mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) axpy(1.0, ds.point(i), std::span<double>(mean));
    for (double& v : mean) v /= static_cast<double>(n);

    Matrix cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = ds.point(i);
        for (std::size_t a = 0; a < d; ++a) {
            const double da = p[a] - mean[a];
            for (std::size_t b = a; b < d; ++b) {
                cov(a, b) += da * (p[b] - mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) /= static_cast<double>(n);
            cov(b, a) = cov(a, b);
        }

    const EighResult e = eigh_symmetric(cov);

    AffineSubspaceSpec spec;
    spec.ambient_dim = d;
    std::vector<Vector> directions;
    Vector offsets;
    // Walk eigenvectors from the smallest variance up; keep those along which
    // every point projects to the same value within tol.
    for (std::size_t k = d; k-- > 0;) {
        Vector r(d);
        for (std::size_t c = 0; c < d; ++c) r[c] = e.eigenvectors(c, k);
        const double delta = dot(r, mean);
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            spread = std::max(spread, std::abs(dot(r, ds.point(i)) - delta));
        }
        if (spread <= tol) {
            directions.push_back(std::move(r));
            offsets.push_back(delta);
        }
    }
    spec.directions = directions.empty() ? Matrix(0, d) : Matrix::from_rows(directions);
    spec.offsets = std::move(offsets);
    return spec;
}

}  // namespace difftrain
