#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

struct EighResult {
    Vector eigenvalues;    // sorted descending
    Matrix eigenvectors;   // column k pairs with eigenvalues[k]
};

// Symmetric eigendecomposition by cyclic Jacobi rotations. Accurate and
// dependency-free at the matrix sizes this library works with (a few hundred
// rows at most). Input must be square and symmetric to 1e-10 relative.
inline EighResult eigh_symmetric(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n) {
        throw std::invalid_argument("eigh_symmetric: matrix must be square and nonempty");
    }
    double max_abs = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) max_abs = std::max(max_abs, std::abs(m(r, c)));
    const double sym_tol = 1e-10 * std::max(1.0, max_abs);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r + 1; c < n; ++c) {
            if (std::abs(m(r, c) - m(c, r)) > sym_tol) {
                throw std::invalid_argument("eigh_symmetric: matrix is not symmetric at (" +
                                            std::to_string(r) + "," + std::to_string(c) + ")");
            }
        }
    }

    Matrix a = m;
    Matrix v = Matrix::identity(n);

    auto offdiag_sq = [&]() {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = r + 1; c < n; ++c) s += a(r, c) * a(r, c);
        return s;
    };

    const double frob = std::max(m.frobenius_norm(), 1e-300);
    const double stop = 1e-26 * frob * frob;
    const int max_sweeps = 60;

    for (int sweep = 0; sweep < max_sweeps && offdiag_sq() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    Vector eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return eig[i] > eig[j]; });

    EighResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = Matrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        res.eigenvalues[k] = eig[order[k]];
        for (std::size_t r = 0; r < n; ++r) res.eigenvectors(r, k) = v(r, order[k]);
    }
    return res;
}

}  // namespace difftrain
