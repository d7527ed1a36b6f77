#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "difftrain/numerics/eigh.hpp"
#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Relative singular-value cutoff used everywhere this library asserts a rank.
// 1e-8 sits above the double-precision noise accumulated by long training runs.
inline constexpr double kDefaultRankTol = 1e-8;

struct SpectrumReport {
    Vector eigenvalues;           // nonincreasing, nonnegative
    Vector cumulative_explained;  // fractions in [0,1], nondecreasing, last == 1
    std::size_t numerical_rank = 0;
};

// Singular values by one-sided Jacobi: rotate column pairs until mutually
// orthogonal, then read the column norms. Works on the matrix itself, so
// values near rel_tol * sigma_1 = 1e-8 * sigma_1 stay trustworthy (an
// eigendecomposition of the Gram matrix squares them into round-off).
inline Vector singular_values(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return {};
    Matrix a = (m.cols() <= m.rows()) ? m : m.transposed();
    const std::size_t rows = a.rows();
    const std::size_t n = a.cols();

    auto col_dot = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += a(r, i) * a(r, j);
        return s;
    };

    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double app = col_dot(i, i);
                const double aqq = col_dot(j, j);
                const double apq = col_dot(i, j);
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double ai = a(r, i);
                    const double aj = a(r, j);
                    a(r, i) = c * ai - s * aj;
                    a(r, j) = s * ai + c * aj;
                }
            }
        }
        if (!rotated) break;
    }

    Vector sv(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t r = 0; r < rows; ++r) s += a(r, i) * a(r, i);
        sv[i] = std::sqrt(s);
    }
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

// Largest squared singular value, by power iteration on A^T A. Converges from
// below; callers using it as a smoothness bound should leave slack against
// the factor-2 stability limit of gradient steps.
inline double sigma_max_sq(const Matrix& m) {
    const std::size_t d = m.cols();
    if (m.rows() == 0 || d == 0) return 0.0;
    Vector v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vector av(m.rows(), 0.0);
        for (std::size_t r = 0; r < m.rows(); ++r) av[r] = dot(m.row(r), v);
        Vector atav(d, 0.0);
        for (std::size_t r = 0; r < m.rows(); ++r) axpy(av[r], m.row(r), std::span<double>(atav));
        const double n = norm2(atav);
        if (n == 0.0) return 0.0;
        lambda = n;
        v = atav;
        scale(v, 1.0 / n);
    }
    return lambda;
}

// Count of singular values above rel_tol * sigma_max; 0 for the zero matrix.
inline std::size_t numerical_rank(const Matrix& m, double rel_tol = kDefaultRankTol) {
    if (rel_tol <= 0.0 || rel_tol >= 1.0) {
        throw std::invalid_argument("numerical_rank: rel_tol must lie in (0,1)");
    }
    const Vector sv = singular_values(m);
    if (sv.empty() || sv.front() == 0.0) return 0;
    const double cut = rel_tol * sv.front();
    std::size_t r = 0;
    while (r < sv.size() && sv[r] > cut) ++r;
    return r;
}

// Eigenvalue spectrum of the (optionally mean-centered) sample covariance of
// the rows of `features`, with the cumulative explained-variance curve.
// Zero total variance yields rank 0 and an empty curve.
inline SpectrumReport pca_spectrum(const Matrix& features, bool center = true) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (n < 2) {
        throw std::invalid_argument("pca_spectrum: need at least 2 sample rows");
    }

    Matrix x = features;
    if (center) {
        Vector mean(d, 0.0);
        for (std::size_t r = 0; r < n; ++r) axpy(1.0, x.row(r), std::span<double>(mean));
        for (double& v : mean) v /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            auto row = x.row(r);
            for (std::size_t c = 0; c < d; ++c) row[c] -= mean[c];
        }
    }

    // Covariance denominator: n-1 when centered (sample covariance), n for
    // the raw second-moment matrix. Ratios below are unaffected either way.
    const double denom = center ? static_cast<double>(n - 1) : static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += x(r, i) * x(r, j);
            s /= denom;
            cov(i, j) = s;
            cov(j, i) = s;
        }
    }

    EighResult e = eigh_symmetric(cov);
    SpectrumReport rep;
    rep.eigenvalues = e.eigenvalues;
    for (double& v : rep.eigenvalues) v = std::max(0.0, v);

    double total = 0.0;
    for (double v : rep.eigenvalues) total += v;
    if (total <= 0.0) {
        rep.numerical_rank = 0;
        return rep;
    }

    double run = 0.0;
    rep.cumulative_explained.reserve(rep.eigenvalues.size());
    for (double v : rep.eigenvalues) {
        run += v;
        rep.cumulative_explained.push_back(std::min(1.0, run / total));
    }
    rep.cumulative_explained.back() = 1.0;

    const double cut = kDefaultRankTol * rep.eigenvalues.front();
    std::size_t r = 0;
    while (r < rep.eigenvalues.size() && rep.eigenvalues[r] > cut) ++r;
    rep.numerical_rank = std::min({r, n, d});
    return rep;
}

}  // namespace difftrain
