#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/linear/model.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/numerics/spectrum.hpp"

namespace difftrain {

struct SvmSolution {
    Vector w;        // canonically scaled: min active constraint value equals the RHS
    double b = 0.0;  // bias from the fixed-direction rule (0 for the augmented problem)
    double gamma = 0.0;
    Vector duals;    // one multiplier per constraint; near-zero entries clamped to 0
    long iterations = 0;
    double kkt_residual = 0.0;
};

namespace detail {

struct QpResult {
    Vector z;
    Vector alpha;
    long iterations = 0;
    double residual = 0.0;
};

// Minimum-norm hyperplane with margin constraints:
//   minimize ||z||^2  subject to  <z, a_p> >= c  for every row a_p,
// solved by projected gradient ascent on the nonnegativity-constrained dual
// with fixed step 1/lambda_max(G). Dual blow-up without positive primal
// separation flags the instance as not separable.
inline QpResult solve_min_norm_qp(const Matrix& rows, double c, long max_iters = 100000,
                                  double tol = 1e-10) {
    const std::size_t n = rows.rows();
    if (n == 0) {
        throw std::invalid_argument("svm: no constraints");
    }
    Matrix gram(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p; q < n; ++q) {
            const double g = dot(rows.row(p), rows.row(q));
            gram(p, q) = g;
            gram(q, p) = g;
        }
    }
    const double lambda_max = sigma_max_sq(rows);  // = lambda_max of the Gram matrix
    if (lambda_max == 0.0) {
        throw std::runtime_error("svm: input is not separable (all constraint rows are zero)");
    }
    const double step = 0.999 / lambda_max;

    QpResult res;
    res.alpha.assign(n, 0.0);
    Vector galpha(n, 0.0);
    constexpr double kDualBlowup = 1e8;

    for (long it = 1; it <= max_iters; ++it) {
        for (std::size_t p = 0; p < n; ++p) galpha[p] = c - dot(gram.row(p), res.alpha);
        double residual = 0.0;
        double max_alpha = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            const double next = std::max(0.0, res.alpha[p] + step * galpha[p]);
            residual = std::max(residual, std::abs(next - res.alpha[p]) / step);
            res.alpha[p] = next;
            max_alpha = std::max(max_alpha, next);
        }
        res.iterations = it;
        res.residual = residual;
        if (residual <= tol) break;
        if (max_alpha > kDualBlowup) {
            // Check whether the current primal certificate already separates.
            Vector z(rows.cols(), 0.0);
            for (std::size_t p = 0; p < n; ++p) axpy(res.alpha[p], rows.row(p), std::span<double>(z));
            double min_sep = std::numeric_limits<double>::infinity();
            for (std::size_t p = 0; p < n; ++p) min_sep = std::min(min_sep, dot(z, rows.row(p)));
            if (min_sep <= 0.0) {
                throw std::runtime_error("svm: input is not separable");
            }
            break;
        }
    }

    res.z.assign(rows.cols(), 0.0);
    for (std::size_t p = 0; p < n; ++p) axpy(res.alpha[p], rows.row(p), std::span<double>(res.z));
    return res;
}

inline SvmSolution finish_solution(QpResult qp, const Matrix& rows, double c) {
    double min_sep = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < rows.rows(); ++p) min_sep = std::min(min_sep, dot(qp.z, rows.row(p)));
    if (!(min_sep > 0.0)) {
        throw std::runtime_error("svm: input is not separable");
    }
    // Canonical scaling: the tightest constraint sits exactly at the RHS, so
    // 1/||z|| is the certified per-side margin of the returned hyperplane.
    const double factor = c / min_sep;
    scale(qp.z, factor);
    scale(qp.alpha, factor);

    SvmSolution sol;
    sol.w = std::move(qp.z);
    sol.gamma = 1.0 / norm2(sol.w);
    sol.iterations = qp.iterations;
    sol.kkt_residual = qp.residual;
    double max_alpha = 0.0;
    for (double a : qp.alpha) max_alpha = std::max(max_alpha, a);
    for (double& a : qp.alpha) {
        if (a < 1e-7 * (1.0 + max_alpha)) a = 0.0;
    }
    sol.duals = std::move(qp.alpha);
    return sol;
}

}  // namespace detail

// Hard-margin SVM through the pairwise difference formulation:
//   minimize ||w||^2  subject to  <w, x_i - y_j> >= 2  for all i in I, j in J.
// Constraints involve only differences, so the solution and gamma are
// translation invariant; the bias is recovered afterwards from the
// fixed-direction rule. gamma = 1/||w|| is the geometric per-side margin.
inline SvmSolution svm_hard_margin_oracle(const Dataset& ds) {
    ds.require_two_class("svm_hard_margin_oracle");
    const std::size_t ni = ds.positives.size();
    const std::size_t nj = ds.negatives.size();
    Matrix rows(ni * nj, ds.dim());
    std::size_t p = 0;
    for (std::size_t i : ds.positives) {
        for (std::size_t j : ds.negatives) {
            auto xi = ds.point(i);
            auto yj = ds.point(j);
            auto dst = rows.row(p++);
            for (std::size_t col = 0; col < ds.dim(); ++col) dst[col] = xi[col] - yj[col];
        }
    }
    SvmSolution sol = detail::finish_solution(detail::solve_min_norm_qp(rows, 2.0), rows, 2.0);
    sol.b = select_bias(sol.w, ds).b;
    return sol;
}

// Through-origin maximum-margin problem in augmented space:
//   minimize ||z||^2  subject to  <z, [x_i; 1]> >= 1 and <z, [y_j; 1]> <= -1,
// the problem whose direction full-batch cross-entropy descent converges to.
// Returns the first d coordinates as w and the last one as b.
inline SvmSolution svm_augmented(const Dataset& ds) {
    ds.require_two_class("svm_augmented");
    const std::size_t d = ds.dim();
    Matrix rows(ds.size(), d + 1);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double sign = ds.label(i);
        auto src = ds.point(i);
        auto dst = rows.row(i);
        for (std::size_t c = 0; c < d; ++c) dst[c] = sign * src[c];
        dst[d] = sign;
    }
    SvmSolution sol = detail::finish_solution(detail::solve_min_norm_qp(rows, 1.0), rows, 1.0);
    sol.b = sol.w.back();
    sol.w.pop_back();
    return sol;
}

}  // namespace difftrain
