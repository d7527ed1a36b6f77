#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Default central-difference step: balances truncation against round-off for
// doubles. Every analytic gradient in this library is validated against this
// oracle.
inline constexpr double kDefaultFdStep = 1e-5;

inline Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                               const Vector& x, double h = kDefaultFdStep) {
    if (h <= 0.0) {
        throw std::invalid_argument("finite_diff_grad: step h must be positive");
    }
    Vector grad(x.size());
    Vector probe = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
        probe[k] = x[k] + h;
        const double fp = f(probe);
        probe[k] = x[k] - h;
        const double fm = f(probe);
        probe[k] = x[k];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("finite_diff_grad: non-finite function value at coordinate " +
                                     std::to_string(k));
        }
        grad[k] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace difftrain
