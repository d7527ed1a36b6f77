#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace difftrain {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Constructors reject non-finite entries;
// mutation through operator() is the caller's responsibility.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, Vector entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (entries_.size() != rows_ * cols_) {
            throw std::invalid_argument("Matrix: entry count " + std::to_string(entries_.size()) +
                                        " does not equal rows*cols = " + std::to_string(rows_ * cols_));
        }
        for (double v : entries_) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("Matrix: non-finite entry rejected");
            }
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix from_rows(const std::vector<Vector>& rows) {
        if (rows.empty()) return Matrix();
        const std::size_t cols = rows.front().size();
        Matrix m(rows.size(), cols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != cols) {
                throw std::invalid_argument("Matrix::from_rows: ragged rows");
            }
            for (std::size_t c = 0; c < cols; ++c) {
                if (!std::isfinite(rows[r][c])) {
                    throw std::invalid_argument("Matrix::from_rows: non-finite entry rejected");
                }
                m(r, c) = rows[r][c];
            }
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {entries_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) {
        return {entries_.data() + r * cols_, cols_};
    }

    const Vector& raw() const { return entries_; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    Matrix operator*(const Matrix& other) const {
        if (cols_ != other.rows_) {
            throw std::invalid_argument("Matrix multiply: inner dimensions disagree");
        }
        Matrix out(rows_, other.cols_);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t k = 0; k < cols_; ++k) {
                const double a = (*this)(r, k);
                if (a == 0.0) continue;
                for (std::size_t c = 0; c < other.cols_; ++c) {
                    out(r, c) += a * other(k, c);
                }
            }
        }
        return out;
    }

    Vector operator*(const Vector& v) const {
        if (cols_ != v.size()) {
            throw std::invalid_argument("Matrix-vector multiply: dimension mismatch");
        }
        Vector out(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols_; ++c) s += (*this)(r, c) * v[c];
            out[r] = s;
        }
        return out;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : entries_) s += v * v;
        return std::sqrt(s);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector entries_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: dimension mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> v) {
    return std::sqrt(dot(v, v));
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: dimension mismatch");
    }
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vector& v, double alpha) {
    for (double& x : v) x *= alpha;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("subtract: dimension mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vector add(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("add: dimension mismatch");
    }
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Vector scaled(std::span<const double> a, double alpha) {
    Vector out(a.begin(), a.end());
    for (double& x : out) x *= alpha;
    return out;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        throw std::invalid_argument("cosine_similarity: zero vector");
    }
    return dot(a, b) / (na * nb);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace difftrain
