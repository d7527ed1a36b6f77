#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Two-class point set. Labels are strictly +1/-1; the index sets of the
// positive and negative class are precomputed at construction. Immutable
// after create().
struct Dataset {
    Matrix points;                        // one row per point
    std::vector<int> labels;              // +1 or -1
    std::string name;
    std::vector<std::size_t> positives;   // indices with label +1
    std::vector<std::size_t> negatives;   // indices with label -1

    static Dataset create(Matrix pts, std::vector<int> labels, std::string name = "") {
        if (pts.rows() != labels.size()) {
            throw std::invalid_argument("Dataset: point/label count mismatch");
        }
        Dataset ds;
        ds.points = std::move(pts);
        ds.labels = std::move(labels);
        ds.name = std::move(name);
        for (std::size_t i = 0; i < ds.labels.size(); ++i) {
            if (ds.labels[i] == 1) {
                ds.positives.push_back(i);
            } else if (ds.labels[i] == -1) {
                ds.negatives.push_back(i);
            } else {
                throw std::invalid_argument("Dataset: label must be +1 or -1, got " +
                                            std::to_string(ds.labels[i]) + " at index " +
                                            std::to_string(i));
            }
        }
        return ds;
    }

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return points.cols(); }
    std::span<const double> point(std::size_t i) const { return points.row(i); }
    int label(std::size_t i) const { return labels[i]; }

    void require_two_class(const char* op) const {
        if (positives.empty() || negatives.empty()) {
            throw std::invalid_argument(std::string(op) + ": both classes must be nonempty");
        }
    }
};

// Shift every point by v; labels are untouched.
inline Dataset translate(const Dataset& ds, const Vector& v) {
    if (v.size() != ds.dim()) {
        throw std::invalid_argument("translate: shift dimension " + std::to_string(v.size()) +
                                    " does not match data dimension " + std::to_string(ds.dim()));
    }
    Matrix pts = ds.points;
    for (std::size_t r = 0; r < pts.rows(); ++r) {
        auto row = pts.row(r);
        for (std::size_t c = 0; c < v.size(); ++c) row[c] += v[c];
    }
    Dataset out = Dataset::create(std::move(pts), ds.labels, ds.name);
    return out;
}

}  // namespace difftrain
