#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

struct GridBounds {
    double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
};

// Axis-aligned bounds of a 2-D dataset, padded on every side (>= 10% of the
// span, so the grid always covers the training points).
inline GridBounds padded_bounds(const Dataset& ds, double padding = 0.1) {
    if (ds.dim() != 2) {
        throw std::invalid_argument("padded_bounds: 2-D datasets only");
    }
    GridBounds b;
    b.x_lo = b.y_lo = std::numeric_limits<double>::infinity();
    b.x_hi = b.y_hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        b.x_lo = std::min(b.x_lo, ds.point(i)[0]);
        b.x_hi = std::max(b.x_hi, ds.point(i)[0]);
        b.y_lo = std::min(b.y_lo, ds.point(i)[1]);
        b.y_hi = std::max(b.y_hi, ds.point(i)[1]);
    }
    const double px = std::max((b.x_hi - b.x_lo) * padding, 1e-6);
    const double py = std::max((b.y_hi - b.y_lo) * padding, 1e-6);
    b.x_lo -= px;
    b.x_hi += px;
    b.y_lo -= py;
    b.y_hi += py;
    return b;
}

// Regular grid of raw scores over a 2-D input box. Predicted class per cell
// is sign(score - threshold).
struct BoundaryGrid {
    GridBounds bounds;
    std::size_t resolution = 0;  // nodes per axis
    double threshold = 0.0;
    Vector scores;  // row-major, y-major: scores[iy * resolution + ix]

    double x_at(std::size_t ix) const {
        return bounds.x_lo + (bounds.x_hi - bounds.x_lo) * ix / double(resolution - 1);
    }
    double y_at(std::size_t iy) const {
        return bounds.y_lo + (bounds.y_hi - bounds.y_lo) * iy / double(resolution - 1);
    }
    double score_at(std::size_t ix, std::size_t iy) const { return scores[iy * resolution + ix]; }
    int sign_at(std::size_t ix, std::size_t iy) const {
        return score_at(ix, iy) >= threshold ? 1 : -1;
    }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("BoundaryGrid: cannot write " + path);
        out << "x,y,score\n";
        for (std::size_t iy = 0; iy < resolution; ++iy) {
            for (std::size_t ix = 0; ix < resolution; ++ix) {
                out << x_at(ix) << ',' << y_at(iy) << ',' << score_at(ix, iy) << '\n';
            }
        }
    }
};

using ScoreFn = std::function<double(std::span<const double>)>;

inline BoundaryGrid boundary_grid(const ScoreFn& score, GridBounds bounds, std::size_t resolution,
                                  double threshold) {
    if (resolution < 2) {
        throw std::invalid_argument("boundary_grid: resolution must be at least 2");
    }
    BoundaryGrid grid;
    grid.bounds = bounds;
    grid.resolution = resolution;
    grid.threshold = threshold;
    grid.scores.resize(resolution * resolution);
    Vector cell(2);
    for (std::size_t iy = 0; iy < resolution; ++iy) {
        for (std::size_t ix = 0; ix < resolution; ++ix) {
            cell[0] = grid.x_at(ix);
            cell[1] = grid.y_at(iy);
            grid.scores[iy * resolution + ix] = score(cell);
        }
    }
    return grid;
}

// Nodes adjacent to a sign change of (score - threshold).
inline std::vector<std::pair<double, double>> boundary_nodes(const BoundaryGrid& g) {
    std::vector<std::pair<double, double>> nodes;
    const std::size_t n = g.resolution;
    for (std::size_t iy = 0; iy < n; ++iy) {
        for (std::size_t ix = 0; ix < n; ++ix) {
            const int s = g.sign_at(ix, iy);
            const bool edge = (ix + 1 < n && g.sign_at(ix + 1, iy) != s) ||
                              (iy + 1 < n && g.sign_at(ix, iy + 1) != s);
            if (edge) nodes.emplace_back(g.x_at(ix), g.y_at(iy));
        }
    }
    return nodes;
}

// Smallest distance from any training point to the sign-change set of the
// grid: the grid-resolution margin of the decision boundary.
inline double min_boundary_distance(const BoundaryGrid& g, const Dataset& ds) {
    const auto nodes = boundary_nodes(g);
    if (nodes.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double px = ds.point(i)[0], py = ds.point(i)[1];
        for (const auto& [nx, ny] : nodes) {
            best = std::min(best, std::hypot(px - nx, py - ny));
        }
    }
    return best;
}

}  // namespace difftrain
