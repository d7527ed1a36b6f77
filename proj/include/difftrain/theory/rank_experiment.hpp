#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "difftrain/data/dataset.hpp"
#include "difftrain/linear/logistic.hpp"
#include "difftrain/numerics/eigh.hpp"
#include "difftrain/numerics/spectrum.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

enum class RankInit { zero_w, random_small, tanh_head };

struct RankExperimentConfig {
    RankInit init = RankInit::zero_w;
    double lr = 0.05;
    long iters = 2000;
    long checkpoint_every = 100;
    std::uint64_t seed = 0;
    double init_scale = 1e-2;  // stddev of the small random W entries
};

// Rank history of the feature map phi(x) = W h(x) under gradient descent on
// the two-class logistic loss. h is fixed (identity, or a frozen random tanh
// layer for the tanh_head variant); only W and the readout w train.
struct RankTrace {
    std::vector<long> iterations;
    std::vector<std::size_t> rank_phi;
    std::vector<std::size_t> rank_w;
    std::vector<double> top1_energy;  // sigma_1^2 / sum sigma_k^2 of W
    std::vector<SpectrumReport> spectra;
    double w_direction_cos_min = 1.0;  // min |cosine| between w(t) and w(0)
    bool zero_w_rank_ok = true;        // rank(phi) <= 1 at every checkpoint
    std::string note;

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("RankTrace: cannot write " + path);
        out << "iteration,rank_phi,rank_W,top1_energy\n";
        for (std::size_t k = 0; k < iterations.size(); ++k) {
            out << iterations[k] << ',' << rank_phi[k] << ',' << rank_w[k] << ','
                << nlohmann::json(top1_energy[k]).dump() << '\n';
        }
    }
};

inline nlohmann::json to_json(const RankTrace& t) {
    nlohmann::json spectra = nlohmann::json::array();
    for (const SpectrumReport& s : t.spectra) {
        spectra.push_back({{"eigenvalues", s.eigenvalues},
                           {"cumulative_explained", s.cumulative_explained},
                           {"numerical_rank", s.numerical_rank}});
    }
    return nlohmann::json{{"note", t.note},
                          {"iterations", t.iterations},
                          {"rank_phi", t.rank_phi},
                          {"rank_w", t.rank_w},
                          {"top1_energy", t.top1_energy},
                          {"w_direction_cos_min", t.w_direction_cos_min},
                          {"zero_w_rank_ok", t.zero_w_rank_ok},
                          {"spectra", spectra}};
}

inline RankTrace prop1_rank_experiment(std::size_t head_dim, std::size_t feature_dim,
                                       const Dataset& ds, const RankExperimentConfig& cfg) {
    ds.require_two_class("prop1_rank_experiment");
    const std::size_t d = ds.dim();
    const bool tanh_head = cfg.init == RankInit::tanh_head;
    if (!tanh_head && head_dim != d) {
        throw std::invalid_argument(
            "prop1_rank_experiment: identity head requires head_dim == data dimension");
    }

    Rng rng(cfg.seed);
    Matrix head(head_dim, d);  // frozen
    if (tanh_head) {
        for (std::size_t r = 0; r < head_dim; ++r)
            for (std::size_t c = 0; c < d; ++c) head(r, c) = rng.normal(0.0, 1.0 / std::sqrt(double(d)));
    }

    auto h_of = [&](std::span<const double> x) {
        if (!tanh_head) return Vector(x.begin(), x.end());
        Vector v = head * Vector(x.begin(), x.end());
        for (double& e : v) e = std::tanh(e);
        return v;
    };

    std::vector<Vector> hs(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) hs[i] = h_of(ds.point(i));

    Matrix w_mat(feature_dim, head_dim);
    if (cfg.init != RankInit::zero_w) {
        for (std::size_t r = 0; r < feature_dim; ++r)
            for (std::size_t c = 0; c < head_dim; ++c) w_mat(r, c) = rng.normal(0.0, cfg.init_scale);
    }
    Vector w = rng.normal_vector(feature_dim, 1.0 / std::sqrt(double(feature_dim)));
    const Vector w0 = w;

    RankTrace trace;
    auto checkpoint = [&](long iter) {
        Matrix phi(ds.size(), feature_dim);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Vector f = w_mat * hs[i];
            for (std::size_t c = 0; c < feature_dim; ++c) phi(i, c) = f[c];
        }
        const std::size_t rp = numerical_rank(phi);
        const std::size_t rw = numerical_rank(w_mat);
        trace.iterations.push_back(iter);
        trace.rank_phi.push_back(rp);
        trace.rank_w.push_back(rw);
        const Vector sv = singular_values(w_mat);
        double total = 0.0;
        for (double s : sv) total += s * s;
        trace.top1_energy.push_back(total > 0.0 ? sv.front() * sv.front() / total : 0.0);
        if (ds.size() >= 2) trace.spectra.push_back(pca_spectrum(phi, true));
        if (norm2(w) > 0.0 && norm2(w0) > 0.0) {
            // the span is what matters; a sign flip keeps w parallel to w(0)
            trace.w_direction_cos_min =
                std::min(trace.w_direction_cos_min, std::abs(cosine_similarity(w, w0)));
        }
        if (cfg.init == RankInit::zero_w && rp > 1) trace.zero_w_rank_ok = false;
    };

    checkpoint(0);
    // mean (not summed) logistic loss: the default step size then behaves the
    // same at any dataset size
    const double inv_n = 1.0 / static_cast<double>(ds.size());
    Vector grad_w(feature_dim);
    Matrix grad_mat(feature_dim, head_dim);
    for (long it = 1; it <= cfg.iters; ++it) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        grad_mat = Matrix(feature_dim, head_dim);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const Vector wh = w_mat * hs[i];
            const double score = dot(w, wh);
            const double label = ds.label(i);
            const double coeff = -inv_n * label * sigmoid(-label * score);  // dLoss/dscore
            axpy(coeff, wh, std::span<double>(grad_w));
            for (std::size_t r = 0; r < feature_dim; ++r) {
                axpy(coeff * w[r], hs[i], grad_mat.row(r));
            }
        }
        axpy(-cfg.lr, grad_w, std::span<double>(w));
        for (std::size_t r = 0; r < feature_dim; ++r) {
            axpy(-cfg.lr, grad_mat.row(r), w_mat.row(r));
        }
        bool finite = all_finite(w);
        for (std::size_t r = 0; finite && r < feature_dim; ++r) {
            finite = all_finite(w_mat.row(r));
        }
        if (!finite) {
            trace.note = "diverged at iteration " + std::to_string(it) +
                         "; reduce the learning rate";
            break;
        }
        if (it % cfg.checkpoint_every == 0 || it == cfg.iters) checkpoint(it);
    }
    return trace;
}

// The (n x n) block matrix [[0, v], [v^T, 0]] has exactly one strictly
// positive eigenvalue, ||v||, with eigenvector [v; ||v||]. Returns that pair
// from the eigensolver and verifies the positive-eigenvalue count.
inline std::pair<double, Vector> lemma2_check(const Vector& v) {
    const double vn = norm2(v);
    if (vn == 0.0 || v.empty()) {
        throw std::invalid_argument("lemma2_check: v must be nonzero");
    }
    const std::size_t n = v.size() + 1;
    Matrix m(n, n);
    for (std::size_t i = 0; i < v.size(); ++i) {
        m(i, n - 1) = v[i];
        m(n - 1, i) = v[i];
    }
    const EighResult e = eigh_symmetric(m);
    std::size_t positive = 0;
    for (double lam : e.eigenvalues) {
        if (lam > 1e-10 * vn) ++positive;
    }
    if (positive != 1) {
        throw std::runtime_error("lemma2_check: expected exactly one positive eigenvalue, found " +
                                 std::to_string(positive));
    }
    Vector top(n);
    for (std::size_t r = 0; r < n; ++r) top[r] = e.eigenvectors(r, 0);
    return {e.eigenvalues.front(), std::move(top)};
}

}  // namespace difftrain
