#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

enum class PairStrategy { exhaustive_shuffled, uniform_random, hard_mining };

// Scores a single point; pairs are ranked by score(x_i) - score(y_j).
using PointScorer = std::function<double(std::span<const double>)>;

// Deterministic stream of opposite-class index pairs (i from the positive
// class, j from the negative class).
//   exhaustive_shuffled: every epoch visits each of the |I|*|J| pairs exactly
//     once, in a fresh seeded order per epoch.
//   uniform_random: independent uniform draws.
//   hard_mining: fixed order by ascending score difference under the supplied
//     scorer, so the hardest (least separated) pair comes first.
class PairStream {
public:
    PairStream(const Dataset& ds, PairStrategy strategy, std::uint64_t seed,
               PointScorer scorer = nullptr)
        : dataset_(&ds), strategy_(strategy), rng_(seed) {
        ds.require_two_class("sample_pairs");
        if (strategy == PairStrategy::hard_mining && !scorer) {
            throw std::invalid_argument("sample_pairs: hard_mining requires a model scorer");
        }
        if (strategy == PairStrategy::exhaustive_shuffled) {
            order_.resize(epoch_size());
            std::iota(order_.begin(), order_.end(), 0);
            rng_.shuffle(order_);
        } else if (strategy == PairStrategy::hard_mining) {
            order_.resize(epoch_size());
            std::iota(order_.begin(), order_.end(), 0);
            std::vector<double> gap(order_.size());
            for (std::size_t k = 0; k < order_.size(); ++k) {
                const auto [i, j] = decode(k);
                gap[k] = scorer(ds.point(i)) - scorer(ds.point(j));
            }
            std::stable_sort(order_.begin(), order_.end(),
                             [&](std::size_t a, std::size_t b) { return gap[a] < gap[b]; });
        }
    }

    std::size_t epoch_size() const {
        return dataset_->positives.size() * dataset_->negatives.size();
    }

    const Dataset& dataset() const { return *dataset_; }

    // Next (i, j) pair of dataset indices.
    std::pair<std::size_t, std::size_t> next() {
        if (strategy_ == PairStrategy::uniform_random) {
            return {dataset_->positives[rng_.index(dataset_->positives.size())],
                    dataset_->negatives[rng_.index(dataset_->negatives.size())]};
        }
        if (cursor_ == order_.size()) {
            cursor_ = 0;
            if (strategy_ == PairStrategy::exhaustive_shuffled) rng_.shuffle(order_);
        }
        return decode(order_[cursor_++]);
    }

    // One full exhaustive epoch worth of pairs (all |I|*|J| of them).
    std::vector<std::pair<std::size_t, std::size_t>> epoch() {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        out.reserve(epoch_size());
        for (std::size_t k = 0; k < epoch_size(); ++k) out.push_back(next());
        return out;
    }

private:
    std::pair<std::size_t, std::size_t> decode(std::size_t flat) const {
        const std::size_t nj = dataset_->negatives.size();
        return {dataset_->positives[flat / nj], dataset_->negatives[flat % nj]};
    }

    const Dataset* dataset_;
    PairStrategy strategy_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

inline PairStream sample_pairs(const Dataset& ds, PairStrategy strategy, std::uint64_t seed,
                               PointScorer scorer = nullptr) {
    return PairStream(ds, strategy, seed, std::move(scorer));
}

}  // namespace difftrain
