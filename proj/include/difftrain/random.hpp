#pragma once

#include <cstdint>
#include <random>

#include "difftrain/numerics/matrix.hpp"

namespace difftrain {

// Seeded RNG wrapper. All randomness in the library flows through explicit
// seeds; nothing ever seeds from the wall clock.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean = 0.0, double stddev = 1.0) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    Vector normal_vector(std::size_t n, double stddev = 1.0) {
        Vector v(n);
        for (double& x : v) x = normal(0.0, stddev);
        return v;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        std::shuffle(v.begin(), v.end(), engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace difftrain
