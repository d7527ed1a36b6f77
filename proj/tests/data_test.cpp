#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "difftrain/data/cifar10.hpp"
#include "difftrain/data/dataset.hpp"
#include "difftrain/data/generators.hpp"
#include "difftrain/data/pairs.hpp"
#include "difftrain/linear/svm.hpp"

using namespace difftrain;

namespace {

AffineSubspaceSpec one_direction_spec(std::size_t d, Vector r, double delta) {
    AffineSubspaceSpec spec;
    spec.ambient_dim = d;
    spec.directions = Matrix::from_rows({std::move(r)});
    spec.offsets = {delta};
    return spec;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / "difftrain_data_test";
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("affine generator pins the constrained coordinate exactly") {
    const auto spec = one_direction_spec(2, {0.0, 1.0}, 10.0);
    const Dataset ds = gen_affine_lowrank(spec, 2, 2, 2.0, 0.0, 42);
    REQUIRE(ds.size() == 4);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.point(i)[1] == 10.0);  // exact, not approximate
    }
}

TEST_CASE("affine generator with zero offsets stays in a linear subspace") {
    AffineSubspaceSpec spec;
    spec.ambient_dim = 4;
    spec.directions = Matrix::from_rows({{1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}});
    spec.offsets = {0.0, 0.0};
    const Dataset ds = gen_affine_lowrank(spec, 3, 3, 1.0, 0.5, 7);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t k = 0; k < spec.n_constraints(); ++k) {
            CHECK(std::abs(dot(spec.directions.row(k), ds.point(i))) <= 1e-12);
        }
    }
}

TEST_CASE("affine constraints hold to machine precision in general position") {
    AffineSubspaceSpec spec;
    spec.ambient_dim = 6;
    const double s = 1.0 / std::sqrt(2.0);
    spec.directions = Matrix::from_rows({{s, s, 0.0, 0.0, 0.0, 0.0}, {0.0, 0.0, s, -s, 0.0, 0.0}});
    spec.offsets = {3.0, -1.5};
    const Dataset ds = gen_affine_lowrank(spec, 5, 4, 1.0, 2.0, 99);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t k = 0; k < spec.n_constraints(); ++k) {
            CHECK(std::abs(dot(spec.directions.row(k), ds.point(i)) - spec.offsets[k]) <= 1e-12);
        }
    }
}

TEST_CASE("affine generator's hard margin equals separation/2") {
    const auto spec = one_direction_spec(5, {0.0, 0.0, 0.0, 0.0, 1.0}, 4.0);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Dataset ds = gen_affine_lowrank(spec, 4, 3, 3.0, 1.0, seed);
        const SvmSolution svm = svm_hard_margin_oracle(ds);
        CHECK(svm.gamma == Approx(1.5).margin(1e-6));
    }
}

TEST_CASE("affine generator rejects empty classes and is deterministic") {
    const auto spec = one_direction_spec(3, {0.0, 0.0, 1.0}, 1.0);
    CHECK_THROWS_AS(gen_affine_lowrank(spec, 0, 2, 1.0, 0.0, 1), std::invalid_argument);
    const Dataset a = gen_affine_lowrank(spec, 3, 3, 1.0, 0.5, 5);
    const Dataset b = gen_affine_lowrank(spec, 3, 3, 1.0, 0.5, 5);
    CHECK(a.points.raw() == b.points.raw());
}

TEST_CASE("ring-vs-cluster at zero noise keeps the cluster strictly inside the ring") {
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::ring_vs_cluster, 40, 0.0, 11);
    double max_cluster = 0.0, min_ring = 1e9;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double r = norm2(ds.point(i));
        if (ds.label(i) == 1) {
            max_cluster = std::max(max_cluster, r);
        } else {
            min_ring = std::min(min_ring, r);
        }
    }
    CHECK(max_cluster < min_ring);
}

TEST_CASE("2-D generators are deterministic under the seed") {
    for (auto kind : {Nonlinear2dKind::ring_vs_cluster, Nonlinear2dKind::two_moons}) {
        const Dataset a = gen_nonlinear_2d(kind, 25, 0.05, 123);
        const Dataset b = gen_nonlinear_2d(kind, 25, 0.05, 123);
        CHECK(a.points.raw() == b.points.raw());
        CHECK(a.labels == b.labels);
    }
}

TEST_CASE("cifar loader round-trips synthesized records exactly") {
    TempDir tmp;
    const auto file = (tmp.path / "batch.bin").string();
    std::vector<std::pair<std::uint8_t, std::vector<std::uint8_t>>> records;
    for (int r = 0; r < 5; ++r) {
        std::vector<std::uint8_t> px(kCifarPixels);
        for (std::size_t i = 0; i < px.size(); ++i) {
            px[i] = static_cast<std::uint8_t>((i * 7 + r * 31) % 256);
        }
        records.emplace_back(static_cast<std::uint8_t>(r % 3), std::move(px));
    }
    write_cifar10_file(file, records);
    CHECK(std::filesystem::file_size(file) == 5 * kCifarRecordBytes);

    const Dataset ds = load_cifar10_pair({file}, 0, 2, false);
    // labels 0,1,2,0,1 -> keeps records 0, 2, 3
    REQUIRE(ds.size() == 3);
    CHECK(ds.label(0) == 1);
    CHECK(ds.label(1) == -1);
    CHECK(ds.label(2) == 1);
    for (std::size_t c = 0; c < kCifarPixels; ++c) {
        CHECK(ds.point(0)[c] == static_cast<double>(records[0].second[c]));
        CHECK(ds.point(1)[c] == static_cast<double>(records[2].second[c]));
    }

    const Dataset norm = load_cifar10_pair({file}, 0, 2, true);
    CHECK(norm.point(0)[10] == Approx(records[0].second[10] / 255.0));
}

TEST_CASE("cifar loader rejects malformed inputs") {
    TempDir tmp;
    const auto truncated = (tmp.path / "broken.bin").string();
    {
        std::ofstream out(truncated, std::ios::binary);
        std::vector<char> junk(kCifarRecordBytes + 17, 1);
        out.write(junk.data(), static_cast<std::streamsize>(junk.size()));
    }
    CHECK_THROWS_WITH(load_cifar10_pair({truncated}, 0, 1), Catch::Contains("broken.bin"));

    const auto oneclass = (tmp.path / "oneclass.bin").string();
    write_cifar10_file(oneclass, {{3, std::vector<std::uint8_t>(kCifarPixels, 9)}});
    CHECK_THROWS_AS(load_cifar10_pair({oneclass}, 3, 4), std::runtime_error);
    CHECK_THROWS_AS(load_cifar10_pair({(tmp.path / "missing.bin").string()}, 0, 1),
                    std::runtime_error);
}

TEST_CASE("translate shifts points, keeps labels, and preserves differences") {
    const auto spec = one_direction_spec(3, {0.0, 0.0, 1.0}, 2.0);
    const Dataset ds = gen_affine_lowrank(spec, 3, 2, 1.0, 0.3, 21);

    const Dataset same = translate(ds, {0.0, 0.0, 0.0});
    CHECK(same.points.raw() == ds.points.raw());

    const Vector v = {0.5, -1.25, 4.0};
    const Dataset moved = translate(ds, v);
    CHECK(moved.labels == ds.labels);
    for (std::size_t i : ds.positives) {
        for (std::size_t j : ds.negatives) {
            const Vector before = subtract(ds.point(i), ds.point(j));
            const Vector after = subtract(moved.point(i), moved.point(j));
            for (std::size_t c = 0; c < before.size(); ++c) {
                CHECK(std::abs(before[c] - after[c]) <= 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(translate(ds, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("svm margin is translation invariant") {
    const auto spec = one_direction_spec(4, {0.0, 1.0, 0.0, 0.0}, 1.0);
    const Dataset ds = gen_affine_lowrank(spec, 3, 3, 2.0, 1.0, 33);
    const double before = svm_hard_margin_oracle(ds).gamma;
    const double after = svm_hard_margin_oracle(translate(ds, {10.0, -3.0, 2.0, 0.5})).gamma;
    CHECK(after == Approx(before).margin(1e-9));
}

TEST_CASE("exhaustive pair stream visits each pair exactly once per epoch") {
    Matrix pts(5, 1);
    for (std::size_t i = 0; i < 5; ++i) pts(i, 0) = static_cast<double>(i);
    const Dataset ds = Dataset::create(std::move(pts), {1, 1, -1, -1, -1});

    PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, 9);
    REQUIRE(stream.epoch_size() == 6);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t k = 0; k < 6; ++k) seen.insert(stream.next());
    CHECK(seen.size() == 6);
    for (const auto& [i, j] : seen) {
        CHECK(ds.label(i) == 1);
        CHECK(ds.label(j) == -1);
    }

    // second epoch is again a permutation of all pairs
    std::set<std::pair<std::size_t, std::size_t>> second;
    for (std::size_t k = 0; k < 6; ++k) second.insert(stream.next());
    CHECK(second == seen);
}

TEST_CASE("pair streams are deterministic under the seed") {
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::two_moons, 6, 0.1, 3);
    for (auto strategy : {PairStrategy::exhaustive_shuffled, PairStrategy::uniform_random}) {
        PairStream a = sample_pairs(ds, strategy, 77);
        PairStream b = sample_pairs(ds, strategy, 77);
        for (int k = 0; k < 50; ++k) CHECK(a.next() == b.next());
    }
}

TEST_CASE("hard mining ranks the least separated pair first") {
    Rng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix pts(7, 3);
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t c = 0; c < 3; ++c) pts(r, c) = rng.normal();
        const Dataset ds = Dataset::create(std::move(pts), {1, 1, 1, -1, -1, -1, -1});
        const Vector w = rng.normal_vector(3);
        auto scorer = [w](std::span<const double> p) { return dot(w, p); };

        // brute force over all pair score gaps
        double best_gap = 1e300;
        std::pair<std::size_t, std::size_t> best{0, 0};
        for (std::size_t i : ds.positives) {
            for (std::size_t j : ds.negatives) {
                const double gap = dot(w, ds.point(i)) - dot(w, ds.point(j));
                if (gap < best_gap) {
                    best_gap = gap;
                    best = {i, j};
                }
            }
        }

        PairStream stream = sample_pairs(ds, PairStrategy::hard_mining, 0, scorer);
        CHECK(stream.next() == best);
    }

    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::two_moons, 4, 0.1, 1);
    CHECK_THROWS_AS(sample_pairs(ds, PairStrategy::hard_mining, 0), std::invalid_argument);
}
