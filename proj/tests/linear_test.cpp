#include <catch2/catch.hpp>

#include <cmath>

#include "difftrain/data/generators.hpp"
#include "difftrain/data/pairs.hpp"
#include "difftrain/linear/logistic.hpp"
#include "difftrain/linear/model.hpp"
#include "difftrain/linear/one_step.hpp"
#include "difftrain/linear/svm.hpp"
#include "difftrain/linear/train.hpp"
#include "difftrain/numerics/finite_diff.hpp"
#include "support/generators.hpp"
#include "support/svm_enumeration.hpp"

using namespace difftrain;

namespace {

Dataset two_points() {
    Matrix pts(2, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = -1.0;
    return Dataset::create(std::move(pts), {1, -1}, "pm-e1");
}

}  // namespace

TEST_CASE("cross-entropy loss at zero is (|I|+|J|) log 2") {
    const Dataset ds = testing::random_separable(3, 4, 3, 0.5, 1);
    const LinearModel zero{Vector(3, 0.0), 0.0};
    const CeEval eval = ce_loss_and_grad(zero, ds);
    CHECK(eval.loss == Approx(7.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("cross-entropy loss vanishes in the separable limit") {
    const Dataset ds = two_points();
    double prev = 1e300;
    for (double t : {1.0, 10.0, 100.0}) {
        const CeEval eval = ce_loss_and_grad({{t, 0.0}, 0.0}, ds);
        CHECK(eval.loss < prev);
        prev = eval.loss;
    }
    CHECK(prev < 1e-40);
}

TEST_CASE("cross-entropy gradient matches finite differences") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset ds = testing::random_separable(3, 3, 4, 0.3, 100 + trial);
        Vector params = rng.normal_vector(5);  // [w; b]
        auto loss_of = [&](const Vector& p) {
            return ce_loss_and_grad({{p.begin(), p.begin() + 4}, p[4]}, ds).loss;
        };
        const Vector fd = finite_diff_grad(loss_of, params);
        const CeEval eval = ce_loss_and_grad({{params.begin(), params.begin() + 4}, params[4]}, ds);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(eval.grad_w[k] == Approx(fd[k]).epsilon(1e-4).margin(1e-6));
        }
        CHECK(eval.grad_b == Approx(fd[4]).epsilon(1e-4).margin(1e-6));
    }
}

TEST_CASE("cross-entropy training on the symmetric pair finds e1 with zero bias") {
    const Dataset ds = two_points();
    GdConfig cfg;
    cfg.max_iters = 20000;
    const TrainTrace trace = train_cross_entropy(ds, cfg);
    const double wn = norm2(trace.final_model.w);
    CHECK(trace.final_model.w[0] / wn == Approx(1.0).margin(1e-6));
    CHECK(std::abs(trace.final_model.b) / wn < 1e-6);
}

TEST_CASE("separable data drives the norm up and the loss towards zero") {
    const Dataset ds = testing::random_separable(4, 4, 3, 0.5, 7);
    GdConfig cfg;
    cfg.max_iters = 5000;
    cfg.snapshot_every = 500;
    const TrainTrace trace = train_cross_entropy(ds, cfg);
    Vector aug = trace.final_model.w;
    aug.push_back(trace.final_model.b);
    CHECK(norm2(aug) > 10.0);
    CHECK(trace.loss_curve.back() < 1e-6);
    CHECK(trace.loss_curve.back() < trace.loss_curve.front());
}

TEST_CASE("fixed-step cross-entropy descent has a nonincreasing loss curve") {
    const Dataset ds = testing::random_separable(5, 5, 3, 0.4, 13);
    GdConfig cfg;
    cfg.lr = 1e-2;
    cfg.max_iters = 2000;
    const TrainTrace trace = train_cross_entropy(ds, cfg);
    for (std::size_t k = 1; k < trace.loss_curve.size(); ++k) {
        CHECK(trace.loss_curve[k] <= trace.loss_curve[k - 1] + 1e-12);
    }
}

TEST_CASE("adaptive descent also keeps the loss curve nonincreasing") {
    const Dataset ds = testing::random_separable(5, 5, 4, 0.3, 17);
    GdConfig cfg;
    cfg.max_iters = 20000;
    const TrainTrace trace = train_cross_entropy(ds, cfg);
    for (std::size_t k = 1; k < trace.loss_curve.size(); ++k) {
        CHECK(trace.loss_curve[k] <=
              trace.loss_curve[k - 1] + 1e-12 * std::max(1.0, trace.loss_curve[k - 1]));
    }
}

TEST_CASE("oversized fixed steps are rejected with a diagnostic") {
    // The first gradient step from zero points along the signed mean, which
    // misclassifies the lone positive here, so a huge step blows the loss up.
    Matrix pts(3, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = 0.9;
    pts(1, 1) = 0.8;
    pts(2, 0) = 0.9;
    pts(2, 1) = -0.8;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1, -1});
    GdConfig cfg;
    cfg.lr = 1e6;
    cfg.max_iters = 500;
    CHECK_THROWS_WITH(train_cross_entropy(ds, cfg), Catch::Contains("learning rate"));
}

TEST_CASE("cross-entropy direction converges to the augmented max-margin solution") {
    for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
        const Dataset ds = testing::random_separable(3, 2, 3, 0.6, seed);
        GdConfig cfg;
        cfg.max_iters = 200000;
        const TrainTrace trace = train_cross_entropy(ds, cfg);
        const SvmSolution oracle = svm_augmented(ds);
        Vector got = trace.final_model.w;
        got.push_back(trace.final_model.b);
        Vector want = oracle.w;
        want.push_back(oracle.b);
        CHECK(cosine_similarity(got, want) >= 0.999);
    }
}

TEST_CASE("differential loss at w=0 is #pairs log 2 and single pair converges to its direction") {
    Matrix pts(2, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = -1.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1});
    PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, 1);
    GdConfig cfg;
    cfg.max_iters = 5000;
    const TrainTrace trace = train_differential_linear(stream, cfg);
    CHECK(trace.loss_curve.front() == Approx(std::log(2.0)).epsilon(1e-12));
    const double wn = norm2(trace.final_model.w);
    CHECK(trace.final_model.w[0] / wn == Approx(1.0).margin(1e-9));
}

TEST_CASE("differential training converges in direction to the hard-margin solution") {
    for (std::uint64_t seed : {5ull, 6ull, 7ull, 8ull}) {
        const Dataset ds = testing::random_separable(5, 4, 4, 0.5, seed);
        PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, seed);
        GdConfig cfg;
        cfg.max_iters = 300000;
        const TrainTrace trace = train_differential_linear(stream, cfg);
        const SvmSolution oracle = svm_hard_margin_oracle(ds);
        CHECK(cosine_similarity(trace.final_model.w, oracle.w) >= 0.999);
    }
}

TEST_CASE("the trace cosine towards the oracle direction trends upwards") {
    const Dataset ds = testing::random_separable(4, 4, 3, 0.5, 31);
    PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, 31);
    GdConfig cfg;
    cfg.max_iters = 100000;
    cfg.snapshot_every = 2000;
    const TrainTrace trace = train_differential_linear(stream, cfg);
    const SvmSolution oracle = svm_hard_margin_oracle(ds);
    double prev = -1.0;
    for (const TraceSnapshot& snap : trace.iterates) {
        if (snap.iteration == 0) continue;
        const double cs = cosine_similarity(snap.direction, oracle.w);
        CHECK(cs >= prev - 1e-6);
        prev = std::max(prev, cs);
    }
    CHECK(prev >= 0.999);
}

TEST_CASE("select_bias implements the midpoint rule and flags feasibility") {
    // projections {3,5} vs {-2,0} -> b = -1.5, feasible
    Matrix pts(4, 1);
    pts(0, 0) = 3.0;
    pts(1, 0) = 5.0;
    pts(2, 0) = -2.0;
    pts(3, 0) = 0.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, 1, -1, -1});
    const BiasChoice ok = select_bias({1.0}, ds);
    CHECK(ok.b == Approx(-1.5));
    CHECK(ok.feasible);

    // overlapping projections {1} vs {2} -> b = -1.5, infeasible
    Matrix bad(2, 1);
    bad(0, 0) = 1.0;
    bad(1, 0) = 2.0;
    const Dataset overlap = Dataset::create(std::move(bad), {1, -1});
    const BiasChoice no = select_bias({1.0}, overlap);
    CHECK(no.b == Approx(-1.5));
    CHECK_FALSE(no.feasible);

    CHECK_THROWS_AS(select_bias({0.0}, ds), std::invalid_argument);
}

TEST_CASE("geometric margin basics") {
    Matrix pts(2, 2);
    pts(0, 0) = 2.0;
    pts(1, 0) = -2.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1});
    const LinearModel m{{1.0, 0.0}, 0.0};
    CHECK(geometric_margin(m, ds) == Approx(2.0));
    const LinearModel scaled{{17.0, 0.0}, 0.0};
    CHECK(geometric_margin(scaled, ds) == Approx(2.0));
    CHECK_THROWS_AS(geometric_margin({{0.0, 0.0}, 1.0}, ds), std::invalid_argument);

    // misclassified point reports the worst violation as a negative margin
    const LinearModel flipped{{-1.0, 0.0}, 0.0};
    CHECK(geometric_margin(flipped, ds) == Approx(-2.0));
}

TEST_CASE("no trained model beats the oracle margin") {
    for (std::uint64_t seed : {41ull, 42ull}) {
        const Dataset ds = testing::random_separable(4, 4, 3, 0.5, seed);
        const SvmSolution oracle = svm_hard_margin_oracle(ds);
        GdConfig cfg;
        cfg.max_iters = 50000;
        const TrainTrace ce = train_cross_entropy(ds, cfg);
        CHECK(geometric_margin(ce.final_model, ds) <= oracle.gamma + 1e-6);

        PairStream stream = sample_pairs(ds, PairStrategy::exhaustive_shuffled, seed);
        TrainTrace diff = train_differential_linear(stream, cfg);
        diff.final_model.b = select_bias(diff.final_model.w, ds).b;
        CHECK(geometric_margin(diff.final_model, ds) <= oracle.gamma + 1e-6);
    }
}

TEST_CASE("svm oracle on the symmetric pair") {
    const Dataset ds = two_points();
    const SvmSolution sol = svm_hard_margin_oracle(ds);
    CHECK(sol.gamma == Approx(1.0).margin(1e-8));
    CHECK(sol.w[0] == Approx(1.0).margin(1e-6));
    CHECK(std::abs(sol.w[1]) < 1e-6);
    CHECK(std::abs(sol.b) < 1e-8);
}

TEST_CASE("svm oracle is translation invariant, bias shifts accordingly") {
    const Dataset ds = testing::random_separable(3, 3, 2, 0.5, 55);
    const SvmSolution base = svm_hard_margin_oracle(ds);
    const Vector v = {3.0, -7.0};
    const SvmSolution moved = svm_hard_margin_oracle(translate(ds, v));
    CHECK(moved.gamma == Approx(base.gamma).margin(1e-9));
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(moved.w[c] == Approx(base.w[c]).margin(1e-8));
    }
    CHECK(moved.b == Approx(base.b - dot(base.w, v)).margin(1e-6));
}

TEST_CASE("svm oracle matches brute-force active-set enumeration") {
    int done = 0;
    for (std::uint64_t seed = 0; done < 20; ++seed) {
        const Dataset ds = testing::random_separable(2, 3, 2, 0.4, 900 + seed);
        if (ds.positives.size() * ds.negatives.size() > 8) continue;
        const SvmSolution pg = svm_hard_margin_oracle(ds);
        const testing::EnumeratedSvm brute = testing::enumerate_hard_margin(ds);
        REQUIRE(brute.separable);
        CHECK(pg.gamma == Approx(brute.gamma).margin(1e-6));
        for (std::size_t c = 0; c < ds.dim(); ++c) {
            CHECK(pg.w[c] == Approx(brute.w[c]).margin(1e-6));
        }
        ++done;
    }
}

TEST_CASE("svm duals satisfy complementary slackness") {
    const Dataset ds = testing::random_separable(3, 3, 2, 0.5, 77);
    const SvmSolution sol = svm_hard_margin_oracle(ds);
    std::size_t p = 0;
    for (std::size_t i : ds.positives) {
        for (std::size_t j : ds.negatives) {
            const double sep = dot(sol.w, subtract(ds.point(i), ds.point(j)));
            if (sol.duals[p] > 0.0) {
                CHECK(sep == Approx(2.0).margin(1e-6));
            }
            ++p;
        }
    }
}

TEST_CASE("svm oracle rejects non-separable input") {
    Matrix pts(4, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = -1.0;
    pts(2, 0) = 1.0;
    pts(3, 0) = -1.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, 1, -1, -1});
    CHECK_THROWS_WITH(svm_hard_margin_oracle(ds), Catch::Contains("not separable"));
}

TEST_CASE("augmented svm on the symmetric pair is e1 with zero bias") {
    const Dataset ds = two_points();
    const SvmSolution sol = svm_augmented(ds);
    CHECK(sol.w[0] == Approx(1.0).margin(1e-6));
    CHECK(std::abs(sol.w[1]) < 1e-6);
    CHECK(std::abs(sol.b) < 1e-6);
}

TEST_CASE("augmented svm output is feasible and matches enumeration on tiny instances") {
    for (std::uint64_t seed : {61ull, 62ull, 63ull}) {
        const Dataset ds = testing::random_separable(2, 2, 2, 0.5, seed);
        const SvmSolution sol = svm_augmented(ds);
        for (std::size_t i : ds.positives) {
            CHECK(dot(sol.w, ds.point(i)) + sol.b >= 1.0 - 1e-8);
        }
        for (std::size_t j : ds.negatives) {
            CHECK(dot(sol.w, ds.point(j)) + sol.b <= 1.0 + 1e-8);
        }

        Matrix rows(ds.size(), ds.dim() + 1);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double sign = ds.label(i);
            for (std::size_t c = 0; c < ds.dim(); ++c) rows(i, c) = sign * ds.point(i)[c];
            rows(i, ds.dim()) = sign;
        }
        const testing::EnumeratedSvm brute = testing::enumerate_min_norm(rows, 1.0);
        REQUIRE(brute.separable);
        Vector z = sol.w;
        z.push_back(sol.b);
        for (std::size_t c = 0; c < z.size(); ++c) {
            CHECK(z[c] == Approx(brute.w[c]).margin(1e-6));
        }
    }
}

TEST_CASE("one-step training on singleton classes is always error free") {
    Matrix pts(2, 3);
    pts(0, 0) = 4.0;
    pts(1, 1) = -2.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1});
    const OneStepReport rep = one_step_sgd_experiment(ds, 3);
    CHECK(rep.train_error == 0.0);
    CHECK(rep.bias_feasible);
}

TEST_CASE("well-separated clusters give zero one-step error for every pair") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Dataset ds = testing::well_separated_clusters(4, 4, 3, 12.0, 1.0, seed);
        const OneStepReport probe = one_step_sgd_experiment(ds, seed);
        REQUIRE(probe.condition_holds);
        CHECK(pairwise_positivity_holds(ds));
        for (std::size_t i : ds.positives) {
            for (std::size_t j : ds.negatives) {
                const OneStepReport rep = one_step_from_pair(ds, i, j);
                CHECK(rep.train_error == 0.0);
                CHECK(rep.bias_feasible);
            }
        }
    }
}

TEST_CASE("one-step report carries both readings of the separation condition") {
    const Dataset ds = testing::well_separated_clusters(3, 3, 2, 20.0, 1.0, 4);
    const OneStepReport rep = one_step_sgd_experiment(ds, 4);
    CHECK(rep.condition_holds);
    CHECK(rep.condition_holds_strict);
    CHECK(rep.gamma > 0.0);
    CHECK(rep.r_x > 0.0);
}

TEST_CASE("linear model JSON round-trips exactly") {
    const LinearModel m{{0.1, -2.5e-17, 3.0}, 1.25};
    const LinearModel back = linear_model_from_json(to_json(m));
    CHECK(back.w == m.w);
    CHECK(back.b == m.b);
}
