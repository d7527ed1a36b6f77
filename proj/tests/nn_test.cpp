#include <catch2/catch.hpp>

#include <cmath>

#include "difftrain/data/generators.hpp"
#include "difftrain/linear/train.hpp"
#include "difftrain/nn/boundary.hpp"
#include "difftrain/nn/fit.hpp"
#include "difftrain/nn/loss.hpp"
#include "difftrain/nn/model.hpp"
#include "difftrain/numerics/finite_diff.hpp"
#include "difftrain/numerics/spectrum.hpp"
#include "difftrain/scored_model.hpp"
#include "support/generators.hpp"

using namespace difftrain;

namespace {

// Flatten all trainable parameters into one vector, and back. Test-side only:
// lets finite differences roam the full parameter space.
Vector flatten_params(MlpModel& m) {
    Vector out;
    MlpModel self = m;  // for_each_param pairs two models; pair with a copy
    for_each_param(m, self, [&](std::span<double> p, std::span<double>) {
        out.insert(out.end(), p.begin(), p.end());
    });
    return out;
}

void unflatten_params(MlpModel& m, const Vector& flat) {
    std::size_t off = 0;
    MlpModel self = m;
    for_each_param(m, self, [&](std::span<double> p, std::span<double>) {
        for (std::size_t k = 0; k < p.size(); ++k) p[k] = flat[off + k];
        off += p.size();
    });
    REQUIRE(off == flat.size());
}

// Independent straight-line evaluator for a dense/activation stack; shares
// nothing with the library's forward pass.
double straight_line_score(const MlpModel& m, const Vector& x) {
    Vector h = x;
    for (const Layer& l : m.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            Vector next(d->out_dim(), 0.0);
            for (std::size_t r = 0; r < d->out_dim(); ++r) {
                double s = d->bias[r];
                for (std::size_t c = 0; c < d->in_dim(); ++c) s += d->weight(r, c) * h[c];
                next[r] = s;
            }
            h = next;
        } else if (const auto* a = std::get_if<ActivationLayer>(&l)) {
            for (double& v : h) v = apply_activation(a->kind, v);
        }
    }
    double s = m.has_readout_bias ? m.readout_bias : 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) s += m.readout[k] * h[k];
    return s;
}

MlpModel tiny_net(std::uint64_t seed, Activation act = Activation::tanh, bool bias = false) {
    MlpSpec spec;
    spec.input_dim = 2;
    spec.hidden = {5, 3};
    spec.activation = act;
    spec.readout_bias = bias;
    return build_mlp(spec, seed);
}

}  // namespace

TEST_CASE("forward: identity net passes the first coordinate through") {
    MlpModel m;
    DenseLayer d;
    d.weight = Matrix::identity(2);
    d.bias = {0.0, 0.0};
    m.layers.push_back(d);
    m.layers.push_back(ActivationLayer{Activation::identity});
    m.readout = {1.0, 0.0};
    m.validate();
    const ForwardResult r = forward(m, Vector{3.5, -1.0});
    CHECK(r.score == Approx(3.5));
    CHECK(r.features == Vector{3.5, -1.0});
}

TEST_CASE("forward: relu net with zero input and zero biases scores zero") {
    MlpModel m = tiny_net(3, Activation::relu);
    for (Layer& l : m.layers) {
        if (auto* d = std::get_if<DenseLayer>(&l)) std::fill(d->bias.begin(), d->bias.end(), 0.0);
    }
    CHECK(forward(m, Vector{0.0, 0.0}).score == 0.0);
}

TEST_CASE("forward matches an independent straight-line evaluation") {
    Rng rng(8);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const MlpModel m = tiny_net(seed, Activation::tanh, true);
        for (int probe = 0; probe < 5; ++probe) {
            const Vector x = rng.normal_vector(2);
            CHECK(forward(m, x).score == Approx(straight_line_score(m, x)).margin(1e-12));
        }
    }
    CHECK_THROWS_AS(forward(tiny_net(1), Vector{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("diff_squared at unit gaps has zero loss and zero gradients") {
    // Linear feature net with readout (1, 0): the gap equals the first input
    // coordinate difference, pinned to exactly 1 for every pair.
    MlpModel m;
    DenseLayer d;
    d.weight = Matrix::identity(2);
    d.bias = {0.0, 0.0};
    m.layers.push_back(d);
    m.readout = {1.0, 0.0};
    m.validate();

    Matrix pts(4, 2);
    pts(0, 0) = 2.0;
    pts(0, 1) = 5.0;
    pts(1, 0) = 3.0;
    pts(1, 1) = -1.0;
    pts(2, 0) = 1.0;
    pts(2, 1) = 7.0;
    pts(3, 0) = 2.0;
    pts(3, 1) = 0.5;
    const Dataset ds = Dataset::create(std::move(pts), {1, 1, -1, -1});

    Batch batch;
    batch.pairs = {{0, 2}, {1, 3}};  // gaps: 2-1=1, 3-2=1
    MlpModel grads = zeros_like(m);
    const double loss = loss_and_grads(m, ds, batch, LossKind::diff_squared, grads);
    CHECK(loss == Approx(0.0).margin(1e-15));
    MlpModel self = grads;
    for_each_param(grads, self, [&](std::span<double> g, std::span<double>) {
        for (double v : g) CHECK(v == Approx(0.0).margin(1e-15));
    });
}

TEST_CASE("diff_log at zeroed readout is #pairs * log 2") {
    MlpModel m = tiny_net(5);
    std::fill(m.readout.begin(), m.readout.end(), 0.0);
    const Dataset ds = testing::random_separable(3, 3, 2, 0.4, 12);
    Batch batch;
    for (std::size_t i : ds.positives)
        for (std::size_t j : ds.negatives) batch.pairs.emplace_back(i, j);
    MlpModel grads = zeros_like(m);
    const double loss = loss_and_grads(m, ds, batch, LossKind::diff_log, grads);
    CHECK(loss == Approx(9.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("all three losses match finite differences on random tiny nets") {
    const Dataset ds = testing::random_separable(3, 3, 2, 0.3, 44);
    Batch point_batch;
    for (std::size_t i = 0; i < ds.size(); ++i) point_batch.points.push_back(i);
    Batch pair_batch;
    for (std::size_t i : ds.positives)
        for (std::size_t j : ds.negatives) pair_batch.pairs.emplace_back(i, j);

    for (LossKind kind : {LossKind::bce, LossKind::diff_log, LossKind::diff_squared}) {
        const Batch& batch = (kind == LossKind::bce) ? point_batch : pair_batch;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            MlpModel m = tiny_net(seed * 7 + 1, seed % 2 ? Activation::tanh : Activation::relu,
                                  kind == LossKind::bce);
            // a genuinely random parameter point: jitter every parameter
            // (zero-initialized biases would otherwise park relu units
            // exactly on their kink, where subgradients differ)
            Rng jitter(seed + 1000);
            MlpModel self = m;
            for_each_param(m, self, [&](std::span<double> p, std::span<double>) {
                for (double& v : p) v += jitter.normal(0.0, 0.3);
            });
            const Vector theta0 = flatten_params(m);

            auto loss_at = [&](const Vector& theta) {
                MlpModel probe = m;
                unflatten_params(probe, theta);
                MlpModel sink = zeros_like(probe);
                return loss_and_grads(probe, ds, batch, kind, sink);
            };
            const Vector fd = finite_diff_grad(loss_at, theta0, 1e-5);

            MlpModel grads = zeros_like(m);
            loss_and_grads(m, ds, batch, kind, grads);
            MlpModel gcopy = grads;
            const Vector analytic = flatten_params(gcopy);

            REQUIRE(analytic.size() == fd.size());
            for (std::size_t k = 0; k < fd.size(); ++k) {
                CHECK(analytic[k] == Approx(fd[k]).epsilon(1e-4).margin(1e-6));
            }
        }
    }
}

TEST_CASE("conv layer gradients match finite differences") {
    MlpModel m;
    Conv2dLayer conv;
    conv.in_channels = 1;
    conv.in_h = 4;
    conv.in_w = 4;
    conv.out_channels = 2;
    conv.kernel = 2;
    conv.stride = 2;
    Rng rng(9);
    conv.kernels = rng.normal_vector(2 * 1 * 2 * 2, 0.5);
    conv.bias = rng.normal_vector(2, 0.1);
    m.layers.push_back(conv);
    m.layers.push_back(ActivationLayer{Activation::tanh});
    m.readout = rng.normal_vector(2 * 2 * 2, 0.5);
    m.validate();

    std::vector<Vector> rows;
    for (int i = 0; i < 4; ++i) rows.push_back(rng.normal_vector(16));
    const Dataset ds = Dataset::create(Matrix::from_rows(rows), {1, 1, -1, -1});
    Batch batch;
    batch.pairs = {{0, 2}, {1, 3}};

    MlpModel probe_model = m;
    auto loss_at = [&](const Vector& theta) {
        MlpModel probe = probe_model;
        unflatten_params(probe, theta);
        MlpModel sink = zeros_like(probe);
        return loss_and_grads(probe, ds, batch, LossKind::diff_squared, sink);
    };
    const Vector theta0 = flatten_params(probe_model);
    const Vector fd = finite_diff_grad(loss_at, theta0, 1e-5);
    MlpModel grads = zeros_like(m);
    loss_and_grads(m, ds, batch, LossKind::diff_squared, grads);
    const Vector analytic = flatten_params(grads);
    for (std::size_t k = 0; k < fd.size(); ++k) {
        CHECK(analytic[k] == Approx(fd[k]).epsilon(1e-4).margin(1e-6));
    }
}

TEST_CASE("fit with zero learning rate leaves parameters unchanged") {
    const Dataset ds = testing::random_separable(4, 4, 2, 0.4, 50);
    MlpModel m = tiny_net(2);
    const Vector before = flatten_params(m);
    FitConfig cfg;
    cfg.loss = LossKind::diff_squared;
    cfg.lr = 0.0;
    cfg.iters = 25;
    const FitResult res = fit(m, ds, cfg);
    MlpModel after_model = res.model;
    CHECK(flatten_params(after_model) == before);
}

TEST_CASE("bce on a bias-only linear net matches the linear trainer") {
    // One readout over identity features = a plain linear model.
    Matrix pts(2, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = -1.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1});

    MlpModel m;
    m.readout = {0.0, 0.0};
    m.has_readout_bias = true;
    m.validate();

    FitConfig cfg;
    cfg.loss = LossKind::bce;
    cfg.lr = 0.05;
    cfg.iters = 200;
    const FitResult res = fit(m, ds, cfg);

    GdConfig lin;
    lin.lr = 0.05;
    lin.max_iters = 200;
    const TrainTrace trace = train_cross_entropy(ds, lin);

    REQUIRE(res.history.loss.size() + 1 == trace.loss_curve.size());
    for (std::size_t k = 0; k < res.history.loss.size(); ++k) {
        CHECK(res.history.loss[k] == Approx(trace.loss_curve[k]).margin(1e-12));
    }
    CHECK(res.model.readout[0] == Approx(trace.final_model.w[0]).margin(1e-10));
    CHECK(res.model.readout_bias == Approx(trace.final_model.b).margin(1e-10));
}

TEST_CASE("fit is bit-deterministic under the seed") {
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::ring_vs_cluster, 20, 0.05, 3);
    FitConfig cfg;
    cfg.loss = LossKind::diff_squared;
    cfg.lr = 0.01;
    cfg.iters = 120;
    cfg.batch = 16;
    cfg.seed = 99;
    const FitResult a = fit(build_mlp({2, {8}, Activation::tanh, false}, 1), ds, cfg);
    const FitResult b = fit(build_mlp({2, {8}, Activation::tanh, false}, 1), ds, cfg);
    CHECK(a.history.loss == b.history.loss);
    MlpModel am = a.model, bm = b.model;
    CHECK(flatten_params(am) == flatten_params(bm));
}

TEST_CASE("ring-vs-cluster: differential training reaches full accuracy, linear cannot") {
    const Dataset ds = gen_nonlinear_2d(Nonlinear2dKind::ring_vs_cluster, 30, 0.02, 7);

    // best linear attempt, measured by the repo's own trainer
    GdConfig lin;
    lin.max_iters = 30000;
    const TrainTrace trace = train_cross_entropy(ds, lin);
    CHECK(1.0 - train_error(trace.final_model, ds) < 0.8);

    FitConfig cfg;
    cfg.loss = LossKind::diff_squared;
    cfg.optimizer = OptimizerKind::adam;
    cfg.lr = 0.01;
    cfg.iters = 1500;
    cfg.seed = 11;
    const FitResult res = fit(build_mlp({2, {16}, Activation::tanh, false}, 5), ds, cfg);
    const double th = select_threshold(res.model, ds);
    CHECK(accuracy(res.model, ds, th) == 1.0);
}

TEST_CASE("optimizers: momentum and adam both fit a separable problem") {
    const Dataset ds = testing::random_separable(6, 6, 2, 0.6, 90);
    for (OptimizerKind opt : {OptimizerKind::momentum, OptimizerKind::adam}) {
        FitConfig cfg;
        cfg.loss = LossKind::bce;
        cfg.optimizer = opt;
        cfg.lr = opt == OptimizerKind::adam ? 0.05 : 0.02;
        cfg.iters = 400;
        cfg.seed = 3;
        const FitResult res = fit(build_mlp({2, {8}, Activation::relu, true}, 21), ds, cfg);
        CHECK(accuracy(res.model, ds, 0.0) == 1.0);
        CHECK(res.history.loss.back() < res.history.loss.front());
    }
}

TEST_CASE("penultimate features: identity net returns the inputs") {
    MlpModel m;
    DenseLayer d;
    d.weight = Matrix::identity(2);
    d.bias = {0.0, 0.0};
    m.layers.push_back(d);
    m.readout = {1.0, 1.0};
    m.validate();
    const Dataset ds = testing::random_separable(3, 3, 2, 0.4, 71);
    const Matrix f = penultimate_features(m, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(f(i, 0) == ds.point(i)[0]);
        CHECK(f(i, 1) == ds.point(i)[1]);
    }
}

TEST_CASE("zero feature-head weights pin the feature rank at or below 1") {
    MlpModel m;
    DenseLayer head;
    head.weight = Matrix(4, 2);  // zero W
    head.bias = Vector(4, 0.0);
    m.layers.push_back(head);
    m.readout = {1.0, -0.5, 0.25, 2.0};
    m.validate();
    const Dataset ds = testing::random_separable(5, 5, 2, 0.4, 13);
    CHECK(numerical_rank(penultimate_features(m, ds)) <= 1);
}

TEST_CASE("boundary grid of a linear model changes sign at the axis") {
    Matrix pts(2, 2);
    pts(0, 0) = 1.0;
    pts(1, 0) = -1.0;
    const Dataset ds = Dataset::create(std::move(pts), {1, -1});
    const ScoredModel scored = make_scored(LinearModel{{1.0, 0.0}, 0.0});
    const BoundaryGrid grid = boundary_grid(scored.score, padded_bounds(ds), 41, 0.0);

    for (std::size_t iy = 0; iy < grid.resolution; ++iy) {
        for (std::size_t ix = 0; ix < grid.resolution; ++ix) {
            const double x = grid.x_at(ix);
            CHECK(grid.sign_at(ix, iy) == (x >= 0.0 ? 1 : -1));
        }
    }

    // grid covers all training points
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.point(i)[0] >= grid.bounds.x_lo);
        CHECK(ds.point(i)[0] <= grid.bounds.x_hi);
    }

    // boundary sits within one cell of x = 0
    const double step = (grid.bounds.x_hi - grid.bounds.x_lo) / (grid.resolution - 1);
    for (const auto& [bx, by] : boundary_nodes(grid)) {
        CHECK(std::abs(bx) <= step + 1e-12);
    }
    CHECK(min_boundary_distance(grid, ds) == Approx(1.0).margin(2 * step));
}

TEST_CASE("boundary grid rejects non-2-D models") {
    const Dataset ds3 = testing::random_separable(2, 2, 3, 0.4, 2);
    CHECK_THROWS_AS(padded_bounds(ds3), std::invalid_argument);
}

TEST_CASE("mlp JSON round-trip preserves parameters exactly") {
    const MlpModel m = tiny_net(31, Activation::relu, true);
    const MlpModel back = mlp_from_json(to_json(m));
    MlpModel a = m, b = back;
    CHECK(flatten_params(a) == flatten_params(b));
    const Vector x = {0.3, -0.9};
    CHECK(forward(m, x).score == forward(back, x).score);
}
