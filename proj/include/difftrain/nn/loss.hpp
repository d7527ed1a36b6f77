#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "difftrain/data/dataset.hpp"
#include "difftrain/linear/logistic.hpp"
#include "difftrain/nn/model.hpp"

namespace difftrain {

enum class LossKind { bce, diff_log, diff_squared };

inline const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::bce: return "bce";
        case LossKind::diff_log: return "diff_log";
        default: return "diff_squared";
    }
}

inline LossKind loss_from_name(const std::string& s) {
    if (s == "bce") return LossKind::bce;
    if (s == "diff_log") return LossKind::diff_log;
    if (s == "diff_squared") return LossKind::diff_squared;
    throw std::invalid_argument("unknown loss: " + s);
}

// Gradients are carried in a model-shaped accumulator: same layer layout,
// parameter arrays hold the partial derivatives.
inline MlpModel zeros_like(const MlpModel& m) {
    MlpModel g = m;
    for (Layer& l : g.layers) {
        if (auto* d = std::get_if<DenseLayer>(&l)) {
            d->weight = Matrix(d->weight.rows(), d->weight.cols());
            std::fill(d->bias.begin(), d->bias.end(), 0.0);
        } else if (auto* c = std::get_if<Conv2dLayer>(&l)) {
            std::fill(c->kernels.begin(), c->kernels.end(), 0.0);
            std::fill(c->bias.begin(), c->bias.end(), 0.0);
        }
    }
    std::fill(g.readout.begin(), g.readout.end(), 0.0);
    g.readout_bias = 0.0;
    return g;
}

// Applies fn to every parameter array of the model, pairing it with the
// matching array of `other` (grads, optimizer moments, ...).
template <class F>
inline void for_each_param(MlpModel& m, MlpModel& other, F&& fn) {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (auto* d = std::get_if<DenseLayer>(&m.layers[i])) {
            auto* dg = std::get_if<DenseLayer>(&other.layers[i]);
            fn(std::span<double>(d->weight.row(0).data(), d->weight.rows() * d->weight.cols()),
               std::span<double>(dg->weight.row(0).data(), dg->weight.rows() * dg->weight.cols()));
            fn(std::span<double>(d->bias), std::span<double>(dg->bias));
        } else if (auto* c = std::get_if<Conv2dLayer>(&m.layers[i])) {
            auto* cg = std::get_if<Conv2dLayer>(&other.layers[i]);
            fn(std::span<double>(c->kernels), std::span<double>(cg->kernels));
            fn(std::span<double>(c->bias), std::span<double>(cg->bias));
        }
    }
    fn(std::span<double>(m.readout), std::span<double>(other.readout));
    if (m.has_readout_bias) {
        fn(std::span<double>(&m.readout_bias, 1), std::span<double>(&other.readout_bias, 1));
    }
}

namespace detail {

// Reverse pass for one sample. d_score is dLoss/dscore; parameter gradients
// accumulate into `grads` (model-shaped). When d_input is given, it receives
// dLoss/dx for the attack pathway.
inline void backward(const MlpModel& model, const ForwardTrace& trace, double d_score,
                     MlpModel* grads, Vector* d_input = nullptr) {
    const Vector& features = trace.inputs.back();
    if (grads) {
        axpy(d_score, features, std::span<double>(grads->readout));
        if (model.has_readout_bias) grads->readout_bias += d_score;
    }

    Vector delta = model.readout;
    scale(delta, d_score);

    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const Layer& layer = model.layers[li];
        const Vector& input = trace.inputs[li];
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            DenseLayer* dg = grads ? std::get_if<DenseLayer>(&grads->layers[li]) : nullptr;
            Vector next(input.size(), 0.0);
            for (std::size_t r = 0; r < d->out_dim(); ++r) {
                const double dr = delta[r];
                if (dg) {
                    dg->bias[r] += dr;
                    axpy(dr, input, dg->weight.row(r));
                }
                axpy(dr, d->weight.row(r), std::span<double>(next));
            }
            delta = std::move(next);
        } else if (const auto* a = std::get_if<ActivationLayer>(&layer)) {
            for (std::size_t k = 0; k < delta.size(); ++k) {
                delta[k] *= activation_grad(a->kind, input[k]);
            }
        } else {
            const auto& c = std::get<Conv2dLayer>(layer);
            Conv2dLayer* cg = grads ? std::get_if<Conv2dLayer>(&grads->layers[li]) : nullptr;
            Vector next(input.size(), 0.0);
            const std::size_t oh = c.out_h(), ow = c.out_w();
            for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
                for (std::size_t r = 0; r < oh; ++r) {
                    for (std::size_t col = 0; col < ow; ++col) {
                        const double dv = delta[(oc * oh + r) * ow + col];
                        if (dv == 0.0) continue;
                        if (cg) cg->bias[oc] += dv;
                        for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
                            for (std::size_t kr = 0; kr < c.kernel; ++kr) {
                                for (std::size_t kc = 0; kc < c.kernel; ++kc) {
                                    const std::size_t idx =
                                        (ic * c.in_h + r * c.stride + kr) * c.in_w + col * c.stride + kc;
                                    if (cg) cg->at(oc, ic, kr, kc, cg->kernels) += dv * input[idx];
                                    next[idx] += dv * c.at(oc, ic, kr, kc);
                                }
                            }
                        }
                    }
                }
            }
            delta = std::move(next);
        }
    }
    if (d_input) *d_input = std::move(delta);
}

}  // namespace detail

// Points for bce, opposite-class pairs for the differential losses.
struct Batch {
    std::vector<std::size_t> points;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Loss summed over the batch, with gradients for every parameter accumulated
// into `grads`. Pair losses run both branches through the same parameters
// (the two feature maps share weights), so each pair contributes twice to the
// accumulator with opposite score signs:
//   diff_log:     sum log(1 + e^{-(s(x_i) - s(y_j))})
//   diff_squared: sum (s(x_i) - s(y_j) - 1)^2
inline double loss_and_grads(const MlpModel& model, const Dataset& ds, const Batch& batch,
                             LossKind kind, MlpModel& grads) {
    double loss = 0.0;
    if (kind == LossKind::bce) {
        if (batch.points.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
        for (std::size_t idx : batch.points) {
            const ForwardTrace trace = forward_trace(model, ds.point(idx));
            const double label = ds.label(idx);
            loss += softplus(-label * trace.score);
            detail::backward(model, trace, -label * sigmoid(-label * trace.score), &grads);
        }
        return loss;
    }
    if (batch.pairs.empty()) throw std::invalid_argument("loss_and_grads: empty pair batch");
    for (const auto& [i, j] : batch.pairs) {
        const ForwardTrace ti = forward_trace(model, ds.point(i));
        const ForwardTrace tj = forward_trace(model, ds.point(j));
        const double gap = ti.score - tj.score;
        double d_gap;
        if (kind == LossKind::diff_log) {
            loss += softplus(-gap);
            d_gap = -sigmoid(-gap);
        } else {
            loss += (gap - 1.0) * (gap - 1.0);
            d_gap = 2.0 * (gap - 1.0);
        }
        detail::backward(model, ti, d_gap, &grads);
        detail::backward(model, tj, -d_gap, &grads);
    }
    return loss;
}

struct ScoreGrad {
    double score = 0.0;
    Vector input_grad;
};

// d(score)/dx: the input-space gradient the attacks follow.
inline ScoreGrad score_and_input_grad(const MlpModel& model, std::span<const double> x) {
    const ForwardTrace trace = forward_trace(model, x);
    ScoreGrad out;
    out.score = trace.score;
    detail::backward(model, trace, 1.0, nullptr, &out.input_grad);
    return out;
}

}  // namespace difftrain
