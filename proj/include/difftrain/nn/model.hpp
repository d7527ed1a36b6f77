#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "difftrain/data/dataset.hpp"
#include "difftrain/numerics/matrix.hpp"
#include "difftrain/random.hpp"

namespace difftrain {

enum class Activation { relu, tanh, identity };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        default: return "identity";
    }
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + s);
}

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out

    std::size_t in_dim() const { return weight.cols(); }
    std::size_t out_dim() const { return weight.rows(); }
};

struct ActivationLayer {
    Activation kind = Activation::relu;
};

// Valid (no padding) 2-D convolution over channels-first input.
struct Conv2dLayer {
    std::size_t in_channels = 1, in_h = 0, in_w = 0;
    std::size_t out_channels = 1, kernel = 3, stride = 1;
    Vector kernels;  // [out_c][in_c][kh][kw] flattened
    Vector bias;     // out_c

    std::size_t out_h() const { return (in_h - kernel) / stride + 1; }
    std::size_t out_w() const { return (in_w - kernel) / stride + 1; }
    std::size_t in_dim() const { return in_channels * in_h * in_w; }
    std::size_t out_dim() const { return out_channels * out_h() * out_w(); }
    double& at(std::size_t oc, std::size_t ic, std::size_t kr, std::size_t kc, Vector& v) const {
        return v[((oc * in_channels + ic) * kernel + kr) * kernel + kc];
    }
    double at(std::size_t oc, std::size_t ic, std::size_t kr, std::size_t kc) const {
        return kernels[((oc * in_channels + ic) * kernel + kr) * kernel + kc];
    }
};

using Layer = std::variant<DenseLayer, ActivationLayer, Conv2dLayer>;

// Feedforward classifier: a layer stack producing the penultimate features,
// and one linear readout on top. The readout carries a bias only in
// cross-entropy mode; pair losses work on score differences, where a bias
// cancels, and the decision threshold is chosen after training instead.
struct MlpModel {
    std::vector<Layer> layers;
    Vector readout;
    double readout_bias = 0.0;
    bool has_readout_bias = false;

    std::size_t input_dim() const {
        for (const Layer& l : layers) {
            if (const auto* d = std::get_if<DenseLayer>(&l)) return d->in_dim();
            if (const auto* c = std::get_if<Conv2dLayer>(&l)) return c->in_dim();
        }
        return readout.size();
    }
    std::size_t feature_dim() const { return readout.size(); }

    void validate() const {
        std::size_t dim = input_dim();
        for (const Layer& l : layers) {
            if (const auto* d = std::get_if<DenseLayer>(&l)) {
                if (d->in_dim() != dim) throw std::invalid_argument("MlpModel: dense layer input mismatch");
                if (d->bias.size() != d->out_dim()) throw std::invalid_argument("MlpModel: dense bias size");
                dim = d->out_dim();
            } else if (const auto* c = std::get_if<Conv2dLayer>(&l)) {
                if (c->in_dim() != dim) throw std::invalid_argument("MlpModel: conv layer input mismatch");
                dim = c->out_dim();
            }
        }
        if (dim != readout.size()) {
            throw std::invalid_argument("MlpModel: penultimate dimension " + std::to_string(dim) +
                                        " does not match readout size " + std::to_string(readout.size()));
        }
    }
};

// Fan-in scaled init: variance 2/fan_in into relu layers, 1/fan_in otherwise.
struct MlpSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden;  // dense widths
    Activation activation = Activation::relu;
    bool readout_bias = false;
};

inline MlpModel build_mlp(const MlpSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    MlpModel model;
    std::size_t dim = spec.input_dim;
    const double gain = spec.activation == Activation::relu ? 2.0 : 1.0;
    for (std::size_t width : spec.hidden) {
        DenseLayer layer;
        layer.weight = Matrix(width, dim);
        const double stddev = std::sqrt(gain / static_cast<double>(dim));
        for (std::size_t r = 0; r < width; ++r)
            for (std::size_t c = 0; c < dim; ++c) layer.weight(r, c) = rng.normal(0.0, stddev);
        layer.bias.assign(width, 0.0);
        model.layers.push_back(std::move(layer));
        model.layers.push_back(ActivationLayer{spec.activation});
        dim = width;
    }
    model.readout = rng.normal_vector(dim, std::sqrt(1.0 / static_cast<double>(dim)));
    model.has_readout_bias = spec.readout_bias;
    model.validate();
    return model;
}

inline double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        default: return x;
    }
}

inline double activation_grad(Activation a, double x) {
    switch (a) {
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        default: return 1.0;
    }
}

// Layer inputs cached on the way up; enough to replay the chain backwards.
struct ForwardTrace {
    std::vector<Vector> inputs;  // input to each layer, plus the features at the end
    double score = 0.0;

    const Vector& features() const { return inputs.back(); }
};

inline Vector layer_forward(const Layer& layer, const Vector& x) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        Vector out = d->weight * x;
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += d->bias[r];
        return out;
    }
    if (const auto* a = std::get_if<ActivationLayer>(&layer)) {
        Vector out = x;
        for (double& v : out) v = apply_activation(a->kind, v);
        return out;
    }
    const auto& c = std::get<Conv2dLayer>(layer);
    const std::size_t oh = c.out_h(), ow = c.out_w();
    Vector out(c.out_channels * oh * ow, 0.0);
    for (std::size_t oc = 0; oc < c.out_channels; ++oc) {
        for (std::size_t r = 0; r < oh; ++r) {
            for (std::size_t col = 0; col < ow; ++col) {
                double s = c.bias[oc];
                for (std::size_t ic = 0; ic < c.in_channels; ++ic) {
                    for (std::size_t kr = 0; kr < c.kernel; ++kr) {
                        for (std::size_t kc = 0; kc < c.kernel; ++kc) {
                            const std::size_t ir = r * c.stride + kr;
                            const std::size_t icol = col * c.stride + kc;
                            s += c.at(oc, ic, kr, kc) * x[(ic * c.in_h + ir) * c.in_w + icol];
                        }
                    }
                }
                out[(oc * oh + r) * ow + col] = s;
            }
        }
    }
    return out;
}

inline ForwardTrace forward_trace(const MlpModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("forward: input dimension " + std::to_string(x.size()) +
                                    " does not match model input " + std::to_string(model.input_dim()));
    }
    ForwardTrace trace;
    trace.inputs.reserve(model.layers.size() + 1);
    trace.inputs.emplace_back(x.begin(), x.end());
    for (const Layer& layer : model.layers) {
        trace.inputs.push_back(layer_forward(layer, trace.inputs.back()));
    }
    trace.score = dot(model.readout, trace.inputs.back());
    if (model.has_readout_bias) trace.score += model.readout_bias;
    return trace;
}

struct ForwardResult {
    double score = 0.0;
    Vector features;
};

inline ForwardResult forward(const MlpModel& model, std::span<const double> x) {
    ForwardTrace t = forward_trace(model, x);
    return {t.score, std::move(t.inputs.back())};
}

// One row of penultimate activations per dataset point.
inline Matrix penultimate_features(const MlpModel& model, const Dataset& ds) {
    Matrix out(ds.size(), model.feature_dim());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const ForwardResult r = forward(model, ds.point(i));
        for (std::size_t c = 0; c < r.features.size(); ++c) out(i, c) = r.features[c];
    }
    return out;
}

// ---------------------------------------------------------------------------
// serialization: layer specs plus flat parameter arrays

inline nlohmann::json to_json(const MlpModel& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : m.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            layers.push_back({{"kind", "dense"},
                              {"out", d->out_dim()},
                              {"in", d->in_dim()},
                              {"weight", d->weight.raw()},
                              {"bias", d->bias}});
        } else if (const auto* a = std::get_if<ActivationLayer>(&l)) {
            layers.push_back({{"kind", "activation"}, {"fn", activation_name(a->kind)}});
        } else {
            const auto& c = std::get<Conv2dLayer>(l);
            layers.push_back({{"kind", "conv2d"},
                              {"in_channels", c.in_channels},
                              {"in_h", c.in_h},
                              {"in_w", c.in_w},
                              {"out_channels", c.out_channels},
                              {"kernel", c.kernel},
                              {"stride", c.stride},
                              {"kernels", c.kernels},
                              {"bias", c.bias}});
        }
    }
    return nlohmann::json{{"schema_version", 1},
                          {"layers", layers},
                          {"readout", m.readout},
                          {"readout_bias", m.readout_bias},
                          {"has_readout_bias", m.has_readout_bias}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    MlpModel m;
    for (const auto& l : j.at("layers")) {
        const std::string kind = l.at("kind");
        if (kind == "dense") {
            DenseLayer d;
            d.weight = Matrix(l.at("out"), l.at("in"), l.at("weight").get<Vector>());
            d.bias = l.at("bias").get<Vector>();
            m.layers.push_back(std::move(d));
        } else if (kind == "activation") {
            m.layers.push_back(ActivationLayer{activation_from_name(l.at("fn"))});
        } else if (kind == "conv2d") {
            Conv2dLayer c;
            c.in_channels = l.at("in_channels");
            c.in_h = l.at("in_h");
            c.in_w = l.at("in_w");
            c.out_channels = l.at("out_channels");
            c.kernel = l.at("kernel");
            c.stride = l.at("stride");
            c.kernels = l.at("kernels").get<Vector>();
            c.bias = l.at("bias").get<Vector>();
            m.layers.push_back(std::move(c));
        } else {
            throw std::runtime_error("mlp_from_json: unknown layer kind " + kind);
        }
    }
    m.readout = j.at("readout").get<Vector>();
    m.readout_bias = j.at("readout_bias");
    m.has_readout_bias = j.at("has_readout_bias");
    m.validate();
    return m;
}

}  // namespace difftrain
