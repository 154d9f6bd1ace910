#pragma once
// Node featurization: frozen text embedding + learned type embedding +
// learned time-gap MLP, concatenated and projected to the hidden dimension.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wakegraph/embedder.hpp"
#include "wakegraph/graph.hpp"
#include "wakegraph/tensor.hpp"

namespace wakegraph {

struct FeatureConfig {
    int text_dim = kTextDim;  // 768
    int type_dim = 32;
    int dt_dim = 32;
    int hidden_dim = 256;
    int input_dim() const { return text_dim + type_dim + dt_dim; }  // 832
};

// exact erf-form GELU
template <typename Real>
Real gelu(Real x) {
    return Real(0.5) * x * (Real(1) + std::erf(x * Real(0.7071067811865476)));
}
template <typename Real>
Real gelu_grad(Real x) {
    const Real phi = std::exp(Real(-0.5) * x * x) * Real(0.3989422804014327);  // 1/sqrt(2*pi)
    const Real Phi = Real(0.5) * (Real(1) + std::erf(x * Real(0.7071067811865476)));
    return Phi + x * phi;
}

template <typename Real>
struct FeatureParams {
    Tensor<Real> type_embedding;  // [n_types, type_dim]
    Tensor<Real> dt_w1, dt_b1;    // [dt_dim, 1], [dt_dim]
    Tensor<Real> dt_w2, dt_b2;    // [dt_dim, dt_dim], [dt_dim]
    Tensor<Real> proj_w, proj_b;  // [hidden, input_dim], [hidden]

    void init(const FeatureConfig& cfg, int n_types, std::uint64_t seed) {
        const auto h = static_cast<std::size_t>(cfg.hidden_dim);
        const auto d = static_cast<std::size_t>(cfg.dt_dim);
        type_embedding = Tensor<Real>("type_embedding",
                                      {static_cast<std::size_t>(n_types),
                                       static_cast<std::size_t>(cfg.type_dim)});
        dt_w1 = Tensor<Real>("dt_mlp.fc1.weight", {d, 1});
        dt_b1 = Tensor<Real>("dt_mlp.fc1.bias", {d});
        dt_w2 = Tensor<Real>("dt_mlp.fc2.weight", {d, d});
        dt_b2 = Tensor<Real>("dt_mlp.fc2.bias", {d});
        proj_w = Tensor<Real>("input_projection.weight",
                              {h, static_cast<std::size_t>(cfg.input_dim())});
        proj_b = Tensor<Real>("input_projection.bias", {h});
        init_gaussian(type_embedding, 0.02, seed);
        init_uniform_fan_in(dt_w1, 1, seed);
        init_uniform_fan_in(dt_b1, 1, seed);
        init_uniform_fan_in(dt_w2, d, seed);
        init_uniform_fan_in(dt_b2, d, seed);
        init_uniform_fan_in(proj_w, static_cast<std::size_t>(cfg.input_dim()), seed);
        init_uniform_fan_in(proj_b, static_cast<std::size_t>(cfg.input_dim()), seed);
    }
};

// dt path for one event node: fc2(GELU(fc1(log1p_dt)))
template <typename Real>
std::vector<Real> dt_embed(const FeatureParams<Real>& p, Real log1p_dt) {
    const std::size_t d = p.dt_b1.size();
    std::vector<Real> h(d), out(d);
    for (std::size_t i = 0; i < d; ++i)
        h[i] = gelu(p.dt_w1.data[i] * log1p_dt + p.dt_b1.data[i]);
    for (std::size_t i = 0; i < d; ++i) {
        Real acc = p.dt_b2.data[i];
        for (std::size_t j = 0; j < d; ++j) acc += p.dt_w2.data[i * d + j] * h[j];
        out[i] = acc;
    }
    return out;
}

// Single-node featurization: concat(text_emb, type_emb[type], dt_emb) then
// the affine projection. The dt component is the dt MLP for event nodes and
// identically zero for entity nodes.
template <typename Real>
std::vector<Real> featurize(const GraphNode& node, const TextEmbedder& embedder,
                            const FeatureConfig& cfg, const FeatureParams<Real>& p) {
    std::vector<Real> x(static_cast<std::size_t>(cfg.input_dim()), Real(0));
    auto text = embedder.embed(node_feature_text(node));
    for (int i = 0; i < cfg.text_dim; ++i) x[i] = static_cast<Real>(text[i]);
    const int type_row = static_cast<int>(node.type);
    for (int i = 0; i < cfg.type_dim; ++i)
        x[cfg.text_dim + i] = p.type_embedding.data[type_row * cfg.type_dim + i];
    if (node.is_event()) {
        auto dt = dt_embed(p, static_cast<Real>(std::log1p(node.dt_seconds)));
        for (int i = 0; i < cfg.dt_dim; ++i) x[cfg.text_dim + cfg.type_dim + i] = dt[i];
    }
    std::vector<Real> out(static_cast<std::size_t>(cfg.hidden_dim));
    for (int r = 0; r < cfg.hidden_dim; ++r) {
        Real acc = p.proj_b.data[r];
        const Real* w = &p.proj_w.data[static_cast<std::size_t>(r) * cfg.input_dim()];
        for (int c = 0; c < cfg.input_dim(); ++c) acc += w[c] * x[c];
        out[r] = acc;
    }
    return out;
}

}  // namespace wakegraph
