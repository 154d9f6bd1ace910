#pragma once
// Shared backbone and heads: input projection, three relation-aware
// attention layers with residual + LayerNorm blocks, Jumping-Knowledge
// concatenation, trigger/routing MLP heads, the joint masked loss, and
// hand-derived exact reverse-mode gradients for every trainable tensor.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wakegraph/featurizer.hpp"
#include "wakegraph/graph.hpp"
#include "wakegraph/tensor.hpp"

namespace wakegraph {

struct ModelConfig {
    int text_dim = kTextDim;  // 768
    int type_dim = 32;
    int dt_dim = 32;
    int hidden_dim = 256;
    int attn_heads = 4;
    int gnn_layers = 3;
    int n_node_types = kNumNodeTypes;
    int n_edge_channels = kNumEdgeChannels;
    int rel_dim = 32;
    int head_hidden = 256;
    double dropout = 0.2;
    double leaky_slope = 0.2;
    double ln_eps = 1e-5;

    int input_dim() const { return text_dim + type_dim + dt_dim; }
    int head_dim() const { return hidden_dim / attn_heads; }
    int jk_dim() const { return hidden_dim * (gnn_layers + 1); }

    FeatureConfig feature_config() const {
        return FeatureConfig{text_dim, type_dim, dt_dim, hidden_dim};
    }

    void validate() const {
        if (hidden_dim % attn_heads != 0)
            throw std::runtime_error("model config: hidden_dim must be divisible by attn_heads");
    }
};

struct LossConfig {
    double trigger_pos_weight = 0.15;  // w+ applied to the positive trigger term
    double lambda_trigger = 0.3;
    double lambda_routing = 1.0;
};

template <typename Real>
struct AttentionLayerParams {
    Tensor<Real> src_w, src_b;  // [hidden, hidden]
    Tensor<Real> dst_w, dst_b;
    Tensor<Real> attn;          // [heads, head_dim]
    Tensor<Real> edge_w, edge_b;  // [hidden, rel_dim]
    Tensor<Real> ln_scale, ln_shift;

    void init(const ModelConfig& cfg, int layer_index, std::uint64_t seed) {
        const auto h = static_cast<std::size_t>(cfg.hidden_dim);
        const std::string prefix = "gnn." + std::to_string(layer_index) + ".";
        src_w = Tensor<Real>(prefix + "src.weight", {h, h});
        src_b = Tensor<Real>(prefix + "src.bias", {h});
        dst_w = Tensor<Real>(prefix + "dst.weight", {h, h});
        dst_b = Tensor<Real>(prefix + "dst.bias", {h});
        attn = Tensor<Real>(prefix + "attn",
                            {static_cast<std::size_t>(cfg.attn_heads),
                             static_cast<std::size_t>(cfg.head_dim())});
        edge_w = Tensor<Real>(prefix + "edge.weight", {h, static_cast<std::size_t>(cfg.rel_dim)});
        edge_b = Tensor<Real>(prefix + "edge.bias", {h});
        ln_scale = Tensor<Real>(prefix + "norm.scale", {h});
        ln_shift = Tensor<Real>(prefix + "norm.shift", {h});
        init_uniform_fan_in(src_w, h, seed);
        init_uniform_fan_in(src_b, h, seed);
        init_uniform_fan_in(dst_w, h, seed);
        init_uniform_fan_in(dst_b, h, seed);
        init_uniform_fan_in(attn, static_cast<std::size_t>(cfg.head_dim()), seed);
        init_uniform_fan_in(edge_w, static_cast<std::size_t>(cfg.rel_dim), seed);
        init_uniform_fan_in(edge_b, static_cast<std::size_t>(cfg.rel_dim), seed);
        std::fill(ln_scale.data.begin(), ln_scale.data.end(), Real(1));
        std::fill(ln_shift.data.begin(), ln_shift.data.end(), Real(0));
    }
};

template <typename Real>
struct HeadParams {
    Tensor<Real> fc1_w, fc1_b;  // [head_hidden, jk_dim]
    Tensor<Real> fc2_w, fc2_b;  // [1, head_hidden]

    void init(const ModelConfig& cfg, const std::string& name, std::uint64_t seed) {
        const auto jk = static_cast<std::size_t>(cfg.jk_dim());
        const auto hh = static_cast<std::size_t>(cfg.head_hidden);
        fc1_w = Tensor<Real>(name + ".fc1.weight", {hh, jk});
        fc1_b = Tensor<Real>(name + ".fc1.bias", {hh});
        fc2_w = Tensor<Real>(name + ".fc2.weight", {1, hh});
        fc2_b = Tensor<Real>(name + ".fc2.bias", {1});
        init_uniform_fan_in(fc1_w, jk, seed);
        init_uniform_fan_in(fc1_b, jk, seed);
        init_uniform_fan_in(fc2_w, hh, seed);
        init_uniform_fan_in(fc2_b, hh, seed);
    }
};

template <typename Real>
struct ModelParams {
    ModelConfig cfg;
    std::uint64_t init_seed = 0;
    FeatureParams<Real> feat;
    Tensor<Real> relation_embedding;  // [n_channels, rel_dim], shared across layers
    std::vector<AttentionLayerParams<Real>> layers;
    HeadParams<Real> trigger_head, routing_head;

    void init(const ModelConfig& config, std::uint64_t seed) {
        config.validate();
        cfg = config;
        init_seed = seed;
        feat.init(cfg.feature_config(), cfg.n_node_types, seed);
        relation_embedding = Tensor<Real>("relation_embedding",
                                          {static_cast<std::size_t>(cfg.n_edge_channels),
                                           static_cast<std::size_t>(cfg.rel_dim)});
        init_gaussian(relation_embedding, 0.02, seed);
        layers.clear();
        for (int l = 0; l < cfg.gnn_layers; ++l) {
            layers.emplace_back();
            layers.back().init(cfg, l + 1, seed);
        }
        trigger_head.init(cfg, "trigger_head", seed);
        routing_head.init(cfg, "routing_head", seed);
    }

    // Canonical tensor order; the checkpoint manifest and the optimizer
    // follow it.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn(feat.proj_w);
        fn(feat.proj_b);
        fn(feat.type_embedding);
        fn(feat.dt_w1);
        fn(feat.dt_b1);
        fn(feat.dt_w2);
        fn(feat.dt_b2);
        fn(relation_embedding);
        for (auto& l : layers) {
            fn(l.src_w);
            fn(l.src_b);
            fn(l.dst_w);
            fn(l.dst_b);
            fn(l.attn);
            fn(l.edge_w);
            fn(l.edge_b);
            fn(l.ln_scale);
            fn(l.ln_shift);
        }
        fn(trigger_head.fc1_w);
        fn(trigger_head.fc1_b);
        fn(trigger_head.fc2_w);
        fn(trigger_head.fc2_b);
        fn(routing_head.fc1_w);
        fn(routing_head.fc1_b);
        fn(routing_head.fc2_w);
        fn(routing_head.fc2_b);
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<ModelParams*>(this)->for_each_tensor(
            [&](auto& t) { fn(static_cast<const Tensor<Real>&>(t)); });
    }

    void zero_grad() {
        for_each_tensor([](Tensor<Real>& t) { t.zero_grad(); });
    }

    std::size_t count_parameters() const {
        std::size_t n = 0;
        for_each_tensor([&](const Tensor<Real>& t) { n += t.size(); });
        return n;
    }
};

// ---------------------------------------------------------------------------
// Network input assembled from a session graph.

template <typename Real>
struct NetInput {
    struct Edge {
        int src, dst, channel;
    };
    int n_nodes = 0;
    MatR<Real> text;               // [N, text_dim], frozen
    std::vector<int> type_id;      // N
    std::vector<Real> log_dt;      // N, log(1 + dt_seconds)
    std::vector<std::uint8_t> is_event;
    std::vector<Edge> edges;
    std::vector<int> event_nodes;   // node index per event ordinal
    std::vector<int> entity_nodes;  // node indices in node order
    std::vector<Label> trigger_label;  // per node
    std::vector<Label> routing_label;  // per node
    // incoming-edge CSR (grouped by target node, edge-list order preserved)
    std::vector<int> in_offsets;  // N+1
    std::vector<int> in_edges;    // edge indices

    void build_incoming_index() {
        in_offsets.assign(static_cast<std::size_t>(n_nodes) + 1, 0);
        for (const auto& e : edges) ++in_offsets[static_cast<std::size_t>(e.dst) + 1];
        for (int i = 0; i < n_nodes; ++i) in_offsets[i + 1] += in_offsets[i];
        in_edges.resize(edges.size());
        std::vector<int> cursor(in_offsets.begin(), in_offsets.end() - 1);
        for (std::size_t k = 0; k < edges.size(); ++k)
            in_edges[static_cast<std::size_t>(cursor[edges[k].dst]++)] = static_cast<int>(k);
    }
};

template <typename Real>
NetInput<Real> make_net_input(const SessionGraph& g, const TextEmbedder& embedder,
                              const ModelConfig& cfg) {
    NetInput<Real> in;
    in.n_nodes = static_cast<int>(g.nodes.size());
    in.text.resize(in.n_nodes, cfg.text_dim);
    in.type_id.resize(g.nodes.size());
    in.log_dt.resize(g.nodes.size());
    in.is_event.resize(g.nodes.size());
    in.trigger_label.assign(g.nodes.size(), Label::Unlabeled);
    in.routing_label.assign(g.nodes.size(), Label::Unlabeled);
    in.event_nodes.assign(static_cast<std::size_t>(g.n_events), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        auto vec = embedder.embed(node_feature_text(n));
        if (static_cast<int>(vec.size()) != cfg.text_dim)
            throw std::runtime_error("embedder dim mismatch");
        for (int d = 0; d < cfg.text_dim; ++d) in.text(static_cast<int>(i), d) = Real(vec[d]);
        in.type_id[i] = static_cast<int>(n.type);
        in.log_dt[i] = static_cast<Real>(std::log1p(n.dt_seconds));
        in.is_event[i] = n.is_event() ? 1 : 0;
        in.trigger_label[i] = n.trigger_label;
        in.routing_label[i] = n.routing_label;
        if (n.is_event())
            in.event_nodes.at(static_cast<std::size_t>(n.event_index)) = static_cast<int>(i);
        else
            in.entity_nodes.push_back(static_cast<int>(i));
    }
    in.edges.reserve(g.edges.size());
    for (const auto& e : g.edges) in.edges.push_back({e.src, e.dst, static_cast<int>(e.channel)});
    in.build_incoming_index();
    return in;
}

// ---------------------------------------------------------------------------
// Dropout: counter-based masks keyed by (seed, step, tag), indexed by
// (node, column) so batch composition does not perturb other sessions.

struct DropoutPlan {
    bool enabled = false;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t node_offset = 0;  // union-batch offset of this session's first node

    std::uint64_t key(std::string_view tag) const {
        return derive_key(derive_key(seed, tag), "step", step);
    }
};

template <typename Real>
void fill_dropout_mask(MatR<Real>& mask, const DropoutPlan& plan, std::string_view tag,
                       double p, int n_rows, int n_cols) {
    mask.resize(n_rows, n_cols);
    if (!plan.enabled || p <= 0) {
        mask.setOnes();
        return;
    }
    CounterRng rng(plan.key(tag));
    const Real keep_scale = Real(1.0 / (1.0 - p));
    for (int r = 0; r < n_rows; ++r) {
        const std::uint64_t base =
            (plan.node_offset + static_cast<std::uint64_t>(r)) * static_cast<std::uint64_t>(n_cols);
        for (int c = 0; c < n_cols; ++c)
            mask(r, c) = rng.uniform(base + static_cast<std::uint64_t>(c)) < p ? Real(0) : keep_scale;
    }
}

// ---------------------------------------------------------------------------
// Forward trace: every intermediate the backward pass consumes.

template <typename Real>
struct LayerTrace {
    MatR<Real> gs, gt;      // [N, hidden] transformed source / target states
    MatR<Real> ge;          // [channels, hidden] transformed relation embeddings
    MatR<Real> v;           // [E, hidden] LeakyReLU(gs_j + gt_i + ge_c)
    MatR<Real> alpha;       // [E, heads]
    MatR<Real> attn_out;    // [N, hidden]
    MatR<Real> gelu_out;    // [N, hidden]
    MatR<Real> drop_mask;   // [N, hidden]
    MatR<Real> pre_ln;      // [N, hidden]
    VecR<Real> inv_std;     // [N]
    MatR<Real> x_hat;       // [N, hidden] normalized (pre scale/shift)
    MatR<Real> h_out;       // [N, hidden]
};

template <typename Real>
struct HeadTrace {
    std::vector<int> rows;  // node indices this head reads
    MatR<Real> z1_pre, z1_act, drop_mask;  // [M, head_hidden]
    VecR<Real> logits;                     // [M]
};

template <typename Real>
struct ForwardTrace {
    MatR<Real> x_concat;                    // [N, input_dim]
    MatR<Real> dt_pre, dt_act;              // [N, dt_dim] fc1 pre/post GELU (event rows)
    MatR<Real> h0;                          // [N, hidden]
    std::vector<LayerTrace<Real>> layers;
    MatR<Real> jk;                          // [N, jk_dim]
    HeadTrace<Real> trig, rout;
};

namespace detail {

template <typename Real>
void head_mlp_forward(const HeadParams<Real>& hp, const MatR<Real>& jk,
                      const std::vector<int>& rows, const ModelConfig& cfg,
                      const DropoutPlan& drop, std::string_view tag, HeadTrace<Real>& out) {
    const int m = static_cast<int>(rows.size());
    out.rows = rows;
    out.z1_pre.resize(m, cfg.head_hidden);
    out.z1_act.resize(m, cfg.head_hidden);
    out.logits.resize(m);
    if (m == 0) {
        out.drop_mask.resize(0, cfg.head_hidden);
        return;
    }
    MatR<Real> x(m, cfg.jk_dim());
    for (int r = 0; r < m; ++r) x.row(r) = jk.row(rows[r]);
    out.z1_pre.noalias() = x * hp.fc1_w.mat().transpose();
    out.z1_pre.rowwise() += hp.fc1_b.vec().transpose();
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < cfg.head_hidden; ++c) out.z1_act(r, c) = gelu(out.z1_pre(r, c));
    fill_dropout_mask(out.drop_mask, drop, tag, cfg.dropout, m, cfg.head_hidden);
    MatR<Real> dropped = out.z1_act.cwiseProduct(out.drop_mask);
    out.logits.noalias() = dropped * hp.fc2_w.mat().transpose();
    out.logits.array() += hp.fc2_b.data[0];
}

}  // namespace detail

// One attention block: GATv2-style relation-aware attention, then
// GELU -> dropout -> residual -> LayerNorm.
template <typename Real>
void layer_forward(const AttentionLayerParams<Real>& lp, const Tensor<Real>& rel,
                   const NetInput<Real>& in, const MatR<Real>& h, const ModelConfig& cfg,
                   const DropoutPlan& drop, std::string_view tag, LayerTrace<Real>& tr) {
    const int n = in.n_nodes;
    const int E = static_cast<int>(in.edges.size());
    const int heads = cfg.attn_heads, hd = cfg.head_dim();

    tr.gs.noalias() = h * lp.src_w.mat().transpose();
    tr.gs.rowwise() += lp.src_b.vec().transpose();
    tr.gt.noalias() = h * lp.dst_w.mat().transpose();
    tr.gt.rowwise() += lp.dst_b.vec().transpose();
    tr.ge.noalias() = rel.mat() * lp.edge_w.mat().transpose();
    tr.ge.rowwise() += lp.edge_b.vec().transpose();

    const Real slope = Real(cfg.leaky_slope);
    tr.v.resize(E, cfg.hidden_dim);
    MatR<Real> score(E, heads);
    for (int e = 0; e < E; ++e) {
        const auto& ed = in.edges[e];
        for (int c = 0; c < cfg.hidden_dim; ++c) {
            Real u = tr.gs(ed.src, c) + tr.gt(ed.dst, c) + tr.ge(ed.channel, c);
            tr.v(e, c) = u > Real(0) ? u : slope * u;
        }
        for (int hh = 0; hh < heads; ++hh) {
            Real s = Real(0);
            const Real* a = &lp.attn.data[static_cast<std::size_t>(hh) * hd];
            const Real* vrow = tr.v.row(e).data() + hh * hd;
            for (int k = 0; k < hd; ++k) s += a[k] * vrow[k];
            score(e, hh) = s;
        }
    }

    // per-target softmax over incoming edges, per head
    tr.alpha.resize(E, heads);
    for (int i = 0; i < n; ++i) {
        const int b = in.in_offsets[i], e2 = in.in_offsets[i + 1];
        if (b == e2)
            throw std::runtime_error("layer_forward: node " + std::to_string(i) +
                                     " has no incoming edge");
        for (int hh = 0; hh < heads; ++hh) {
            Real mx = score(in.in_edges[b], hh);
            for (int k = b + 1; k < e2; ++k) mx = std::max(mx, score(in.in_edges[k], hh));
            Real denom = Real(0);
            for (int k = b; k < e2; ++k) {
                Real ex = std::exp(score(in.in_edges[k], hh) - mx);
                tr.alpha(in.in_edges[k], hh) = ex;
                denom += ex;
            }
            for (int k = b; k < e2; ++k) tr.alpha(in.in_edges[k], hh) /= denom;
        }
    }

    // messages: transformed source state + transformed edge feature,
    // head-sliced and attention-weighted
    tr.attn_out.setZero(n, cfg.hidden_dim);
    for (int e = 0; e < E; ++e) {
        const auto& ed = in.edges[e];
        for (int hh = 0; hh < heads; ++hh) {
            const Real a = tr.alpha(e, hh);
            Real* out = tr.attn_out.row(ed.dst).data() + hh * hd;
            const Real* gsrow = tr.gs.row(ed.src).data() + hh * hd;
            const Real* gerow = tr.ge.row(ed.channel).data() + hh * hd;
            for (int k = 0; k < hd; ++k) out[k] += a * (gsrow[k] + gerow[k]);
        }
    }

    tr.gelu_out.resize(n, cfg.hidden_dim);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cfg.hidden_dim; ++c) tr.gelu_out(i, c) = gelu(tr.attn_out(i, c));
    fill_dropout_mask(tr.drop_mask, drop, tag, cfg.dropout, n, cfg.hidden_dim);
    tr.pre_ln = h + tr.gelu_out.cwiseProduct(tr.drop_mask);

    // LayerNorm
    tr.inv_std.resize(n);
    tr.x_hat.resize(n, cfg.hidden_dim);
    tr.h_out.resize(n, cfg.hidden_dim);
    const Real inv_dim = Real(1) / Real(cfg.hidden_dim);
    for (int i = 0; i < n; ++i) {
        Real mean = tr.pre_ln.row(i).sum() * inv_dim;
        Real var = Real(0);
        for (int c = 0; c < cfg.hidden_dim; ++c) {
            Real d = tr.pre_ln(i, c) - mean;
            var += d * d;
        }
        var *= inv_dim;
        Real istd = Real(1) / std::sqrt(var + Real(cfg.ln_eps));
        tr.inv_std(i) = istd;
        for (int c = 0; c < cfg.hidden_dim; ++c) {
            Real xh = (tr.pre_ln(i, c) - mean) * istd;
            tr.x_hat(i, c) = xh;
            tr.h_out(i, c) = xh * lp.ln_scale.data[c] + lp.ln_shift.data[c];
        }
    }
}

// Backbone body: featurization, input projection, attention stack, JK
// concat. train-mode dropout only when `drop.enabled`.
template <typename Real>
ForwardTrace<Real> body_forward(const ModelParams<Real>& params, const NetInput<Real>& in,
                                const DropoutPlan& drop) {
    const ModelConfig& cfg = params.cfg;
    const int n = in.n_nodes;
    if (n == 0) throw std::runtime_error("body_forward: empty graph");
    ForwardTrace<Real> tr;

    // assemble concat features: [text | type_emb | dt_emb]
    tr.x_concat.resize(n, cfg.input_dim());
    tr.dt_pre.setZero(n, cfg.dt_dim);
    tr.dt_act.setZero(n, cfg.dt_dim);
    const auto& fp = params.feat;
    for (int i = 0; i < n; ++i) {
        tr.x_concat.row(i).segment(0, cfg.text_dim) = in.text.row(i);
        const int trow = in.type_id[i];
        for (int c = 0; c < cfg.type_dim; ++c)
            tr.x_concat(i, cfg.text_dim + c) = fp.type_embedding.data[trow * cfg.type_dim + c];
        if (in.is_event[i]) {
            for (int c = 0; c < cfg.dt_dim; ++c) {
                Real pre = fp.dt_w1.data[c] * in.log_dt[i] + fp.dt_b1.data[c];
                tr.dt_pre(i, c) = pre;
                tr.dt_act(i, c) = gelu(pre);
            }
            for (int c = 0; c < cfg.dt_dim; ++c) {
                Real acc = fp.dt_b2.data[c];
                const Real* w = &fp.dt_w2.data[static_cast<std::size_t>(c) * cfg.dt_dim];
                for (int k = 0; k < cfg.dt_dim; ++k) acc += w[k] * tr.dt_act(i, k);
                tr.x_concat(i, cfg.text_dim + cfg.type_dim + c) = acc;
            }
        } else {
            tr.x_concat.row(i).segment(cfg.text_dim + cfg.type_dim, cfg.dt_dim).setZero();
        }
    }

    tr.h0.noalias() = tr.x_concat * fp.proj_w.mat().transpose();
    tr.h0.rowwise() += fp.proj_b.vec().transpose();

    tr.layers.resize(static_cast<std::size_t>(cfg.gnn_layers));
    const MatR<Real>* h = &tr.h0;
    for (int l = 0; l < cfg.gnn_layers; ++l) {
        layer_forward(params.layers[static_cast<std::size_t>(l)], params.relation_embedding, in,
                      *h, cfg, drop, "gnn." + std::to_string(l + 1), tr.layers[l]);
        h = &tr.layers[l].h_out;
    }

    tr.jk.resize(n, cfg.jk_dim());
    tr.jk.block(0, 0, n, cfg.hidden_dim) = tr.h0;
    for (int l = 0; l < cfg.gnn_layers; ++l)
        tr.jk.block(0, cfg.hidden_dim * (l + 1), n, cfg.hidden_dim) = tr.layers[l].h_out;
    return tr;
}

// Trigger head reads event-node JK vectors, routing head reads entity-node
// JK vectors; per-node scalar logits, probability = logistic(logit).
template <typename Real>
void heads_forward(const ModelParams<Real>& params, const NetInput<Real>& in,
                   const DropoutPlan& drop, ForwardTrace<Real>& tr) {
    detail::head_mlp_forward(params.trigger_head, tr.jk, in.event_nodes, params.cfg, drop,
                             "trigger_head", tr.trig);
    detail::head_mlp_forward(params.routing_head, tr.jk, in.entity_nodes, params.cfg, drop,
                             "routing_head", tr.rout);
}

// Full forward: body plus both heads.
template <typename Real>
ForwardTrace<Real> backbone_forward(const ModelParams<Real>& params, const NetInput<Real>& in,
                                    const DropoutPlan& drop) {
    ForwardTrace<Real> tr = body_forward(params, in, drop);
    heads_forward(params, in, drop, tr);
    return tr;
}

template <typename Real>
Real logistic(Real z) {
    return Real(1) / (Real(1) + std::exp(-z));
}

// stable softplus: log(1 + exp(x))
template <typename Real>
Real softplus(Real x) {
    return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x)));
}

// ---------------------------------------------------------------------------
// Joint masked loss. Per-node BCE-with-logits; the trigger positive term is
// down-weighted by w+; unlabelled nodes contribute nothing; each term is the
// mean over its labelled nodes (across the whole batch when accumulated).

struct LossBreakdown {
    double total = 0.0;
    double trigger_term = 0.0;  // mean trigger BCE (weighted positives)
    double routing_term = 0.0;  // mean routing BCE
    std::size_t n_trigger = 0, n_routing = 0;
    bool trigger_empty = false, routing_empty = false;
};

// Running sums for union-batch loss semantics.
struct LossAccumulator {
    double trig_sum = 0.0, rout_sum = 0.0;
    std::size_t trig_n = 0, rout_n = 0;

    template <typename Real>
    void add(const NetInput<Real>& in, const ForwardTrace<Real>& tr, const LossConfig& cfg) {
        for (std::size_t r = 0; r < tr.trig.rows.size(); ++r) {
            Label y = in.trigger_label[static_cast<std::size_t>(tr.trig.rows[r])];
            if (!is_labeled(y)) continue;
            double z = static_cast<double>(tr.trig.logits(static_cast<Eigen::Index>(r)));
            trig_sum += y == Label::Positive ? cfg.trigger_pos_weight * softplus(-z) : softplus(z);
            ++trig_n;
        }
        for (std::size_t r = 0; r < tr.rout.rows.size(); ++r) {
            Label y = in.routing_label[static_cast<std::size_t>(tr.rout.rows[r])];
            if (!is_labeled(y)) continue;
            double z = static_cast<double>(tr.rout.logits(static_cast<Eigen::Index>(r)));
            rout_sum += y == Label::Positive ? softplus(-z) : softplus(z);
            ++rout_n;
        }
    }

    LossBreakdown finish(const LossConfig& cfg) const {
        LossBreakdown out;
        out.n_trigger = trig_n;
        out.n_routing = rout_n;
        out.trigger_empty = trig_n == 0;
        out.routing_empty = rout_n == 0;
        out.trigger_term = trig_n ? trig_sum / static_cast<double>(trig_n) : 0.0;
        out.routing_term = rout_n ? rout_sum / static_cast<double>(rout_n) : 0.0;
        out.total = cfg.lambda_trigger * out.trigger_term + cfg.lambda_routing * out.routing_term;
        return out;
    }
};

template <typename Real>
LossBreakdown joint_loss(const NetInput<Real>& in, const ForwardTrace<Real>& tr,
                         const LossConfig& cfg) {
    LossAccumulator acc;
    acc.add(in, tr, cfg);
    return acc.finish(cfg);
}

// d(loss)/d(logit) for every head row, given the batch-level labelled counts.
template <typename Real>
struct LossGrads {
    VecR<Real> d_trig;  // aligned with trace trig rows
    VecR<Real> d_rout;
};

template <typename Real>
LossGrads<Real> loss_grads(const NetInput<Real>& in, const ForwardTrace<Real>& tr,
                           const LossConfig& cfg, std::size_t total_trig_n,
                           std::size_t total_rout_n) {
    LossGrads<Real> g;
    g.d_trig.setZero(static_cast<Eigen::Index>(tr.trig.rows.size()));
    g.d_rout.setZero(static_cast<Eigen::Index>(tr.rout.rows.size()));
    const Real trig_scale =
        total_trig_n ? Real(cfg.lambda_trigger / static_cast<double>(total_trig_n)) : Real(0);
    const Real rout_scale =
        total_rout_n ? Real(cfg.lambda_routing / static_cast<double>(total_rout_n)) : Real(0);
    for (std::size_t r = 0; r < tr.trig.rows.size(); ++r) {
        Label y = in.trigger_label[static_cast<std::size_t>(tr.trig.rows[r])];
        if (!is_labeled(y)) continue;
        Real z = tr.trig.logits(static_cast<Eigen::Index>(r));
        Real p = logistic(z);
        g.d_trig(static_cast<Eigen::Index>(r)) =
            trig_scale * (y == Label::Positive ? Real(cfg.trigger_pos_weight) * (p - Real(1)) : p);
    }
    for (std::size_t r = 0; r < tr.rout.rows.size(); ++r) {
        Label y = in.routing_label[static_cast<std::size_t>(tr.rout.rows[r])];
        if (!is_labeled(y)) continue;
        Real z = tr.rout.logits(static_cast<Eigen::Index>(r));
        Real p = logistic(z);
        g.d_rout(static_cast<Eigen::Index>(r)) = rout_scale * (p - (y == Label::Positive ? Real(1) : Real(0)));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Exact reverse-mode backward. Accumulates into params.grad.

namespace detail {

template <typename Real>
void head_mlp_backward(HeadParams<Real>& hp, const MatR<Real>& jk, const HeadTrace<Real>& ht,
                       const VecR<Real>& dlogits, const ModelConfig& cfg, MatR<Real>& djk) {
    const int m = static_cast<int>(ht.rows.size());
    if (m == 0) return;
    MatR<Real> x(m, cfg.jk_dim());
    for (int r = 0; r < m; ++r) x.row(r) = jk.row(ht.rows[r]);

    MatR<Real> dropped = ht.z1_act.cwiseProduct(ht.drop_mask);
    // fc2: logits = dropped * w2^T + b2
    hp.fc2_w.gmat().noalias() += dlogits.transpose() * dropped;
    hp.fc2_b.grad[0] += static_cast<Real>(dlogits.sum());
    MatR<Real> ddropped = dlogits * hp.fc2_w.mat();  // [m, head_hidden]
    MatR<Real> dz1_act = ddropped.cwiseProduct(ht.drop_mask);
    MatR<Real> dz1_pre(m, cfg.head_hidden);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < cfg.head_hidden; ++c)
            dz1_pre(r, c) = dz1_act(r, c) * gelu_grad(ht.z1_pre(r, c));
    hp.fc1_w.gmat().noalias() += dz1_pre.transpose() * x;
    hp.fc1_b.gvec().noalias() += dz1_pre.colwise().sum().transpose();
    MatR<Real> dx = dz1_pre * hp.fc1_w.mat();
    for (int r = 0; r < m; ++r) djk.row(ht.rows[r]) += dx.row(r);
}

template <typename Real>
void layer_backward(AttentionLayerParams<Real>& lp, Tensor<Real>& rel, const NetInput<Real>& in,
                    const MatR<Real>& h_in, const LayerTrace<Real>& tr, const ModelConfig& cfg,
                    const MatR<Real>& dh_out, MatR<Real>& dh_in) {
    const int n = in.n_nodes;
    const int E = static_cast<int>(in.edges.size());
    const int heads = cfg.attn_heads, hd = cfg.head_dim();
    const Real inv_dim = Real(1) / Real(cfg.hidden_dim);

    // LayerNorm backward
    MatR<Real> dpre(n, cfg.hidden_dim);
    for (int i = 0; i < n; ++i) {
        Real sum_dy_xhat = Real(0), sum_dy = Real(0);
        for (int c = 0; c < cfg.hidden_dim; ++c) {
            Real dy = dh_out(i, c);
            Real g = dy * lp.ln_scale.data[c];
            lp.ln_scale.grad[c] += dy * tr.x_hat(i, c);
            lp.ln_shift.grad[c] += dy;
            sum_dy_xhat += g * tr.x_hat(i, c);
            sum_dy += g;
        }
        for (int c = 0; c < cfg.hidden_dim; ++c) {
            Real g = dh_out(i, c) * lp.ln_scale.data[c];
            dpre(i, c) = (g - inv_dim * sum_dy - tr.x_hat(i, c) * inv_dim * sum_dy_xhat) *
                         tr.inv_std(i);
        }
    }

    // residual + dropout + GELU
    dh_in += dpre;
    MatR<Real> dattn(n, cfg.hidden_dim);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cfg.hidden_dim; ++c)
            dattn(i, c) = dpre(i, c) * tr.drop_mask(i, c) * gelu_grad(tr.attn_out(i, c));

    // attention backward
    MatR<Real> dgs = MatR<Real>::Zero(n, cfg.hidden_dim);
    MatR<Real> dgt = MatR<Real>::Zero(n, cfg.hidden_dim);
    MatR<Real> dge = MatR<Real>::Zero(cfg.n_edge_channels, cfg.hidden_dim);
    MatR<Real> dalpha(E, heads);
    for (int e = 0; e < E; ++e) {
        const auto& ed = in.edges[e];
        for (int hh = 0; hh < heads; ++hh) {
            const Real a = tr.alpha(e, hh);
            const Real* dout = dattn.row(ed.dst).data() + hh * hd;
            const Real* gsrow = tr.gs.row(ed.src).data() + hh * hd;
            const Real* gerow = tr.ge.row(ed.channel).data() + hh * hd;
            Real* dgsrow = dgs.row(ed.src).data() + hh * hd;
            Real* dgerow = dge.row(ed.channel).data() + hh * hd;
            Real da = Real(0);
            for (int k = 0; k < hd; ++k) {
                dgsrow[k] += a * dout[k];
                dgerow[k] += a * dout[k];
                da += dout[k] * (gsrow[k] + gerow[k]);
            }
            dalpha(e, hh) = da;
        }
    }
    // softmax backward per (target, head)
    MatR<Real> dscore(E, heads);
    for (int i = 0; i < n; ++i) {
        const int b = in.in_offsets[i], e2 = in.in_offsets[i + 1];
        for (int hh = 0; hh < heads; ++hh) {
            Real dot = Real(0);
            for (int k = b; k < e2; ++k) {
                const int e = in.in_edges[k];
                dot += tr.alpha(e, hh) * dalpha(e, hh);
            }
            for (int k = b; k < e2; ++k) {
                const int e = in.in_edges[k];
                dscore(e, hh) = tr.alpha(e, hh) * (dalpha(e, hh) - dot);
            }
        }
    }
    // score -> v -> u -> (gs, gt, ge); also attention-vector grads
    const Real slope = Real(cfg.leaky_slope);
    for (int e = 0; e < E; ++e) {
        const auto& ed = in.edges[e];
        for (int hh = 0; hh < heads; ++hh) {
            const Real ds = dscore(e, hh);
            const Real* a = &lp.attn.data[static_cast<std::size_t>(hh) * hd];
            Real* da = &lp.attn.grad[static_cast<std::size_t>(hh) * hd];
            const Real* vrow = tr.v.row(e).data() + hh * hd;
            Real* dgsrow = dgs.row(ed.src).data() + hh * hd;
            Real* dgtrow = dgt.row(ed.dst).data() + hh * hd;
            Real* dgerow = dge.row(ed.channel).data() + hh * hd;
            for (int k = 0; k < hd; ++k) {
                da[k] += ds * vrow[k];
                const Real du = ds * a[k] * (vrow[k] > Real(0) ? Real(1) : slope);
                dgsrow[k] += du;
                dgtrow[k] += du;
                dgerow[k] += du;
            }
        }
    }

    // linear transforms
    lp.src_w.gmat().noalias() += dgs.transpose() * h_in;
    lp.src_b.gvec().noalias() += dgs.colwise().sum().transpose();
    dh_in.noalias() += dgs * lp.src_w.mat();
    lp.dst_w.gmat().noalias() += dgt.transpose() * h_in;
    lp.dst_b.gvec().noalias() += dgt.colwise().sum().transpose();
    dh_in.noalias() += dgt * lp.dst_w.mat();
    lp.edge_w.gmat().noalias() += dge.transpose() * rel.mat();
    lp.edge_b.gvec().noalias() += dge.colwise().sum().transpose();
    rel.gmat().noalias() += dge * lp.edge_w.mat();
}

}  // namespace detail

// Backward through the whole network; the frozen text embedding receives no
// gradient by construction.
template <typename Real>
void backbone_backward(ModelParams<Real>& params, const NetInput<Real>& in,
                       const ForwardTrace<Real>& tr, const LossGrads<Real>& lg) {
    const ModelConfig& cfg = params.cfg;
    const int n = in.n_nodes;

    MatR<Real> djk = MatR<Real>::Zero(n, cfg.jk_dim());
    detail::head_mlp_backward(params.trigger_head, tr.jk, tr.trig, lg.d_trig, cfg, djk);
    detail::head_mlp_backward(params.routing_head, tr.jk, tr.rout, lg.d_rout, cfg, djk);

    // split JK gradient into the per-layer slices
    std::vector<MatR<Real>> dh(static_cast<std::size_t>(cfg.gnn_layers) + 1);
    for (int l = 0; l <= cfg.gnn_layers; ++l)
        dh[static_cast<std::size_t>(l)] = djk.block(0, cfg.hidden_dim * l, n, cfg.hidden_dim);

    for (int l = cfg.gnn_layers - 1; l >= 0; --l) {
        const MatR<Real>& h_in = l == 0 ? tr.h0 : tr.layers[static_cast<std::size_t>(l - 1)].h_out;
        detail::layer_backward(params.layers[static_cast<std::size_t>(l)],
                               params.relation_embedding, in, h_in,
                               tr.layers[static_cast<std::size_t>(l)], cfg,
                               dh[static_cast<std::size_t>(l + 1)], dh[static_cast<std::size_t>(l)]);
    }

    // input projection
    MatR<Real>& dh0 = dh[0];
    auto& fp = params.feat;
    fp.proj_w.gmat().noalias() += dh0.transpose() * tr.x_concat;
    fp.proj_b.gvec().noalias() += dh0.colwise().sum().transpose();
    MatR<Real> dx = dh0 * fp.proj_w.mat();  // [n, input_dim]

    // type embedding rows
    for (int i = 0; i < n; ++i) {
        const int trow = in.type_id[i];
        for (int c = 0; c < cfg.type_dim; ++c)
            fp.type_embedding.grad[trow * cfg.type_dim + c] += dx(i, cfg.text_dim + c);
    }
    // dt MLP (event rows only; entity rows carry a zero dt block)
    for (int i = 0; i < n; ++i) {
        if (!in.is_event[i]) continue;
        for (int c = 0; c < cfg.dt_dim; ++c) {
            const Real dout = dx(i, cfg.text_dim + cfg.type_dim + c);
            fp.dt_b2.grad[c] += dout;
            const Real* w2 = &fp.dt_w2.data[static_cast<std::size_t>(c) * cfg.dt_dim];
            Real* dw2 = &fp.dt_w2.grad[static_cast<std::size_t>(c) * cfg.dt_dim];
            for (int k = 0; k < cfg.dt_dim; ++k) dw2[k] += dout * tr.dt_act(i, k);
            for (int k = 0; k < cfg.dt_dim; ++k) {
                const Real dact = dout * w2[k];
                const Real dpre = dact * gelu_grad(tr.dt_pre(i, k));
                fp.dt_w1.grad[k] += dpre * in.log_dt[i];
                fp.dt_b1.grad[k] += dpre;
            }
        }
    }
}

// Full-precision probability readouts.
template <typename Real>
std::vector<double> trigger_probabilities(const ForwardTrace<Real>& tr) {
    std::vector<double> out(tr.trig.rows.size());
    for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = 1.0 / (1.0 + std::exp(-static_cast<double>(tr.trig.logits(static_cast<Eigen::Index>(r)))));
    return out;
}

template <typename Real>
std::vector<double> routing_scores(const ForwardTrace<Real>& tr) {
    std::vector<double> out(tr.rout.rows.size());
    for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = 1.0 / (1.0 + std::exp(-static_cast<double>(tr.rout.logits(static_cast<Eigen::Index>(r)))));
    return out;
}

}  // namespace wakegraph
