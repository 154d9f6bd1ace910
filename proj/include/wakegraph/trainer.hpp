#pragma once
// Two-epoch joint training: session batching with union-mean loss semantics,
// exact gradients, global-norm clipping, AdamW with decoupled weight decay,
// and deterministic shuffling/initialization from one global seed.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wakegraph/checkpoint.hpp"
#include "wakegraph/model.hpp"
#include "wakegraph/session_store.hpp"

namespace wakegraph {

struct TrainConfig {
    double lr = 3e-4;
    double weight_decay = 1e-4;
    double clip_norm = 1.0;
    int batch_sessions = 32;
    int epochs = 2;
    std::uint64_t seed = 0;
    ModelConfig model;
    LossConfig loss;
};

struct AdamWConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <typename Real>
class AdamW {
public:
    AdamW(ModelParams<Real>& params, AdamWConfig cfg = {}) : cfg_(cfg) {
        params.for_each_tensor([&](Tensor<Real>& t) {
            m_.emplace_back(t.size(), Real(0));
            v_.emplace_back(t.size(), Real(0));
        });
    }

    // Global-norm clip across every gradient; returns the pre-clip norm.
    double clip_gradients(ModelParams<Real>& params, double clip_norm) const {
        double sq = 0.0;
        params.for_each_tensor([&](Tensor<Real>& t) {
            for (Real g : t.grad) sq += static_cast<double>(g) * static_cast<double>(g);
        });
        const double norm = std::sqrt(sq);
        if (clip_norm > 0 && norm > clip_norm) {
            const Real scale = static_cast<Real>(clip_norm / norm);
            params.for_each_tensor([&](Tensor<Real>& t) {
                for (Real& g : t.grad) g *= scale;
            });
        }
        return norm;
    }

    // Decoupled weight decay: p <- p*(1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps)
    void step(ModelParams<Real>& params, double lr, double weight_decay) {
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        std::size_t ti = 0;
        params.for_each_tensor([&](Tensor<Real>& t) {
            auto& m = m_[ti];
            auto& v = v_[ti];
            ++ti;
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                const double g = static_cast<double>(t.grad[i]);
                double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
                double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * g * g;
                m[i] = static_cast<Real>(mi);
                v[i] = static_cast<Real>(vi);
                const double m_hat = mi / bc1;
                const double v_hat = vi / bc2;
                double p = static_cast<double>(t.data[i]);
                p *= 1.0 - lr * weight_decay;
                p -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
                t.data[i] = static_cast<Real>(p);
            }
        });
    }

    std::uint64_t step_count() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }

    std::vector<std::vector<Real>>& moments1() { return m_; }
    std::vector<std::vector<Real>>& moments2() { return v_; }
    void set_step_count(std::uint64_t s) { step_ = s; }

private:
    AdamWConfig cfg_;
    std::vector<std::vector<Real>> m_, v_;
    std::uint64_t step_ = 0;
};

struct TrainLogEntry {
    std::uint64_t step = 0;
    int epoch = 0;
    double loss = 0.0, trig_loss = 0.0, rout_loss = 0.0, grad_norm = 0.0;
};

inline void write_train_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write train log " + path);
    for (const auto& e : log) {
        nlohmann::ordered_json j;
        j["step"] = e.step;
        j["epoch"] = e.epoch;
        j["loss"] = e.loss;
        j["trig_loss"] = e.trig_loss;
        j["rout_loss"] = e.rout_loss;
        j["grad_norm"] = e.grad_norm;
        out << j.dump() << '\n';
    }
}

// Build + label the training graphs for a dataset.
inline std::vector<SessionGraph> prepare_training_graphs(
    const std::vector<SessionRecord>& sessions,
    const EntityTables& tables = EntityTables::builtin()) {
    std::vector<SessionGraph> graphs;
    graphs.reserve(sessions.size());
    for (const auto& s : sessions) {
        SessionGraph g = build_session_graph(s, tables, CapPolicy::KeepFirst);
        label_graph(g, s, tables);
        graphs.push_back(std::move(g));
    }
    return graphs;
}

// Destroys the label signal while preserving label counts: permutes trigger
// labels across all event nodes and routing labels across all entity nodes.
inline void shuffle_labels(std::vector<SessionGraph>& graphs, std::uint64_t seed) {
    std::vector<Label> trig, rout;
    for (const auto& g : graphs)
        for (const auto& n : g.nodes) {
            if (n.is_event())
                trig.push_back(n.trigger_label);
            else
                rout.push_back(n.routing_label);
        }
    Rng rng_t(derive_key(seed, "shuffle_trigger"));
    rng_t.shuffle(trig);
    Rng rng_r(derive_key(seed, "shuffle_routing"));
    rng_r.shuffle(rout);
    std::size_t ti = 0, ri = 0;
    for (auto& g : graphs)
        for (auto& n : g.nodes) {
            if (n.is_event())
                n.trigger_label = trig[ti++];
            else
                n.routing_label = rout[ri++];
        }
}

struct TrainResult {
    ModelCheckpoint checkpoint;
    std::vector<TrainLogEntry> log;
};

template <typename Real = float>
TrainResult train_on_graphs(const std::vector<SessionGraph>& graphs, const TrainConfig& cfg,
                            const TextEmbedder& embedder) {
    if (graphs.empty()) throw std::runtime_error("train: empty dataset");

    MemoEmbedder memo(embedder);
    std::vector<NetInput<Real>> inputs;
    inputs.reserve(graphs.size());
    std::vector<std::size_t> trig_counts, rout_counts;
    std::size_t total_labeled = 0;
    for (const auto& g : graphs) {
        NetInput<Real> in = make_net_input<Real>(g, memo, cfg.model);
        std::size_t nt = 0, nr = 0;
        for (int node : in.event_nodes)
            if (is_labeled(in.trigger_label[static_cast<std::size_t>(node)])) ++nt;
        for (int node : in.entity_nodes)
            if (is_labeled(in.routing_label[static_cast<std::size_t>(node)])) ++nr;
        trig_counts.push_back(nt);
        rout_counts.push_back(nr);
        total_labeled += nt + nr;
        inputs.push_back(std::move(in));
    }
    if (total_labeled == 0)
        throw std::runtime_error("train: dataset carries no labeled nodes at all");

    ModelParams<Real> params;
    params.init(cfg.model, cfg.seed);
    AdamW<Real> opt(params);

    std::vector<TrainLogEntry> log;
    std::uint64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(graphs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffler(derive_key(cfg.seed, "epoch_shuffle", static_cast<std::uint64_t>(epoch)));
        shuffler.shuffle(order);

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_sessions)) {
            ++step;
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_sessions));
            std::size_t batch_trig = 0, batch_rout = 0;
            for (std::size_t k = start; k < end; ++k) {
                batch_trig += trig_counts[order[k]];
                batch_rout += rout_counts[order[k]];
            }

            params.zero_grad();
            LossAccumulator acc;
            std::uint64_t node_offset = 0;
            for (std::size_t k = start; k < end; ++k) {
                const NetInput<Real>& in = inputs[order[k]];
                DropoutPlan drop{true, cfg.seed, step, node_offset};
                ForwardTrace<Real> tr = backbone_forward(params, in, drop);
                acc.add(in, tr, cfg.loss);
                LossGrads<Real> lg = loss_grads(in, tr, cfg.loss, batch_trig, batch_rout);
                backbone_backward(params, in, tr, lg);
                node_offset += static_cast<std::uint64_t>(in.n_nodes);
            }
            const double grad_norm = opt.clip_gradients(params, cfg.clip_norm);
            opt.step(params, cfg.lr, cfg.weight_decay);

            LossBreakdown lb = acc.finish(cfg.loss);
            log.push_back({step, epoch, lb.total, lb.trigger_term, lb.routing_term, grad_norm});
        }
    }

    TrainResult result;
    if constexpr (std::is_same_v<Real, float>) {
        result.checkpoint.params = std::move(params);
    } else {
        result.checkpoint.params.init(cfg.model, cfg.seed);
        std::size_t ti = 0;
        std::vector<const Tensor<Real>*> src;
        params.for_each_tensor([&](const Tensor<Real>& t) { src.push_back(&t); });
        result.checkpoint.params.for_each_tensor([&](Tensor<float>& t) {
            for (std::size_t i = 0; i < t.data.size(); ++i)
                t.data[i] = static_cast<float>(src[ti]->data[i]);
            ++ti;
        });
    }
    result.checkpoint.train_seed = cfg.seed;
    result.log = std::move(log);
    return result;
}

template <typename Real = float>
TrainResult train(const std::vector<SessionRecord>& dataset, const TrainConfig& cfg,
                  const TextEmbedder& embedder,
                  const EntityTables& tables = EntityTables::builtin()) {
    if (dataset.empty()) throw std::runtime_error("train: empty dataset");
    auto graphs = prepare_training_graphs(dataset, tables);
    return train_on_graphs<Real>(graphs, cfg, embedder);
}

// ---------------------------------------------------------------------------
// Optimizer-state container (same layout discipline as the checkpoint),
// saved alongside checkpoints for resumability.

inline constexpr char kOptStateMagic[8] = {'W', 'G', 'O', 'P', 'T', 'S', '0', '1'};

inline void save_optimizer_state(const AdamW<float>& opt_in, const ModelParams<float>& params,
                                 const std::string& path) {
    auto& opt = const_cast<AdamW<float>&>(opt_in);
    nlohmann::ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["step"] = opt.step_count();
    manifest["beta1"] = opt.config().beta1;
    manifest["beta2"] = opt.config().beta2;
    manifest["eps"] = opt.config().eps;
    auto& tensors = manifest["tensors"] = nlohmann::ordered_json::array();
    params.for_each_tensor([&](const Tensor<float>& t) {
        nlohmann::ordered_json tj;
        tj["name"] = t.name;
        tj["size"] = t.size();
        tensors.push_back(std::move(tj));
    });
    const std::string manifest_bytes = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write optimizer state " + path);
    out.write(kOptStateMagic, 8);
    detail::put_u64_le(out, manifest_bytes.size());
    out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
    auto write_block = [&](const std::vector<float>& block) {
        for (float f : block) {
            std::uint32_t v;
            std::memcpy(&v, &f, 4);
            unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    };
    for (const auto& m : opt.moments1()) write_block(m);
    for (const auto& v : opt.moments2()) write_block(v);
}

inline void load_optimizer_state(AdamW<float>& opt, const ModelParams<float>& params,
                                 const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open optimizer state " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kOptStateMagic, 8) != 0)
        throw std::runtime_error("optimizer state: bad magic in " + path);
    std::uint64_t mlen = detail::get_u64_le(in);
    std::string manifest_bytes(mlen, '\0');
    in.read(manifest_bytes.data(), static_cast<std::streamsize>(mlen));
    nlohmann::json manifest = nlohmann::json::parse(manifest_bytes);
    opt.set_step_count(manifest.at("step").get<std::uint64_t>());
    auto read_block = [&](std::vector<float>& block, const char* what) {
        for (std::size_t i = 0; i < block.size(); ++i) {
            unsigned char b[4];
            in.read(reinterpret_cast<char*>(b), 4);
            if (!in) throw std::runtime_error(std::string("optimizer state truncated in ") + what);
            std::uint32_t v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                              (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
            std::memcpy(&block[i], &v, 4);
        }
    };
    for (auto& m : opt.moments1()) read_block(m, "first moments");
    for (auto& v : opt.moments2()) read_block(v, "second moments");
    (void)params;
}

}  // namespace wakegraph
