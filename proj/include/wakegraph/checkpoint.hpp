#pragma once
// On-disk checkpoint: an 8-byte magic, a little-endian u64 manifest length,
// a JSON manifest (tensor names, shapes, hyperparameters, format version),
// then raw little-endian f32 tensor data in manifest order. Save->load->save
// round-trips bitwise.

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wakegraph/model.hpp"

namespace wakegraph {

inline constexpr char kCheckpointMagic[8] = {'W', 'G', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void put_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline nlohmann::ordered_json config_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    j["text_dim"] = cfg.text_dim;
    j["type_dim"] = cfg.type_dim;
    j["dt_dim"] = cfg.dt_dim;
    j["hidden_dim"] = cfg.hidden_dim;
    j["attn_heads"] = cfg.attn_heads;
    j["gnn_layers"] = cfg.gnn_layers;
    j["n_node_types"] = cfg.n_node_types;
    j["n_edge_channels"] = cfg.n_edge_channels;
    j["rel_dim"] = cfg.rel_dim;
    j["head_hidden"] = cfg.head_hidden;
    j["dropout"] = cfg.dropout;
    j["leaky_slope"] = cfg.leaky_slope;
    j["ln_eps"] = cfg.ln_eps;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.text_dim = j.at("text_dim").get<int>();
    cfg.type_dim = j.at("type_dim").get<int>();
    cfg.dt_dim = j.at("dt_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.attn_heads = j.at("attn_heads").get<int>();
    cfg.gnn_layers = j.at("gnn_layers").get<int>();
    cfg.n_node_types = j.at("n_node_types").get<int>();
    cfg.n_edge_channels = j.at("n_edge_channels").get<int>();
    cfg.rel_dim = j.at("rel_dim").get<int>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.dropout = j.at("dropout").get<double>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.ln_eps = j.at("ln_eps").get<double>();
    return cfg;
}

}  // namespace detail

struct ModelCheckpoint {
    ModelParams<float> params;
    std::uint64_t train_seed = 0;
};

inline void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    nlohmann::ordered_json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["hyperparameters"] = detail::config_json(ckpt.params.cfg);
    manifest["train_seed"] = ckpt.train_seed;
    auto& tensors = manifest["tensors"] = nlohmann::ordered_json::array();
    ckpt.params.for_each_tensor([&](const Tensor<float>& t) {
        nlohmann::ordered_json tj;
        tj["name"] = t.name;
        tj["shape"] = t.shape;
        tensors.push_back(std::move(tj));
    });
    const std::string manifest_bytes = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out.write(kCheckpointMagic, 8);
    detail::put_u64_le(out, manifest_bytes.size());
    out.write(manifest_bytes.data(), static_cast<std::streamsize>(manifest_bytes.size()));
    ckpt.params.for_each_tensor([&](const Tensor<float>& t) {
        for (float f : t.data) {
            std::uint32_t v;
            std::memcpy(&v, &f, 4);
            unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    });
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

// Loads and validates a checkpoint. When `expected` is non-null the manifest
// hyperparameters must match it exactly.
inline ModelCheckpoint load_checkpoint(const std::string& path,
                                       const ModelConfig* expected = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    std::uint64_t mlen = detail::get_u64_le(in);
    std::string manifest_bytes(mlen, '\0');
    in.read(manifest_bytes.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw std::runtime_error("load_checkpoint: truncated manifest in " + path);
    nlohmann::json manifest = nlohmann::json::parse(manifest_bytes);
    if (manifest.at("format_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: unsupported format version");

    ModelCheckpoint ckpt;
    ModelConfig cfg = detail::config_from_json(manifest.at("hyperparameters"));
    if (expected && detail::config_json(*expected) != detail::config_json(cfg))
        throw std::runtime_error("load_checkpoint: manifest hyperparameters do not match the "
                                 "runtime config");
    ckpt.params.init(cfg, 0);
    ckpt.train_seed = manifest.value("train_seed", std::uint64_t(0));

    auto tensor_it = manifest.at("tensors").begin();
    const auto tensor_end = manifest.at("tensors").end();
    ckpt.params.for_each_tensor([&](Tensor<float>& t) {
        if (tensor_it == tensor_end)
            throw std::runtime_error("load_checkpoint: manifest missing tensor " + t.name);
        if (tensor_it->at("name").get<std::string>() != t.name)
            throw std::runtime_error("load_checkpoint: manifest tensor order mismatch at " +
                                     t.name);
        auto shape = tensor_it->at("shape").get<std::vector<std::size_t>>();
        if (shape != t.shape)
            throw std::runtime_error("load_checkpoint: shape mismatch for tensor " + t.name);
        ++tensor_it;
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            unsigned char b[4];
            in.read(reinterpret_cast<char*>(b), 4);
            if (!in)
                throw std::runtime_error("load_checkpoint: blob truncated in tensor " + t.name);
            std::uint32_t v = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                              (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
            std::memcpy(&t.data[i], &v, 4);
        }
    });
    return ckpt;
}

}  // namespace wakegraph
