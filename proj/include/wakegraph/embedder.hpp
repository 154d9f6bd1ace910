#pragma once
// Pluggable frozen text embedders. The default is a deterministic hashed
// bag-of-tokens embedder (a stand-in for a pretrained sentence encoder); a
// file-backed table lets users inject real encoder vectors. Embedders are
// pure and never receive gradients.

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wakegraph/hash.hpp"

namespace wakegraph {

inline constexpr int kTextDim = 768;

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual int dim() const { return kTextDim; }
    // Unit-norm (L2 = 1 +- 1e-6) vector for the given text.
    virtual std::vector<float> embed(std::string_view text) const = 0;
};

// Default embedder: lowercase, split on non-alphanumerics, per-token vector
// from a counter-based stream keyed by the token's FNV-1a hash, average,
// L2-normalize. Uses add/mul/IEEE-sqrt only, so vectors are bit-identical
// across platforms.
class HashedTextEmbedder final : public TextEmbedder {
public:
    explicit HashedTextEmbedder(int dim = kTextDim) : dim_(dim) {}

    int dim() const override { return dim_; }

    std::vector<float> embed(std::string_view text) const override {
        std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
        std::size_t n_tokens = 0;
        std::string token;
        auto flush = [&] {
            if (token.empty()) return;
            CounterRng rng(fnv1a64(token));
            for (int d = 0; d < dim_; ++d) acc[d] += rng.gaussian(static_cast<std::uint64_t>(d));
            ++n_tokens;
            token.clear();
        };
        for (char c : text) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))
                token.push_back(c);
            else
                flush();
        }
        flush();

        std::vector<float> out(static_cast<std::size_t>(dim_), 0.0f);
        if (n_tokens == 0) {
            out[0] = 1.0f;  // fixed unit basis vector for empty token lists
            return out;
        }
        double norm_sq = 0.0;
        for (int d = 0; d < dim_; ++d) {
            acc[d] /= static_cast<double>(n_tokens);
            norm_sq += acc[d] * acc[d];
        }
        if (norm_sq == 0.0) {
            out[0] = 1.0f;
            return out;
        }
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (int d = 0; d < dim_; ++d) out[d] = static_cast<float>(acc[d] * inv);
        return out;
    }

private:
    int dim_;
};

// ---------------------------------------------------------------------------
// File-backed embedding table. Binary layout:
//   bytes 0..3   magic "WGEB"
//   bytes 4..7   u32 LE version (1)
//   bytes 8..11  u32 LE dim
//   then records: 20-byte sha1(text) + dim little-endian f32
inline constexpr char kEmbTableMagic[4] = {'W', 'G', 'E', 'B'};
inline constexpr std::uint32_t kEmbTableVersion = 1;

namespace detail {

inline void put_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline void put_f32_le(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32_le(out, v);
}

inline float get_f32_le(std::istream& in) {
    std::uint32_t v = get_u32_le(in);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

}  // namespace detail

class TableTextEmbedder final : public TextEmbedder {
public:
    // strict: missing keys are errors. Otherwise fall back to the default
    // hashed embedder.
    TableTextEmbedder(std::unordered_map<std::string, std::vector<float>> table, int dim,
                      bool strict)
        : table_(std::move(table)), dim_(dim), strict_(strict), fallback_(dim) {}

    int dim() const override { return dim_; }

    std::vector<float> embed(std::string_view text) const override {
        auto it = table_.find(sha1_hex(text));
        if (it != table_.end()) return it->second;
        if (strict_)
            throw std::runtime_error("embedding table: missing key sha1=" + sha1_hex(text));
        return fallback_.embed(text);
    }

    std::size_t size() const { return table_.size(); }

private:
    std::unordered_map<std::string, std::vector<float>> table_;
    int dim_;
    bool strict_;
    HashedTextEmbedder fallback_;
};

inline TableTextEmbedder load_embedding_table(const std::string& path, bool strict) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("embedding table: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kEmbTableMagic, 4) != 0)
        throw std::runtime_error("embedding table: bad magic in " + path);
    std::uint32_t version = detail::get_u32_le(in);
    if (version != kEmbTableVersion)
        throw std::runtime_error("embedding table: unsupported version " + std::to_string(version));
    std::uint32_t dim = detail::get_u32_le(in);
    if (dim == 0 || dim > 65536) throw std::runtime_error("embedding table: implausible dim");

    static const char* hexd = "0123456789abcdef";
    std::unordered_map<std::string, std::vector<float>> table;
    while (true) {
        unsigned char key[20];
        in.read(reinterpret_cast<char*>(key), 20);
        if (in.gcount() == 0) break;
        if (in.gcount() != 20) throw std::runtime_error("embedding table: truncated record key");
        std::string hex(40, '0');
        for (int i = 0; i < 20; ++i) {
            hex[2 * i] = hexd[key[i] >> 4];
            hex[2 * i + 1] = hexd[key[i] & 0xF];
        }
        std::vector<float> vec(dim);
        for (std::uint32_t d = 0; d < dim; ++d) {
            vec[d] = detail::get_f32_le(in);
            if (!in) throw std::runtime_error("embedding table: truncated record for " + hex);
        }
        table.emplace(std::move(hex), std::move(vec));
    }
    return TableTextEmbedder(std::move(table), static_cast<int>(dim), strict);
}

inline void save_embedding_table(const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                                 int dim, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("embedding table: cannot write " + path);
    out.write(kEmbTableMagic, 4);
    detail::put_u32_le(out, kEmbTableVersion);
    detail::put_u32_le(out, static_cast<std::uint32_t>(dim));
    for (const auto& [text, vec] : rows) {
        if (static_cast<int>(vec.size()) != dim)
            throw std::runtime_error("embedding table: wrong vector size for \"" + text + "\"");
        auto key = sha1_bytes(text);
        out.write(reinterpret_cast<const char*>(key.data()), 20);
        for (float f : vec) detail::put_f32_le(out, f);
    }
}

// Memoizing wrapper: pure-function cache for repeated texts (a computational
// shortcut, distinct from the serving-side typed cache policy).
class MemoEmbedder final : public TextEmbedder {
public:
    explicit MemoEmbedder(const TextEmbedder& inner) : inner_(&inner) {}

    int dim() const override { return inner_->dim(); }

    std::vector<float> embed(std::string_view text) const override {
        auto key = std::string(text);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        auto vec = inner_->embed(text);
        memo_.emplace(std::move(key), vec);
        return vec;
    }

private:
    const TextEmbedder* inner_;
    mutable std::unordered_map<std::string, std::vector<float>> memo_;
};

}  // namespace wakegraph
