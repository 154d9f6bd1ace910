#pragma once
// Fully specified hashing and deterministic random streams. Everything here
// is integer/IEEE-754 arithmetic only, so outputs are bit-identical across
// platforms and runs.

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace wakegraph {

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Counter-based stream: value(i) depends only on (key, i), so any index can
// be generated without stepping through predecessors.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    std::uint64_t bits(std::uint64_t index) const {
        return mix64(key_ ^ (index * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull));
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform(std::uint64_t index) const {
        return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
    }

    // Pseudo-Gaussian via an Irwin-Hall sum of four uniforms, rescaled to
    // unit variance. Uses add/mul only, so it is exactly reproducible.
    double gaussian(std::uint64_t index) const {
        const double s = uniform(4 * index) + uniform(4 * index + 1) +
                         uniform(4 * index + 2) + uniform(4 * index + 3);
        return (s - 2.0) * 1.7320508075688772;  // sqrt(3)
    }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

// Sequential convenience wrapper over CounterRng.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t next_bits() { return rng_.bits(counter_++); }
    double next_uniform() { return rng_.uniform(counter_++); }
    double next_gaussian() {
        double g = rng_.gaussian(counter_);
        ++counter_;
        return g;
    }
    // Uniform integer in [0, n). Unbiased enough at desk scale; stable.
    std::uint64_t next_below(std::uint64_t n) { return next_bits() % n; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    CounterRng rng_;
    std::uint64_t counter_ = 0;
};

// Derive a stream key from a global seed and a name (per-tensor init seeds,
// dropout streams, generator substreams).
inline std::uint64_t derive_key(std::uint64_t seed, std::string_view name) {
    return mix64(seed ^ fnv1a64(name));
}
inline std::uint64_t derive_key(std::uint64_t seed, std::string_view name, std::uint64_t index) {
    return mix64(mix64(seed ^ fnv1a64(name)) + index);
}

// ---------------------------------------------------------------------------
// SHA-1 (FIPS 180-1). Needed for the node-id scheme; hex digests only.

class Sha1 {
public:
    Sha1() { reset(); }

    void reset() {
        h_ = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        len_ = 0;
        buf_fill_ = 0;
    }

    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        len_ += n;
        while (n > 0) {
            std::size_t take = std::min<std::size_t>(64 - buf_fill_, n);
            std::memcpy(buf_.data() + buf_fill_, p, take);
            buf_fill_ += take;
            p += take;
            n -= take;
            if (buf_fill_ == 64) {
                process_block(buf_.data());
                buf_fill_ = 0;
            }
        }
    }

    std::array<unsigned char, 20> digest() {
        std::uint64_t bit_len = len_ * 8;
        unsigned char pad = 0x80;
        update(&pad, 1);
        unsigned char zero = 0;
        while (buf_fill_ != 56) update(&zero, 1);
        unsigned char lenb[8];
        for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bit_len >> (56 - 8 * i));
        update(lenb, 8);
        std::array<unsigned char, 20> out{};
        for (int i = 0; i < 5; ++i) {
            out[4 * i + 0] = static_cast<unsigned char>(h_[i] >> 24);
            out[4 * i + 1] = static_cast<unsigned char>(h_[i] >> 16);
            out[4 * i + 2] = static_cast<unsigned char>(h_[i] >> 8);
            out[4 * i + 3] = static_cast<unsigned char>(h_[i]);
        }
        return out;
    }

private:
    static std::uint32_t rol(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }

    void process_block(const unsigned char* p) {
        std::uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
        std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            std::uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = t;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<std::uint32_t, 5> h_{};
    std::array<unsigned char, 64> buf_{};
    std::size_t buf_fill_ = 0;
    std::uint64_t len_ = 0;
};

inline std::string sha1_hex(std::string_view s) {
    Sha1 h;
    h.update(s.data(), s.size());
    auto d = h.digest();
    static const char* hexd = "0123456789abcdef";
    std::string out(40, '0');
    for (int i = 0; i < 20; ++i) {
        out[2 * i] = hexd[d[i] >> 4];
        out[2 * i + 1] = hexd[d[i] & 0xF];
    }
    return out;
}

inline std::array<unsigned char, 20> sha1_bytes(std::string_view s) {
    Sha1 h;
    h.update(s.data(), s.size());
    return h.digest();
}

}  // namespace wakegraph
