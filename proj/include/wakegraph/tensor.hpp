#pragma once
// Flat named tensors with gradients, deterministic initializers, and Eigen
// views for the dense kernels.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "wakegraph/hash.hpp"

namespace wakegraph {

template <typename Real>
using MatR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using VecR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

template <typename Real>
struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<Real> data;
    std::vector<Real> grad;

    Tensor() = default;
    Tensor(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
        data.assign(size(), Real(0));
        grad.assign(size(), Real(0));
    }

    std::size_t size() const {
        return std::accumulate(shape.begin(), shape.end(), std::size_t(1),
                               [](std::size_t a, std::size_t b) { return a * b; });
    }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.size() > 1 ? shape.at(1) : 1; }

    void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }

    // [rows, cols] matrix views
    Eigen::Map<MatR<Real>> mat() {
        return Eigen::Map<MatR<Real>>(data.data(), static_cast<Eigen::Index>(rows()),
                                      static_cast<Eigen::Index>(cols()));
    }
    Eigen::Map<const MatR<Real>> mat() const {
        return Eigen::Map<const MatR<Real>>(data.data(), static_cast<Eigen::Index>(rows()),
                                            static_cast<Eigen::Index>(cols()));
    }
    Eigen::Map<MatR<Real>> gmat() {
        return Eigen::Map<MatR<Real>>(grad.data(), static_cast<Eigen::Index>(rows()),
                                      static_cast<Eigen::Index>(cols()));
    }
    Eigen::Map<const MatR<Real>> gmat() const {
        return Eigen::Map<const MatR<Real>>(grad.data(), static_cast<Eigen::Index>(rows()),
                                            static_cast<Eigen::Index>(cols()));
    }
    Eigen::Map<VecR<Real>> vec() {
        return Eigen::Map<VecR<Real>>(data.data(), static_cast<Eigen::Index>(size()));
    }
    Eigen::Map<const VecR<Real>> vec() const {
        return Eigen::Map<const VecR<Real>>(data.data(), static_cast<Eigen::Index>(size()));
    }
    Eigen::Map<VecR<Real>> gvec() {
        return Eigen::Map<VecR<Real>>(grad.data(), static_cast<Eigen::Index>(size()));
    }
};

// Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), from the tensor's
// own derived stream.
template <typename Real>
void init_uniform_fan_in(Tensor<Real>& t, std::size_t fan_in, std::uint64_t global_seed) {
    CounterRng rng(derive_key(global_seed, t.name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = static_cast<Real>((2.0 * rng.uniform(i) - 1.0) * bound);
}

template <typename Real>
void init_gaussian(Tensor<Real>& t, double stddev, std::uint64_t global_seed) {
    CounterRng rng(derive_key(global_seed, t.name));
    for (std::size_t i = 0; i < t.data.size(); ++i)
        t.data[i] = static_cast<Real>(rng.gaussian(i) * stddev);
}

template <typename Real>
void init_zero(Tensor<Real>& t) {
    std::fill(t.data.begin(), t.data.end(), Real(0));
}

}  // namespace wakegraph
