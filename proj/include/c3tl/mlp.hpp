#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace c3tl {

enum class Activation { Tanh, Relu, Gelu };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Gelu: return "gelu";
    }
    throw Error("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "gelu") return Activation::Gelu;
    throw ConfigError("unknown activation '" + s + "' (expected tanh|relu|gelu)");
}

namespace detail {

inline double activate(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        case Activation::Gelu: return 0.5 * z * (1.0 + std::erf(z * 0x1.6a09e667f3bcdp-1));
    }
    return z;
}

inline double activate_grad(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: {
            const double t = std::tanh(z);
            return 1.0 - t * t;
        }
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Gelu: {
            constexpr double inv_sqrt2 = 0x1.6a09e667f3bcdp-1;
            constexpr double inv_sqrt2pi = 0.3989422804014327;
            const double cdf = 0.5 * (1.0 + std::erf(z * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * z * z);
            return cdf + z * pdf;
        }
    }
    return 1.0;
}

}  // namespace detail

/// Architecture of one feed-forward network: affine layers with the given
/// hidden widths, activation on hidden layers only. Empty hidden_dims gives a
/// pure affine map.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden_dims;
    std::size_t output_dim = 0;
    Activation activation = Activation::Tanh;

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        dims.reserve(hidden_dims.size() + 2);
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(output_dim);
        return dims;
    }

    std::size_t n_layers() const { return hidden_dims.size() + 1; }

    void validate() const {
        if (input_dim == 0 || output_dim == 0)
            throw ConfigError("MlpSpec: input_dim and output_dim must be >= 1");
        for (std::size_t h : hidden_dims)
            if (h == 0) throw ConfigError("MlpSpec: hidden dims must be >= 1");
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Weights and biases conforming to an MlpSpec. Layer l maps row vectors as
/// x * weights[l] + biases[l], so weights[l] is dims[l] x dims[l+1].
struct MlpParams {
    MlpSpec spec;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += w.size();
        for (const auto& b : biases) n += b.size();
        return n;
    }

    void validate() const {
        spec.validate();
        const auto dims = spec.layer_dims();
        if (weights.size() != spec.n_layers() || biases.size() != spec.n_layers())
            throw DimensionError("MlpParams: layer count does not match spec");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (weights[l].rows() != dims[l] || weights[l].cols() != dims[l + 1] ||
                biases[l].rows() != 1 || biases[l].cols() != dims[l + 1])
                throw DimensionError("MlpParams: layer " + std::to_string(l) +
                                     " shape does not match spec");
        }
    }
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
inline MlpParams init_mlp(const MlpSpec& spec, SplitMix64& rng) {
    spec.validate();
    MlpParams p;
    p.spec = spec;
    const auto dims = spec.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l], dims[l + 1]);
        const double bound =
            std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(1, dims[l + 1]);
    }
    return p;
}

inline MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(seed);
    return init_mlp(spec, rng);
}

/// Intermediate values of one forward pass, kept for the backward pass.
struct MlpCache {
    std::vector<Matrix> inputs;          // inputs[l] = input to layer l
    std::vector<Matrix> pre_activation;  // pre_activation[l] = affine output of layer l
};

inline Matrix mlp_forward_cached(const MlpParams& params, const Matrix& input,
                                 MlpCache& cache) {
    if (input.cols() != params.spec.input_dim)
        throw DimensionError("mlp_forward: input has " + std::to_string(input.cols()) +
                             " cols, spec expects " +
                             std::to_string(params.spec.input_dim));
    const std::size_t n_layers = params.spec.n_layers();
    cache.inputs.clear();
    cache.pre_activation.clear();
    Matrix h = input;
    for (std::size_t l = 0; l < n_layers; ++l) {
        cache.inputs.push_back(h);
        Matrix z;
        matmul_into(h, params.weights[l], z);
        for (std::size_t i = 0; i < z.rows(); ++i) {
            auto r = z.row(i);
            const auto b = params.biases[l].row(0);
            for (std::size_t j = 0; j < z.cols(); ++j) r[j] += b[j];
        }
        cache.pre_activation.push_back(z);
        if (l + 1 < n_layers) {
            for (double& v : z.data()) v = detail::activate(params.spec.activation, v);
        }
        h = std::move(z);
    }
    return h;
}

/// Deterministic forward pass of the whole network on a batch of rows.
inline Matrix mlp_forward(const MlpParams& params, const Matrix& input) {
    MlpCache cache;
    return mlp_forward_cached(params, input, cache);
}

/// Gradients with the same shapes as the parameters they correspond to.
struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;

    MlpGrads() = default;
    explicit MlpGrads(const MlpParams& like) {
        for (const auto& w : like.weights) weights.emplace_back(w.rows(), w.cols());
        for (const auto& b : like.biases) biases.emplace_back(b.rows(), b.cols());
    }

    MlpGrads& operator+=(const MlpGrads& o) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += o.weights[l];
            biases[l] += o.biases[l];
        }
        return *this;
    }
};

/// Reverse-mode gradients given a cache from mlp_forward_cached. Returns the
/// parameter gradients and the gradient with respect to the input rows.
inline std::pair<MlpGrads, Matrix> mlp_backward_cached(const MlpParams& params,
                                                       const MlpCache& cache,
                                                       const Matrix& upstream_grad) {
    const std::size_t n_layers = params.spec.n_layers();
    if (upstream_grad.cols() != params.spec.output_dim ||
        upstream_grad.rows() != cache.inputs.front().rows())
        throw DimensionError("mlp_backward: upstream gradient shape mismatch");

    MlpGrads grads;
    grads.weights.resize(n_layers);
    grads.biases.resize(n_layers);

    Matrix g = upstream_grad;  // gradient w.r.t. the affine output of layer l
    for (std::size_t l = n_layers; l-- > 0;) {
        grads.weights[l] = matmul_at_b(cache.inputs[l], g);
        grads.biases[l] = column_sums(g);
        Matrix gh = matmul_a_bt(g, params.weights[l]);
        if (l > 0) {
            const Matrix& z = cache.pre_activation[l - 1];
            for (std::size_t i = 0; i < gh.size(); ++i)
                gh.data()[i] *=
                    detail::activate_grad(params.spec.activation, z.data()[i]);
        }
        g = std::move(gh);
    }
    return {std::move(grads), std::move(g)};
}

/// Exact reverse-mode gradients of mlp_forward at the given input.
inline std::pair<MlpGrads, Matrix> mlp_backward(const MlpParams& params,
                                                const Matrix& input,
                                                const Matrix& upstream_grad) {
    MlpCache cache;
    mlp_forward_cached(params, input, cache);
    return mlp_backward_cached(params, cache, upstream_grad);
}

}  // namespace c3tl
