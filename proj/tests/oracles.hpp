#pragma once

// Independent test-side re-implementations used as oracles. These stay
// deliberately naive (per-element loops, textbook formulas) and share no code
// with the library paths they check.

#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "c3tl/data.hpp"
#include "c3tl/matrix.hpp"
#include "c3tl/mlp.hpp"

namespace oracles {

inline double apply_activation(c3tl::Activation a, double z) {
    switch (a) {
        case c3tl::Activation::Tanh: return std::tanh(z);
        case c3tl::Activation::Relu: return z > 0 ? z : 0.0;
        case c3tl::Activation::Gelu:
            return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0)));
    }
    return z;
}

/// Per-sample, per-neuron forward pass: y_j = act(sum_i x_i W_ij + b_j).
inline std::vector<double> naive_mlp_forward(const c3tl::MlpParams& params,
                                             const std::vector<double>& input) {
    std::vector<double> h = input;
    const std::size_t n_layers = params.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const c3tl::Matrix& w = params.weights[l];
        std::vector<double> next(w.cols());
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double acc = params.biases[l](0, j);
            for (std::size_t i = 0; i < w.rows(); ++i) acc += h[i] * w(i, j);
            next[j] = l + 1 < n_layers
                          ? apply_activation(params.spec.activation, acc)
                          : acc;
        }
        h = std::move(next);
    }
    return h;
}

/// Textbook sample Pearson correlation.
inline double naive_pearson(const std::vector<double>& x,
                            const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double num = 0, dx2 = 0, dy2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        dx2 += (x[i] - mx) * (x[i] - mx);
        dy2 += (y[i] - my) * (y[i] - my);
    }
    return num / std::sqrt(dx2 * dy2);
}

/// Group-by-then-average over (context, perturbation) keys.
inline std::map<std::pair<std::size_t, std::size_t>, std::vector<double>>
naive_group_means(const std::vector<c3tl::CellRecord>& records, std::size_t d) {
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> sums;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    for (const auto& r : records) {
        auto& s = sums[{r.context_id, r.perturbation_id}];
        s.resize(d, 0.0);
        for (std::size_t g = 0; g < d; ++g) s[g] += r.expression[g];
        counts[{r.context_id, r.perturbation_id}] += 1;
    }
    for (auto& [key, s] : sums)
        for (double& v : s) v /= static_cast<double>(counts[key]);
    return sums;
}

}  // namespace oracles
