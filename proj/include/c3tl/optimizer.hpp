#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace c3tl {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw ConfigError("AdamConfig: betas must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("AdamConfig: epsilon must be > 0");
        if (learning_rate < 0.0)
            throw ConfigError("AdamConfig: learning rate must be >= 0");
    }
};

/// Adaptive-moment optimizer state over an ordered pack of parameter
/// matrices. The pack order is fixed by the caller and must match between
/// construction and every step.
struct OptimizerState {
    AdamConfig config;
    std::uint64_t step_count = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;

    static OptimizerState create(const AdamConfig& config,
                                 const std::vector<Matrix*>& params) {
        config.validate();
        OptimizerState s;
        s.config = config;
        for (const Matrix* p : params) {
            s.first_moment.emplace_back(p->rows(), p->cols());
            s.second_moment.emplace_back(p->rows(), p->cols());
        }
        return s;
    }
};

/// One bias-corrected adaptive-moment update over the parameter pack.
inline void optimizer_step(OptimizerState& state, const std::vector<Matrix*>& params,
                           const std::vector<const Matrix*>& grads) {
    if (params.size() != grads.size() ||
        params.size() != state.first_moment.size())
        throw DimensionError("optimizer_step: pack sizes disagree");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const AdamConfig& c = state.config;
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        Matrix& m = state.first_moment[k];
        Matrix& v = state.second_moment[k];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw DimensionError("optimizer_step: shape mismatch in pack entry " +
                                 std::to_string(k));
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g.data()[i];
            m.data()[i] = c.beta1 * m.data()[i] + (1.0 - c.beta1) * gi;
            v.data()[i] = c.beta2 * v.data()[i] + (1.0 - c.beta2) * gi * gi;
            const double mhat = m.data()[i] / corr1;
            const double vhat = v.data()[i] / corr2;
            p.data()[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
        }
    }
}

}  // namespace c3tl
