#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "eval.hpp"
#include "model.hpp"

namespace c3tl {

/// Architecture and training options for a trainable runner; dims are taken
/// from whichever cube the runner is handed.
struct C3tlRunnerOptions {
    std::size_t latent_dim = 32;
    std::vector<std::size_t> hidden_dims = {128};
    Activation activation = Activation::Tanh;
    bool mask_target_in_aggregation = false;
    TrainConfig train;
};

inline Runner make_c3tl_runner(const C3tlRunnerOptions& options,
                               std::string name = "c3tl") {
    return Runner{
        name, [options](const PerturbationCube& cube, const SplitPlan& plan,
                        const std::vector<PairKey>& pairs, std::uint64_t seed) {
            C3tlSpec spec = C3tlSpec::defaults(
                cube.n_contexts, cube.n_perturbations, cube.n_genes,
                options.latent_dim, options.hidden_dims, options.activation);
            spec.mask_target_in_aggregation = options.mask_target_in_aggregation;
            TrainConfig config = options.train;
            config.seed = seed;
            const TrainResult result = train(cube, plan, spec, config);
            const CubeView view = CubeView::training(cube, plan);
            PredictionMap preds;
            for (const auto& [c, p] : pairs) {
                const Matrix row = predict(result.params, view, p, c);
                preds[{c, p}] =
                    std::vector<double>(row.row(0).begin(), row.row(0).end());
            }
            return preds;
        }};
}

inline std::vector<std::size_t> non_test_contexts(const SplitPlan& plan) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < plan.n_contexts; ++c)
        if (!plan.is_test_context(c)) out.push_back(c);
    return out;
}

inline Runner make_mean_baseline_runner(std::string name = "mean_baseline") {
    return Runner{
        name, [](const PerturbationCube& cube, const SplitPlan& plan,
                 const std::vector<PairKey>& pairs, std::uint64_t) {
            const CubeView view = CubeView::training(cube, plan);
            const auto contexts = non_test_contexts(plan);
            PredictionMap preds;
            for (const auto& [c, p] : pairs) {
                const Matrix row = mean_baseline(view, p, contexts);
                preds[{c, p}] =
                    std::vector<double>(row.row(0).begin(), row.row(0).end());
            }
            return preds;
        }};
}

inline Runner make_closest_cell_runner(std::string name = "closest_cell") {
    return Runner{
        name, [](const PerturbationCube& cube, const SplitPlan& plan,
                 const std::vector<PairKey>& pairs, std::uint64_t) {
            const CubeView view = CubeView::training(cube, plan);
            PredictionMap preds;
            for (const auto& [c, p] : pairs) {
                const Matrix row = closest_cell_baseline(view, plan, c, p);
                preds[{c, p}] =
                    std::vector<double>(row.row(0).begin(), row.row(0).end());
            }
            return preds;
        }};
}

}  // namespace c3tl
