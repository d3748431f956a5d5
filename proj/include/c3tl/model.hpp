#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "mlp.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "split.hpp"
#include "view.hpp"

namespace c3tl {

/// Architecture of the context-transfer model: a perturbation encoder over
/// (delta, one-hot context) rows, a context encoder over (delta, one-hot
/// perturbation) rows, mean aggregation, and a decoder over the summed
/// latents.
struct C3tlSpec {
    std::size_t n_contexts = 0;
    std::size_t n_perturbations = 0;
    std::size_t n_genes = 0;
    std::size_t latent_dim = 0;
    MlpSpec theta_z;
    MlpSpec theta_psi;
    MlpSpec gamma;
    bool mask_target_in_aggregation = false;

    /// Default desk-scale architecture: one hidden layer of width 128, tanh,
    /// latent dimension 32.
    static C3tlSpec defaults(std::size_t n_contexts, std::size_t n_perturbations,
                             std::size_t n_genes, std::size_t latent_dim = 32,
                             std::vector<std::size_t> hidden_dims = {128},
                             Activation activation = Activation::Tanh) {
        C3tlSpec s;
        s.n_contexts = n_contexts;
        s.n_perturbations = n_perturbations;
        s.n_genes = n_genes;
        s.latent_dim = latent_dim;
        s.theta_z = {n_genes + n_contexts, hidden_dims, latent_dim, activation};
        s.theta_psi = {n_genes + n_perturbations, hidden_dims, latent_dim, activation};
        s.gamma = {latent_dim, hidden_dims, n_genes, activation};
        return s;
    }

    void validate() const {
        theta_z.validate();
        theta_psi.validate();
        gamma.validate();
        if (n_contexts == 0 || n_perturbations == 0 || n_genes == 0 || latent_dim == 0)
            throw ConfigError("C3tlSpec: all counts must be >= 1");
        if (theta_z.input_dim != n_genes + n_contexts)
            throw ConfigError("C3tlSpec: theta_z input_dim must equal n_genes + n_contexts");
        if (theta_psi.input_dim != n_genes + n_perturbations)
            throw ConfigError(
                "C3tlSpec: theta_psi input_dim must equal n_genes + n_perturbations");
        if (theta_z.output_dim != latent_dim || theta_psi.output_dim != latent_dim)
            throw ConfigError("C3tlSpec: encoder output dims must equal latent_dim");
        if (gamma.input_dim != latent_dim || gamma.output_dim != n_genes)
            throw ConfigError("C3tlSpec: gamma must map latent_dim -> n_genes");
    }

    friend bool operator==(const C3tlSpec&, const C3tlSpec&) = default;
};

struct C3tlParams {
    C3tlSpec spec;
    MlpParams theta_z;
    MlpParams theta_psi;
    MlpParams gamma;

    std::size_t param_count() const {
        return theta_z.param_count() + theta_psi.param_count() + gamma.param_count();
    }

    /// Canonical parameter pack order: theta_z, theta_psi, gamma; within each
    /// network, weight then bias per layer.
    std::vector<Matrix*> flatten() {
        std::vector<Matrix*> out;
        for (MlpParams* net : {&theta_z, &theta_psi, &gamma})
            for (std::size_t l = 0; l < net->weights.size(); ++l) {
                out.push_back(&net->weights[l]);
                out.push_back(&net->biases[l]);
            }
        return out;
    }

    void validate() const {
        spec.validate();
        theta_z.validate();
        theta_psi.validate();
        gamma.validate();
        if (theta_z.spec != spec.theta_z || theta_psi.spec != spec.theta_psi ||
            gamma.spec != spec.gamma)
            throw DimensionError("C3tlParams: network specs disagree with model spec");
    }
};

inline C3tlParams init_params(const C3tlSpec& spec, std::uint64_t seed) {
    spec.validate();
    C3tlParams p;
    p.spec = spec;
    p.theta_z = init_mlp(spec.theta_z, derive_seed(seed, "theta_z"));
    p.theta_psi = init_mlp(spec.theta_psi, derive_seed(seed, "theta_psi"));
    p.gamma = init_mlp(spec.gamma, derive_seed(seed, "gamma"));
    return p;
}

struct C3tlGrads {
    MlpGrads theta_z;
    MlpGrads theta_psi;
    MlpGrads gamma;

    std::vector<const Matrix*> flatten() const {
        std::vector<const Matrix*> out;
        for (const MlpGrads* net : {&theta_z, &theta_psi, &gamma})
            for (std::size_t l = 0; l < net->weights.size(); ++l) {
                out.push_back(&net->weights[l]);
                out.push_back(&net->biases[l]);
            }
        return out;
    }
};

namespace detail {

/// Branch rows for one encoder over a batch, grouped by aggregation set.
/// Group g owns rows [offsets[g], offsets[g+1]); pair i reads group
/// pair_group[i]. Branch rows within a group follow ascending member index,
/// which keeps the mean's summation order canonical.
struct AggBatch {
    Matrix branch_inputs;
    std::vector<std::size_t> offsets;
    std::vector<std::size_t> pair_group;
};

/// Members of one aggregation set: for the perturbation encoder the visible
/// contexts of p (minus an optional exclusion), ascending.
inline std::vector<std::size_t> agg_members(const CubeView& view, bool over_contexts,
                                            std::size_t index,
                                            std::optional<std::size_t> exclude) {
    std::vector<std::size_t> members = over_contexts
                                           ? view.visible_contexts_for(index)
                                           : view.visible_perturbations_in(index);
    if (exclude)
        std::erase(members, *exclude);
    return members;
}

inline void subsample_members(std::vector<std::size_t>& members, std::size_t cap,
                              SplitMix64* rng) {
    if (cap == 0 || !rng || members.size() <= cap) return;
    // Seeded partial Fisher-Yates, then restored to ascending order.
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng->bounded(members.size() - i));
        std::swap(members[i], members[j]);
    }
    members.resize(cap);
    std::sort(members.begin(), members.end());
}

inline void fill_branch_row(std::span<double> dst, std::span<const double> delta,
                            std::size_t onehot_index, std::size_t n_genes) {
    std::copy(delta.begin(), delta.end(), dst.begin());
    std::fill(dst.begin() + n_genes, dst.end(), 0.0);
    dst[n_genes + onehot_index] = 1.0;
}

/// Build grouped encoder inputs for a batch of (context, perturbation)
/// pairs. `for_perturbation` selects the perturbation encoder (aggregating
/// over contexts) versus the context encoder (aggregating over
/// perturbations).
inline AggBatch build_agg_batch(const CubeView& view, const C3tlSpec& spec,
                                std::span<const PairKey> pairs, bool for_perturbation,
                                std::size_t subsample_cap = 0,
                                SplitMix64* subsample_rng = nullptr) {
    const std::size_t d = spec.n_genes;
    const std::size_t onehot_width =
        for_perturbation ? spec.n_contexts : spec.n_perturbations;

    AggBatch batch;
    batch.pair_group.resize(pairs.size());
    // Group key: (aggregated index, excluded member or npos).
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> group_ids;
    std::vector<std::vector<std::size_t>> group_members;
    std::vector<std::size_t> group_index;  // aggregated index per group

    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto [c, p] = pairs[i];
        const std::size_t index = for_perturbation ? p : c;
        std::optional<std::size_t> exclude;
        if (spec.mask_target_in_aggregation || view.is_test_pair(c, p))
            exclude = for_perturbation ? c : p;
        const std::pair<std::size_t, std::size_t> key{index,
                                                      exclude ? *exclude : npos};
        auto it = group_ids.find(key);
        if (it == group_ids.end()) {
            auto members = agg_members(view, for_perturbation, index, exclude);
            subsample_members(members, subsample_cap, subsample_rng);
            if (members.empty()) {
                const char* what = for_perturbation ? "perturbation " : "context ";
                throw EmptyAggregationError(
                    std::string("empty aggregation set for ") + what +
                    std::to_string(index) +
                    (exclude ? " (target pair excluded)" : ""));
            }
            it = group_ids.emplace(key, group_members.size()).first;
            group_members.push_back(std::move(members));
            group_index.push_back(index);
        }
        batch.pair_group[i] = it->second;
    }

    std::size_t total_rows = 0;
    batch.offsets.push_back(0);
    for (const auto& m : group_members) {
        total_rows += m.size();
        batch.offsets.push_back(total_rows);
    }
    batch.branch_inputs = Matrix(total_rows, d + onehot_width);
    std::size_t row = 0;
    for (std::size_t g = 0; g < group_members.size(); ++g) {
        for (std::size_t member : group_members[g]) {
            const std::size_t c = for_perturbation ? member : group_index[g];
            const std::size_t p = for_perturbation ? group_index[g] : member;
            fill_branch_row(batch.branch_inputs.row(row), view.row(c, p), member, d);
            ++row;
        }
    }
    return batch;
}

/// Group means of encoder outputs, one row per group.
inline Matrix group_means(const Matrix& outputs, const std::vector<std::size_t>& offsets) {
    Matrix out(offsets.size() - 1, outputs.cols());
    for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
        const Matrix m = mean_row_range(outputs, offsets[g], offsets[g + 1]);
        std::copy(m.row(0).begin(), m.row(0).end(), out.row(g).begin());
    }
    return out;
}

struct ForwardState {
    AggBatch z_batch;
    AggBatch psi_batch;
    MlpCache z_cache;
    MlpCache psi_cache;
    MlpCache gamma_cache;
    Matrix latent_sums;  // batch x q
    Matrix predictions;  // batch x d
};

inline void forward_pairs(const C3tlParams& params, const CubeView& view,
                          std::span<const PairKey> pairs, ForwardState& state,
                          std::size_t subsample_cap = 0,
                          SplitMix64* subsample_rng = nullptr) {
    const C3tlSpec& spec = params.spec;
    state.z_batch =
        build_agg_batch(view, spec, pairs, true, subsample_cap, subsample_rng);
    state.psi_batch =
        build_agg_batch(view, spec, pairs, false, subsample_cap, subsample_rng);
    const Matrix z_out =
        mlp_forward_cached(params.theta_z, state.z_batch.branch_inputs, state.z_cache);
    const Matrix psi_out = mlp_forward_cached(params.theta_psi,
                                              state.psi_batch.branch_inputs,
                                              state.psi_cache);
    const Matrix z_means = group_means(z_out, state.z_batch.offsets);
    const Matrix psi_means = group_means(psi_out, state.psi_batch.offsets);
    state.latent_sums = Matrix(pairs.size(), spec.latent_dim);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto zr = z_means.row(state.z_batch.pair_group[i]);
        const auto pr = psi_means.row(state.psi_batch.pair_group[i]);
        auto dst = state.latent_sums.row(i);
        for (std::size_t j = 0; j < spec.latent_dim; ++j) dst[j] = zr[j] + pr[j];
    }
    state.predictions =
        mlp_forward_cached(params.gamma, state.latent_sums, state.gamma_cache);
}

/// Scatter per-pair latent gradients back through one encoder's aggregation:
/// each branch of a group with m members receives 1/m of the group's
/// accumulated upstream gradient.
inline Matrix branch_upstream(const AggBatch& batch, const Matrix& latent_grads,
                              std::size_t latent_dim) {
    const std::size_t n_groups = batch.offsets.size() - 1;
    Matrix group_grad(n_groups, latent_dim);
    for (std::size_t i = 0; i < batch.pair_group.size(); ++i) {
        const auto src = latent_grads.row(i);
        auto dst = group_grad.row(batch.pair_group[i]);
        for (std::size_t j = 0; j < latent_dim; ++j) dst[j] += src[j];
    }
    Matrix upstream(batch.branch_inputs.rows(), latent_dim);
    for (std::size_t g = 0; g < n_groups; ++g) {
        const double inv_m =
            1.0 / static_cast<double>(batch.offsets[g + 1] - batch.offsets[g]);
        const auto src = group_grad.row(g);
        for (std::size_t r = batch.offsets[g]; r < batch.offsets[g + 1]; ++r) {
            auto dst = upstream.row(r);
            for (std::size_t j = 0; j < latent_dim; ++j) dst[j] = src[j] * inv_m;
        }
    }
    return upstream;
}

}  // namespace detail

/// Mean over visible contexts of the perturbation encoder applied to
/// (delta, one-hot context) rows, summed in ascending context order.
inline Matrix encode_perturbation(const C3tlParams& params, const CubeView& view,
                                  std::size_t p,
                                  std::optional<std::size_t> exclude_context = {}) {
    const C3tlSpec& spec = params.spec;
    auto members = detail::agg_members(view, true, p, exclude_context);
    if (members.empty())
        throw EmptyAggregationError("perturbation " + std::to_string(p) +
                                    " is observed in no visible context");
    Matrix inputs(members.size(), spec.n_genes + spec.n_contexts);
    for (std::size_t i = 0; i < members.size(); ++i)
        detail::fill_branch_row(inputs.row(i), view.row(members[i], p), members[i],
                                spec.n_genes);
    const Matrix outputs = mlp_forward(params.theta_z, inputs);
    return mean_row_range(outputs, 0, outputs.rows());
}

/// Symmetric construction over the perturbations visible in a context.
inline Matrix encode_context(const C3tlParams& params, const CubeView& view,
                             std::size_t c,
                             std::optional<std::size_t> exclude_perturbation = {}) {
    const C3tlSpec& spec = params.spec;
    auto members = detail::agg_members(view, false, c, exclude_perturbation);
    if (members.empty())
        throw EmptyAggregationError("context " + std::to_string(c) +
                                    " observes no visible perturbation");
    Matrix inputs(members.size(), spec.n_genes + spec.n_perturbations);
    for (std::size_t i = 0; i < members.size(); ++i)
        detail::fill_branch_row(inputs.row(i), view.row(c, members[i]), members[i],
                                spec.n_genes);
    const Matrix outputs = mlp_forward(params.theta_psi, inputs);
    return mean_row_range(outputs, 0, outputs.rows());
}

/// Decoder over the element-wise sum of the two latents.
inline Matrix decode(const C3tlParams& params, const Matrix& z, const Matrix& psi) {
    if (z.rows() != 1 || psi.rows() != 1 || z.cols() != params.spec.latent_dim ||
        psi.cols() != params.spec.latent_dim)
        throw DimensionError("decode: latents must be 1 x latent_dim");
    return mlp_forward(params.gamma, z + psi);
}

/// Full pipeline prediction of the perturbation effect for (p, c). The target
/// pair is excluded from both aggregation sets when the model spec masks
/// targets or when (p, c) carries role Test under the view's plan.
inline Matrix predict(const C3tlParams& params, const CubeView& view, std::size_t p,
                      std::size_t c) {
    const bool exclude =
        params.spec.mask_target_in_aggregation || view.is_test_pair(c, p);
    const Matrix z = encode_perturbation(params, view, p,
                                         exclude ? std::optional<std::size_t>(c)
                                                 : std::nullopt);
    const Matrix psi = encode_context(params, view, c,
                                      exclude ? std::optional<std::size_t>(p)
                                              : std::nullopt);
    return decode(params, z, psi);
}

/// Mean over the batch of squared l2 distance between prediction and the
/// observed delta.
inline double loss(const C3tlParams& params, const CubeView& view,
                   std::span<const PairKey> batch) {
    if (batch.empty()) throw EmptyAggregationError("loss: empty batch");
    detail::ForwardState state;
    detail::forward_pairs(params, view, batch, state);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto target = view.row(batch[i].first, batch[i].second);
        const auto pred = state.predictions.row(i);
        for (std::size_t g = 0; g < target.size(); ++g) {
            const double diff = pred[g] - target[g];
            acc += diff * diff;
        }
    }
    return acc / static_cast<double>(batch.size());
}

/// Batch loss and exact gradients for every parameter, sharing one forward
/// pass. Used by the training loop and by gradient-check tests.
inline std::pair<double, C3tlGrads> loss_and_gradients(
    const C3tlParams& params, const CubeView& view, std::span<const PairKey> batch,
    std::size_t subsample_cap = 0, SplitMix64* subsample_rng = nullptr) {
    if (batch.empty()) throw EmptyAggregationError("loss: empty batch");
    detail::ForwardState state;
    detail::forward_pairs(params, view, batch, state, subsample_cap, subsample_rng);

    const std::size_t d = params.spec.n_genes;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    Matrix upstream(batch.size(), d);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto target = view.row(batch[i].first, batch[i].second);
        const auto pred = state.predictions.row(i);
        auto up = upstream.row(i);
        for (std::size_t g = 0; g < d; ++g) {
            const double diff = pred[g] - target[g];
            acc += diff * diff;
            up[g] = 2.0 * diff * inv_b;
        }
    }

    C3tlGrads grads;
    auto [gamma_grads, latent_grads] =
        mlp_backward_cached(params.gamma, state.gamma_cache, upstream);
    grads.gamma = std::move(gamma_grads);
    const Matrix z_up =
        detail::branch_upstream(state.z_batch, latent_grads, params.spec.latent_dim);
    const Matrix psi_up = detail::branch_upstream(state.psi_batch, latent_grads,
                                                  params.spec.latent_dim);
    grads.theta_z =
        mlp_backward_cached(params.theta_z, state.z_cache, z_up).first;
    grads.theta_psi =
        mlp_backward_cached(params.theta_psi, state.psi_cache, psi_up).first;
    return {acc * inv_b, std::move(grads)};
}

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 0;
    std::size_t patience = 20;          // epochs without val improvement
    std::size_t aggregation_subsample = 0;  // 0 = aggregate over the full set

    void validate() const {
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        adam.validate();
    }
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

struct TrainResult {
    C3tlParams params;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;  // 0 when no validation pairs exist
};

/// Minibatch training over train + adapt_train pairs. adapt_val pairs drive
/// early stopping and checkpoint selection; with no adapt_val pairs the final
/// epoch's parameters are returned. Deterministic given the config seed.
///
/// `resume` continues from existing parameters, numbering epochs from
/// `first_epoch` + 1.
inline TrainResult train(const PerturbationCube& cube, const SplitPlan& plan,
                         const C3tlSpec& spec, const TrainConfig& config,
                         const C3tlParams* resume = nullptr,
                         std::size_t first_epoch = 0) {
    spec.validate();
    config.validate();
    if (spec.n_contexts != cube.n_contexts ||
        spec.n_perturbations != cube.n_perturbations || spec.n_genes != cube.n_genes)
        throw DimensionError("train: model spec dims disagree with cube dims");

    const CubeView view = CubeView::training(cube, plan);
    const std::vector<PairKey> fit_pairs =
        plan.pairs_with_roles({Role::Train, Role::AdaptTrain});
    const std::vector<PairKey> val_pairs = plan.pairs_with_role(Role::AdaptVal);
    if (fit_pairs.empty())
        throw ConfigError("train: no train or adapt_train pairs in plan");

    TrainResult result;
    result.params = resume ? *resume : init_params(spec, derive_seed(config.seed, "init"));
    result.params.validate();
    if (resume && resume->spec != spec)
        throw DimensionError("train: resume parameters disagree with spec");

    OptimizerState opt =
        OptimizerState::create(config.adam, result.params.flatten());

    C3tlParams best_params = result.params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;

    std::vector<PairKey> order = fit_pairs;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        const std::size_t epoch_number = first_epoch + e + 1;
        const auto t0 = std::chrono::steady_clock::now();

        SplitMix64 shuffle_rng(derive_seed(config.seed, "epoch", epoch_number));
        shuffle_rng.shuffle(order);
        SplitMix64 subsample_rng(derive_seed(config.seed, "subsample", epoch_number));
        SplitMix64* sub = config.aggregation_subsample > 0 ? &subsample_rng : nullptr;

        double loss_sum = 0.0;
        const auto params_pack = result.params.flatten();
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t len = std::min(config.batch_size, order.size() - start);
            const std::span<const PairKey> batch(order.data() + start, len);
            auto [batch_loss, grads] = loss_and_gradients(
                result.params, view, batch, config.aggregation_subsample, sub);
            loss_sum += batch_loss * static_cast<double>(len);
            optimizer_step(opt, params_pack, grads.flatten());
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_pairs.empty()) val_loss = loss(result.params, view, val_pairs);

        const auto t1 = std::chrono::steady_clock::now();
        result.log.push_back(
            {epoch_number, train_loss, val_loss,
             std::chrono::duration<double>(t1 - t0).count()});

        if (!std::isfinite(train_loss) ||
            (!val_pairs.empty() && !std::isfinite(val_loss)))
            throw TrainingDivergedError(
                "training diverged (non-finite loss) at epoch " +
                    std::to_string(epoch_number),
                epoch_number);

        if (!val_pairs.empty()) {
            if (val_loss < best_val) {
                best_val = val_loss;
                best_params = result.params;
                result.best_epoch = epoch_number;
                stale_epochs = 0;
            } else if (++stale_epochs >= config.patience) {
                break;
            }
        }
    }

    if (!val_pairs.empty()) result.params = std::move(best_params);
    return result;
}

}  // namespace c3tl
