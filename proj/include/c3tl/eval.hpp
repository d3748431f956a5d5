#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "split.hpp"
#include "view.hpp"

namespace c3tl {

/// Sample Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x,
                                     std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("pearson: length mismatch");
    if (x.size() < 2) throw BoundError("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Correlation axis: per gene across test pairs (default, the reported
/// convention) or per pair across genes.
enum class CorrelationMode { PerGene, PerPair };

inline std::string to_string(CorrelationMode m) {
    return m == CorrelationMode::PerGene ? "per_gene" : "per_pair";
}

inline CorrelationMode correlation_mode_from_string(const std::string& s) {
    if (s == "per_gene") return CorrelationMode::PerGene;
    if (s == "per_pair") return CorrelationMode::PerPair;
    throw ConfigError("unknown correlation mode '" + s + "'");
}

struct MetricsReport {
    std::vector<double> per_gene_pearson;  // NaN marks undefined correlations
    double mean_pearson = 0.0;             // mean over defined entries
    double mse = 0.0;
    std::size_t n_test_pairs = 0;
    std::size_t n_excluded = 0;  // zero-variance entries left out of the mean
    CorrelationMode mode = CorrelationMode::PerGene;
    // Run metadata.
    std::string model;
    std::size_t fold = 0;
    std::uint64_t seed = 0;
    double seconds_per_epoch = 0.0;
};

using PredictionMap = std::map<PairKey, std::vector<double>>;

/// Score predictions against the cube's test pairs. Predictions must cover
/// exactly the pairs with role Test; anything else is a coverage error, so
/// no training-role target can leak into a report.
inline MetricsReport score_predictions(const PredictionMap& preds,
                                       const PerturbationCube& cube,
                                       const SplitPlan& plan,
                                       CorrelationMode mode = CorrelationMode::PerGene) {
    const std::vector<PairKey> test_pairs = plan.pairs_with_role(Role::Test);
    if (preds.size() != test_pairs.size()) {
        for (const auto& [key, unused] : preds) {
            if (!plan.in_range(key.first, key.second) ||
                !plan.has_role(key.first, key.second) ||
                plan.role(key.first, key.second) != Role::Test)
                throw CoverageError(
                    "score_predictions: prediction for non-test pair (context " +
                    std::to_string(key.first) + ", perturbation " +
                    std::to_string(key.second) + ")");
        }
        throw CoverageError("score_predictions: expected " +
                            std::to_string(test_pairs.size()) + " test pairs, got " +
                            std::to_string(preds.size()));
    }
    const CubeView view = CubeView::evaluation(cube, plan);
    const std::size_t d = cube.n_genes;
    const std::size_t n = test_pairs.size();

    std::vector<const std::vector<double>*> pred_rows;
    pred_rows.reserve(n);
    for (const PairKey& key : test_pairs) {
        const auto it = preds.find(key);
        if (it == preds.end())
            throw CoverageError("score_predictions: missing prediction for test pair "
                                "(context " +
                                std::to_string(key.first) + ", perturbation " +
                                std::to_string(key.second) + ")");
        if (it->second.size() != d)
            throw DimensionError("score_predictions: prediction length != n_genes");
        pred_rows.push_back(&it->second);
    }

    MetricsReport report;
    report.mode = mode;
    report.n_test_pairs = n;

    double sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto target = view.row(test_pairs[i].first, test_pairs[i].second);
        const auto& pred = *pred_rows[i];
        for (std::size_t g = 0; g < d; ++g) {
            const double diff = pred[g] - target[g];
            sq_sum += diff * diff;
        }
    }
    report.mse = sq_sum / static_cast<double>(n * d);

    const std::size_t n_series = mode == CorrelationMode::PerGene ? d : n;
    const std::size_t series_len = mode == CorrelationMode::PerGene ? n : d;
    if (series_len < 2)
        throw BoundError("score_predictions: need at least 2 entries per "
                         "correlation series");
    std::vector<double> xs(series_len), ys(series_len);
    double corr_sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t s = 0; s < n_series; ++s) {
        for (std::size_t t = 0; t < series_len; ++t) {
            const std::size_t pair_idx = mode == CorrelationMode::PerGene ? t : s;
            const std::size_t gene_idx = mode == CorrelationMode::PerGene ? s : t;
            const auto target =
                view.row(test_pairs[pair_idx].first, test_pairs[pair_idx].second);
            xs[t] = (*pred_rows[pair_idx])[gene_idx];
            ys[t] = target[gene_idx];
        }
        const auto r = pearson(xs, ys);
        if (r) {
            report.per_gene_pearson.push_back(*r);
            corr_sum += *r;
            ++defined;
        } else {
            report.per_gene_pearson.push_back(
                std::numeric_limits<double>::quiet_NaN());
            ++report.n_excluded;
        }
    }
    report.mean_pearson = defined > 0
                              ? corr_sum / static_cast<double>(defined)
                              : std::numeric_limits<double>::quiet_NaN();
    return report;
}

/// A trainable or closed-form predictor: fills predictions for the requested
/// pairs given a cube and split plan, reading only non-test entries.
struct Runner {
    std::string name;
    std::function<PredictionMap(const PerturbationCube&, const SplitPlan&,
                                const std::vector<PairKey>&, std::uint64_t)>
        run;
};

struct CvConfig {
    double adapt_fraction = 0.10;
    std::uint64_t seed = 0;
    CorrelationMode mode = CorrelationMode::PerGene;
};

struct CvResult {
    std::vector<MetricsReport> folds;
    std::vector<SplitPlan> plans;  // the split each fold ran under
    double pearson_mean = 0.0;
    double pearson_std = 0.0;
    double mse_mean = 0.0;
    double mse_std = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_and_sample_std(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace detail

/// Leave-context-out cross-validation: one split per fold of held-out test
/// contexts, train/score with the given runner, aggregate mean and sample
/// standard deviation across folds. Fold r derives its seed as
/// derive_seed(seed, "fold", r); the split uses derive_seed(run_seed,
/// "split") and the runner derive_seed(run_seed, runner.name).
inline CvResult run_cv(const PerturbationCube& cube,
                       const std::vector<std::vector<std::size_t>>& folds,
                       const Runner& runner, const CvConfig& config) {
    if (folds.empty()) throw ConfigError("run_cv: no folds given");
    std::vector<bool> used(cube.n_contexts, false);
    for (const auto& fold : folds) {
        if (fold.empty()) throw ConfigError("run_cv: empty fold");
        for (std::size_t c : fold) {
            if (c >= cube.n_contexts) throw BoundError("run_cv: fold context out of range");
            if (used[c]) throw ConfigError("run_cv: folds must be disjoint");
            used[c] = true;
        }
    }
    CvResult result;
    std::vector<double> pearsons, mses;
    for (std::size_t r = 0; r < folds.size(); ++r) {
        const std::uint64_t run_seed = derive_seed(config.seed, "fold", r);
        const SplitPlan plan = make_split(cube, folds[r], config.adapt_fraction,
                                          derive_seed(run_seed, "split"));
        const std::vector<PairKey> test_pairs = plan.pairs_with_role(Role::Test);
        if (test_pairs.empty())
            throw DegenerateSplitError("run_cv: fold " + std::to_string(r) +
                                       " has no test pairs");
        const PredictionMap preds = runner.run(
            cube, plan, test_pairs, derive_seed(run_seed, runner.name));
        MetricsReport report = score_predictions(preds, cube, plan, config.mode);
        report.model = runner.name;
        report.fold = r;
        report.seed = run_seed;
        pearsons.push_back(report.mean_pearson);
        mses.push_back(report.mse);
        result.folds.push_back(std::move(report));
        result.plans.push_back(plan);
    }
    std::tie(result.pearson_mean, result.pearson_std) =
        detail::mean_and_sample_std(pearsons);
    std::tie(result.mse_mean, result.mse_std) = detail::mean_and_sample_std(mses);
    return result;
}

/// Grid for the data-scarcity sweep: nested training-context subsets crossed
/// with nested adaptation fractions.
struct SweepGrid {
    std::vector<std::size_t> context_counts;
    std::vector<double> adaptation_fractions;  // strictly decreasing
    std::size_t n_test_contexts = 2;
    std::size_t repeats = 1;

    void validate() const {
        if (context_counts.empty() || adaptation_fractions.empty())
            throw ConfigError("SweepGrid: context_counts and adaptation_fractions "
                              "must be non-empty");
        if (n_test_contexts == 0 || repeats == 0)
            throw ConfigError("SweepGrid: n_test_contexts and repeats must be >= 1");
        for (std::size_t i = 1; i < adaptation_fractions.size(); ++i)
            if (!(adaptation_fractions[i] < adaptation_fractions[i - 1]))
                throw ConfigError(
                    "SweepGrid: adaptation fractions must be strictly decreasing");
    }
};

struct SweepRow {
    std::string model;
    std::size_t n_train_contexts = 0;
    double adapt_fraction = 0.0;
    std::size_t fold = 0;
    double mean_pearson = 0.0;
    double mse = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> skipped;         // degenerate cells, with reasons
    std::vector<std::size_t> test_contexts;   // chosen held-out contexts
    std::vector<std::size_t> train_order;     // shuffled candidates; prefixes nest
};

/// Data-scarcity sensitivity sweep. Test contexts are a seeded draw from the
/// cube; training subsets are prefixes of one seeded shuffle of the
/// remaining contexts, so smaller training sets are contained in larger
/// ones. Adaptation splits per test context are nested across fractions.
/// Every cell is scored on the common test set (the one belonging to the
/// largest adaptation fraction), which is unseen at every grid cell, so
/// numbers are comparable across the whole grid.
inline SweepResult run_sensitivity_sweep(const PerturbationCube& cube,
                                         const SweepGrid& grid,
                                         std::span<const Runner> runners,
                                         std::uint64_t seed,
                                         CorrelationMode mode = CorrelationMode::PerGene) {
    grid.validate();
    if (runners.empty()) throw ConfigError("sweep: no runners");
    if (grid.n_test_contexts >= cube.n_contexts)
        throw ConfigError("sweep: n_test_contexts must leave training contexts");

    SweepResult result;
    {
        std::vector<std::size_t> all(cube.n_contexts);
        std::iota(all.begin(), all.end(), 0);
        SplitMix64 rng(derive_seed(seed, "sweep-test-contexts"));
        rng.shuffle(all);
        result.test_contexts.assign(all.begin(), all.begin() + grid.n_test_contexts);
        std::sort(result.test_contexts.begin(), result.test_contexts.end());
        for (std::size_t c : all)
            if (!std::binary_search(result.test_contexts.begin(),
                                    result.test_contexts.end(), c))
                result.train_order.push_back(c);
        SplitMix64 rng2(derive_seed(seed, "sweep-train-contexts"));
        rng2.shuffle(result.train_order);
    }
    for (std::size_t k : grid.context_counts)
        if (k == 0 || k > result.train_order.size())
            throw ConfigError("sweep: context count " + std::to_string(k) +
                              " exceeds the " +
                              std::to_string(result.train_order.size()) +
                              " available training contexts");

    for (std::size_t rep = 0; rep < grid.repeats; ++rep) {
        const std::uint64_t run_seed = derive_seed(seed, "fold", rep);
        for (std::size_t k : grid.context_counts) {
            std::vector<std::size_t> kept(result.train_order.begin(),
                                          result.train_order.begin() + k);
            kept.insert(kept.end(), result.test_contexts.begin(),
                        result.test_contexts.end());
            std::sort(kept.begin(), kept.end());
            const PerturbationCube sub = restrict_contexts(cube, kept);
            std::vector<std::size_t> sub_test;
            for (std::size_t c : result.test_contexts)
                sub_test.push_back(static_cast<std::size_t>(
                    std::lower_bound(kept.begin(), kept.end(), c) - kept.begin()));

            std::vector<SplitPlan> plans;
            try {
                plans = make_nested_splits(sub, sub_test, grid.adaptation_fractions,
                                           derive_seed(run_seed, "split"));
            } catch (const DegenerateSplitError& e) {
                result.skipped.push_back("contexts=" + std::to_string(k) + " rep=" +
                                         std::to_string(rep) + ": " + e.what());
                continue;
            }
            // Common scored set: the test pairs of the largest fraction,
            // contained in every other fraction's test set.
            const std::vector<PairKey> common_pairs =
                plans.front().pairs_with_role(Role::Test);
            if (common_pairs.empty()) {
                result.skipped.push_back("contexts=" + std::to_string(k) + " rep=" +
                                         std::to_string(rep) + ": empty common test set");
                continue;
            }
            for (std::size_t fi = 0; fi < plans.size(); ++fi) {
                for (const Runner& runner : runners) {
                    const PredictionMap preds =
                        runner.run(sub, plans[fi], common_pairs,
                                   derive_seed(run_seed, runner.name));
                    MetricsReport report =
                        score_predictions(preds, sub, plans.front(), mode);
                    result.rows.push_back({runner.name, k,
                                           grid.adaptation_fractions[fi], rep,
                                           report.mean_pearson, report.mse});
                }
            }
        }
    }

    // Canonical row order: model, then training contexts descending,
    // fraction descending, fold ascending.
    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) {
                         if (a.model != b.model) return a.model < b.model;
                         if (a.n_train_contexts != b.n_train_contexts)
                             return a.n_train_contexts > b.n_train_contexts;
                         if (a.adapt_fraction != b.adapt_fraction)
                             return a.adapt_fraction > b.adapt_fraction;
                         return a.fold < b.fold;
                     });
    return result;
}

}  // namespace c3tl
