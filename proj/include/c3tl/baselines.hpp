#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "split.hpp"
#include "view.hpp"

namespace c3tl {

/// Average of the perturbation's delta over the training contexts that
/// observe it, summed in ascending context order.
inline Matrix mean_baseline(const CubeView& view, std::size_t p,
                            std::span<const std::size_t> training_contexts) {
    std::vector<std::size_t> contexts(training_contexts.begin(),
                                      training_contexts.end());
    std::sort(contexts.begin(), contexts.end());  // canonical summation order
    Matrix acc(1, view.n_genes());
    std::size_t n = 0;
    for (std::size_t c : contexts) {
        if (!view.visible(c, p)) continue;
        const auto row = view.row(c, p);
        for (std::size_t g = 0; g < row.size(); ++g) acc(0, g) += row[g];
        ++n;
    }
    if (n == 0)
        throw EmptyAggregationError("mean baseline: perturbation " + std::to_string(p) +
                                    " observed in no training context");
    acc *= 1.0 / static_cast<double>(n);
    return acc;
}

namespace detail {

inline std::optional<double> flat_pearson(std::span<const double> x,
                                          std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

/// Pearson similarity between a test context and a candidate training
/// context over the flattened deltas of their shared perturbations (the test
/// side restricted to its adaptation set). nullopt when fewer than
/// `min_overlap` perturbations are shared or a side has zero variance.
inline std::optional<double> context_similarity(const CubeView& view,
                                                std::size_t test_context,
                                                std::span<const std::size_t> adaptation,
                                                std::size_t candidate,
                                                std::size_t min_overlap = 2) {
    std::vector<double> a, b;
    std::size_t shared = 0;
    for (std::size_t p : adaptation) {
        if (!view.visible(candidate, p)) continue;
        ++shared;
        const auto ra = view.row(test_context, p);
        const auto rb = view.row(candidate, p);
        a.insert(a.end(), ra.begin(), ra.end());
        b.insert(b.end(), rb.begin(), rb.end());
    }
    if (shared < min_overlap) return std::nullopt;
    return detail::flat_pearson(a, b);
}

/// Predict the delta observed in the training context most similar to the
/// test context, where similarity is Pearson correlation over the shared
/// part of the test context's adaptation set. Ties break toward the lowest
/// context index; candidates must share at least two perturbations and
/// observe p.
inline Matrix closest_cell_baseline(const CubeView& view, const SplitPlan& plan,
                                    std::size_t test_context, std::size_t p) {
    std::vector<std::size_t> adaptation;
    for (std::size_t q = 0; q < plan.n_perturbations; ++q) {
        if (!plan.has_role(test_context, q)) continue;
        const Role r = plan.role(test_context, q);
        if (r == Role::AdaptTrain || r == Role::AdaptVal) adaptation.push_back(q);
    }
    if (adaptation.empty())
        throw NoCandidateError("closest cell: test context " +
                               std::to_string(test_context) + " has no adaptation pairs");

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_context = 0;
    bool found = false;
    for (std::size_t c = 0; c < plan.n_contexts; ++c) {
        if (plan.is_test_context(c)) continue;
        if (!view.visible(c, p)) continue;
        const auto sim = context_similarity(view, test_context, adaptation, c);
        if (!sim) continue;
        if (*sim > best) {
            best = *sim;
            best_context = c;
            found = true;
        }
    }
    if (!found)
        throw NoCandidateError(
            "closest cell: no training context shares >= 2 adaptation "
            "perturbations with context " +
            std::to_string(test_context) + " and observes perturbation " +
            std::to_string(p));
    const auto row = view.row(best_context, p);
    Matrix out(1, row.size());
    std::copy(row.begin(), row.end(), out.row(0).begin());
    return out;
}

}  // namespace c3tl
