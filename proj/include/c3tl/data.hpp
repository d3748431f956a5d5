#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace c3tl {

/// One cell's expression profile. Perturbation id 0 is the unperturbed
/// control; ids 1..P are actual perturbations.
struct CellRecord {
    std::size_t context_id = 0;
    std::size_t perturbation_id = 0;
    std::vector<double> expression;
};

/// Per-(context, perturbation) mean expression over cells, including the
/// control group (P+1 perturbation slots per context). counts of zero mark
/// unobserved groups.
struct PseudobulkResult {
    std::size_t n_contexts = 0;
    std::size_t n_groups = 0;  // P + 1, slot 0 is the control
    std::size_t n_genes = 0;
    std::vector<double> means;        // [c * n_groups * d]
    std::vector<std::size_t> counts;  // [c * n_groups]

    std::span<const double> mean_row(std::size_t c, std::size_t g) const {
        return {means.data() + (c * n_groups + g) * n_genes, n_genes};
    }
    std::span<double> mean_row(std::size_t c, std::size_t g) {
        return {means.data() + (c * n_groups + g) * n_genes, n_genes};
    }
    std::size_t count(std::size_t c, std::size_t g) const {
        return counts[c * n_groups + g];
    }
    bool observed(std::size_t c, std::size_t g) const { return count(c, g) > 0; }
};

/// Group cells by (context, perturbation) and average their expression.
/// Empty groups are flagged via a zero count, never an error.
inline PseudobulkResult pseudobulk(std::span<const CellRecord> records,
                                   std::size_t n_contexts, std::size_t n_perturbations,
                                   std::size_t n_genes) {
    PseudobulkResult out;
    out.n_contexts = n_contexts;
    out.n_groups = n_perturbations + 1;
    out.n_genes = n_genes;
    out.means.assign(n_contexts * out.n_groups * n_genes, 0.0);
    out.counts.assign(n_contexts * out.n_groups, 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const CellRecord& r = records[i];
        if (r.context_id >= n_contexts)
            throw BoundError("pseudobulk: record " + std::to_string(i) +
                             " context id out of range");
        if (r.perturbation_id >= out.n_groups)
            throw BoundError("pseudobulk: record " + std::to_string(i) +
                             " perturbation id out of range");
        if (r.expression.size() != n_genes)
            throw DimensionError("pseudobulk: record " + std::to_string(i) +
                                 " expression length != n_genes");
        auto row = out.mean_row(r.context_id, r.perturbation_id);
        for (std::size_t g = 0; g < n_genes; ++g) row[g] += r.expression[g];
        ++out.counts[r.context_id * out.n_groups + r.perturbation_id];
    }
    for (std::size_t c = 0; c < n_contexts; ++c)
        for (std::size_t g = 0; g < out.n_groups; ++g) {
            const std::size_t n = out.count(c, g);
            if (n == 0) continue;
            auto row = out.mean_row(c, g);
            for (double& v : row) v /= static_cast<double>(n);
        }
    return out;
}

/// Observed delta-expression tensor over (context, perturbation, gene) with
/// an observation mask. Perturbation axis indexes non-control perturbations:
/// cube index j corresponds to raw perturbation id j+1.
struct PerturbationCube {
    std::size_t n_contexts = 0;
    std::size_t n_perturbations = 0;
    std::size_t n_genes = 0;
    std::vector<double> deltas;          // [c * P * d]
    std::vector<std::uint8_t> observed;  // [c * P]
    std::vector<std::string> context_names;       // optional, empty = unnamed
    std::vector<std::string> perturbation_names;  // optional
    std::vector<std::string> gene_names;          // optional

    bool is_observed(std::size_t c, std::size_t p) const {
        return observed[c * n_perturbations + p] != 0;
    }
    void set_observed(std::size_t c, std::size_t p, bool v = true) {
        observed[c * n_perturbations + p] = v ? 1 : 0;
    }
    std::span<const double> delta_row(std::size_t c, std::size_t p) const {
        return {deltas.data() + (c * n_perturbations + p) * n_genes, n_genes};
    }
    std::span<double> delta_row(std::size_t c, std::size_t p) {
        return {deltas.data() + (c * n_perturbations + p) * n_genes, n_genes};
    }

    /// Stable identifier used to seed per-context random streams; falls back
    /// to the positional index when the cube carries no labels.
    std::string context_key(std::size_t c) const {
        return context_names.empty() ? "c" + std::to_string(c) : context_names[c];
    }

    std::size_t n_observed() const {
        std::size_t n = 0;
        for (auto v : observed) n += v != 0;
        return n;
    }

    static PerturbationCube empty(std::size_t c, std::size_t p, std::size_t d) {
        PerturbationCube cube;
        cube.n_contexts = c;
        cube.n_perturbations = p;
        cube.n_genes = d;
        cube.deltas.assign(c * p * d, 0.0);
        cube.observed.assign(c * p, 0);
        return cube;
    }

    /// Checks the structural invariants: finite deltas wherever observed,
    /// every perturbation observed in some context, every context observing
    /// some perturbation.
    void validate() const {
        if (deltas.size() != n_contexts * n_perturbations * n_genes ||
            observed.size() != n_contexts * n_perturbations)
            throw DimensionError("cube: storage sizes inconsistent with dims");
        std::vector<bool> pert_seen(n_perturbations, false);
        for (std::size_t c = 0; c < n_contexts; ++c) {
            bool any = false;
            for (std::size_t p = 0; p < n_perturbations; ++p) {
                if (!is_observed(c, p)) continue;
                any = true;
                pert_seen[p] = true;
                for (double v : delta_row(c, p))
                    if (!std::isfinite(v))
                        throw Error("cube: non-finite delta at context " +
                                    std::to_string(c) + ", perturbation " +
                                    std::to_string(p));
            }
            if (!any)
                throw Error("cube: context " + std::to_string(c) +
                            " observes no perturbation");
        }
        for (std::size_t p = 0; p < n_perturbations; ++p)
            if (!pert_seen[p])
                throw Error("cube: perturbation " + std::to_string(p) +
                            " observed in no context");
    }
};

/// Per-context deltas of perturbed means against the control mean. Requires
/// the control group wherever a context has observed perturbations.
inline PerturbationCube compute_deltas(const PseudobulkResult& pb) {
    const std::size_t P = pb.n_groups - 1;
    PerturbationCube cube = PerturbationCube::empty(pb.n_contexts, P, pb.n_genes);
    for (std::size_t c = 0; c < pb.n_contexts; ++c) {
        bool any = false;
        for (std::size_t p = 1; p <= P; ++p) any = any || pb.observed(c, p);
        if (!any) continue;
        if (!pb.observed(c, 0))
            throw MissingControlError("context " + std::to_string(c) +
                                      " has observed perturbations but no control "
                                      "(perturbation 0) cells");
        const auto control = pb.mean_row(c, 0);
        for (std::size_t p = 1; p <= P; ++p) {
            if (!pb.observed(c, p)) continue;
            auto dst = cube.delta_row(c, p - 1);
            const auto mean = pb.mean_row(c, p);
            for (std::size_t g = 0; g < pb.n_genes; ++g) dst[g] = mean[g] - control[g];
            cube.set_observed(c, p - 1);
        }
    }
    return cube;
}

/// Top-k genes by variance of delta values over visible (context,
/// perturbation) pairs, ties broken by ascending gene index. `indices` is
/// sorted ascending; `variances` covers all genes.
struct GeneSelection {
    std::vector<std::size_t> indices;
    std::vector<double> variances;
};

/// The visibility predicate defaults to "every observed pair"; pipelines pass
/// a split-aware view so test pairs never influence gene selection.
inline GeneSelection select_hvg(
    const PerturbationCube& cube, std::size_t k,
    const std::function<bool(std::size_t, std::size_t)>& visible = nullptr) {
    if (k > cube.n_genes)
        throw BoundError("select_hvg: k = " + std::to_string(k) + " exceeds " +
                         std::to_string(cube.n_genes) + " genes");
    const std::size_t d = cube.n_genes;
    std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
    std::size_t n = 0;
    for (std::size_t c = 0; c < cube.n_contexts; ++c)
        for (std::size_t p = 0; p < cube.n_perturbations; ++p) {
            if (!cube.is_observed(c, p)) continue;
            if (visible && !visible(c, p)) continue;
            const auto row = cube.delta_row(c, p);
            for (std::size_t g = 0; g < d; ++g) {
                sum[g] += row[g];
                sum_sq[g] += row[g] * row[g];
            }
            ++n;
        }
    GeneSelection sel;
    sel.variances.assign(d, 0.0);
    if (n > 0) {
        for (std::size_t g = 0; g < d; ++g) {
            const double mean = sum[g] / static_cast<double>(n);
            const double var = sum_sq[g] / static_cast<double>(n) - mean * mean;
            sel.variances[g] = var > 0.0 ? var : 0.0;
        }
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sel.variances[a] != sel.variances[b])
            return sel.variances[a] > sel.variances[b];
        return a < b;
    });
    sel.indices.assign(order.begin(), order.begin() + k);
    std::sort(sel.indices.begin(), sel.indices.end());
    return sel;
}

/// Cube restricted to the selected genes, in selection order.
inline PerturbationCube project_genes(const PerturbationCube& cube,
                                      const GeneSelection& sel) {
    PerturbationCube out = PerturbationCube::empty(
        cube.n_contexts, cube.n_perturbations, sel.indices.size());
    out.observed = cube.observed;
    out.context_names = cube.context_names;
    out.perturbation_names = cube.perturbation_names;
    for (std::size_t g : sel.indices)
        if (g >= cube.n_genes) throw BoundError("project_genes: index out of range");
    if (!cube.gene_names.empty())
        for (std::size_t g : sel.indices) out.gene_names.push_back(cube.gene_names[g]);
    for (std::size_t c = 0; c < cube.n_contexts; ++c)
        for (std::size_t p = 0; p < cube.n_perturbations; ++p) {
            if (!cube.is_observed(c, p)) continue;
            const auto src = cube.delta_row(c, p);
            auto dst = out.delta_row(c, p);
            for (std::size_t j = 0; j < sel.indices.size(); ++j)
                dst[j] = src[sel.indices[j]];
        }
    return out;
}

/// Cube restricted to a subset of contexts (ascending original order is
/// preserved by passing `kept` sorted). Context names are synthesized from
/// original indices when absent so seeded per-context streams stay stable
/// under restriction.
inline PerturbationCube restrict_contexts(const PerturbationCube& cube,
                                          const std::vector<std::size_t>& kept) {
    if (kept.empty()) throw BoundError("restrict_contexts: empty context set");
    PerturbationCube out =
        PerturbationCube::empty(kept.size(), cube.n_perturbations, cube.n_genes);
    out.perturbation_names = cube.perturbation_names;
    out.gene_names = cube.gene_names;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t c = kept[i];
        if (c >= cube.n_contexts)
            throw BoundError("restrict_contexts: context index out of range");
        out.context_names.push_back(cube.context_key(c));
        for (std::size_t p = 0; p < cube.n_perturbations; ++p) {
            if (!cube.is_observed(c, p)) continue;
            auto dst = out.delta_row(i, p);
            const auto src = cube.delta_row(c, p);
            std::copy(src.begin(), src.end(), dst.begin());
            out.set_observed(i, p);
        }
    }
    return out;
}

/// Optional preprocessing pass: drop perturbations whose delta vectors are
/// exactly equal to an earlier perturbation's across every context both
/// observe (requiring at least one shared context). Keeps the lowest index.
/// Returns the kept perturbation indices alongside the pruned cube.
inline PerturbationCube prune_duplicate_perturbations(
    const PerturbationCube& cube, std::vector<std::size_t>* kept_out = nullptr) {
    std::vector<std::size_t> kept;
    for (std::size_t p = 0; p < cube.n_perturbations; ++p) {
        bool duplicate = false;
        for (std::size_t q : kept) {
            std::size_t shared = 0;
            bool equal = true;
            for (std::size_t c = 0; c < cube.n_contexts && equal; ++c) {
                if (!cube.is_observed(c, p) || !cube.is_observed(c, q)) continue;
                ++shared;
                const auto a = cube.delta_row(c, p);
                const auto b = cube.delta_row(c, q);
                equal = std::equal(a.begin(), a.end(), b.begin());
            }
            if (shared > 0 && equal) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(p);
    }
    PerturbationCube out =
        PerturbationCube::empty(cube.n_contexts, kept.size(), cube.n_genes);
    out.context_names = cube.context_names;
    out.gene_names = cube.gene_names;
    if (!cube.perturbation_names.empty())
        for (std::size_t p : kept)
            out.perturbation_names.push_back(cube.perturbation_names[p]);
    for (std::size_t c = 0; c < cube.n_contexts; ++c)
        for (std::size_t j = 0; j < kept.size(); ++j) {
            if (!cube.is_observed(c, kept[j])) continue;
            const auto src = cube.delta_row(c, kept[j]);
            auto dst = out.delta_row(c, j);
            std::copy(src.begin(), src.end(), dst.begin());
            out.set_observed(c, j);
        }
    if (kept_out) *kept_out = std::move(kept);
    return out;
}

}  // namespace c3tl
