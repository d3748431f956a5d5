#pragma once

#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "split.hpp"

namespace c3tl {

/// Read guard over a cube. A view exposes only pairs whose role is in its
/// readable set; reading a masked pair faults with TestIsolationError. The
/// training view hides test pairs from every model-fitting code path, so test
/// leakage is a hard runtime error rather than a convention.
class CubeView {
public:
    static CubeView training(const PerturbationCube& cube, const SplitPlan& plan) {
        return CubeView(cube, &plan,
                        bit(Role::Train) | bit(Role::AdaptTrain) | bit(Role::AdaptVal));
    }

    static CubeView evaluation(const PerturbationCube& cube, const SplitPlan& plan) {
        return CubeView(cube, &plan,
                        bit(Role::Train) | bit(Role::AdaptTrain) | bit(Role::AdaptVal) |
                            bit(Role::Test));
    }

    /// All observed pairs readable; used when no split applies.
    static CubeView full(const PerturbationCube& cube) {
        return CubeView(cube, nullptr, 0xff);
    }

    const PerturbationCube& cube() const { return *cube_; }
    const SplitPlan* plan() const { return plan_; }
    std::size_t n_contexts() const { return cube_->n_contexts; }
    std::size_t n_perturbations() const { return cube_->n_perturbations; }
    std::size_t n_genes() const { return cube_->n_genes; }

    bool visible(std::size_t c, std::size_t p) const {
        if (!cube_->is_observed(c, p)) return false;
        if (!plan_) return true;
        return (readable_ & bit(plan_->role(c, p))) != 0;
    }

    /// True when the pair is observed and carries role Test under the plan.
    bool is_test_pair(std::size_t c, std::size_t p) const {
        return plan_ && cube_->is_observed(c, p) && plan_->role(c, p) == Role::Test;
    }

    std::span<const double> row(std::size_t c, std::size_t p) const {
        if (!cube_->is_observed(c, p))
            throw Error("cube read of unobserved pair (context " + std::to_string(c) +
                        ", perturbation " + std::to_string(p) + ")");
        if (plan_ && (readable_ & bit(plan_->role(c, p))) == 0)
            throw TestIsolationError(
                "masked read of test pair (context " + std::to_string(c) +
                ", perturbation " + std::to_string(p) + ") outside evaluation");
        return cube_->delta_row(c, p);
    }

    std::vector<std::size_t> visible_contexts_for(std::size_t p) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < cube_->n_contexts; ++c)
            if (visible(c, p)) out.push_back(c);
        return out;
    }

    std::vector<std::size_t> visible_perturbations_in(std::size_t c) const {
        std::vector<std::size_t> out;
        for (std::size_t p = 0; p < cube_->n_perturbations; ++p)
            if (visible(c, p)) out.push_back(p);
        return out;
    }

private:
    CubeView(const PerturbationCube& cube, const SplitPlan* plan, std::uint8_t readable)
        : cube_(&cube), plan_(plan), readable_(readable) {}

    static std::uint8_t bit(Role r) {
        return static_cast<std::uint8_t>(1u << static_cast<unsigned>(r));
    }

    const PerturbationCube* cube_;
    const SplitPlan* plan_;
    std::uint8_t readable_;
};

/// Variance-ranked gene selection over a view's visible pairs.
inline GeneSelection select_hvg(const CubeView& view, std::size_t k) {
    return select_hvg(view.cube(), k,
                      [&](std::size_t c, std::size_t p) { return view.visible(c, p); });
}

}  // namespace c3tl
