#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace c3tl {

enum class Role : std::int8_t { Train = 0, AdaptTrain = 1, AdaptVal = 2, Test = 3 };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::Train: return "train";
        case Role::AdaptTrain: return "adapt_train";
        case Role::AdaptVal: return "adapt_val";
        case Role::Test: return "test";
    }
    throw Error("unknown role");
}

inline Role role_from_string(const std::string& s) {
    if (s == "train") return Role::Train;
    if (s == "adapt_train") return Role::AdaptTrain;
    if (s == "adapt_val") return Role::AdaptVal;
    if (s == "test") return Role::Test;
    throw ParseError("unknown role '" + s + "'");
}

using PairKey = std::pair<std::size_t, std::size_t>;  // (context, perturbation)

/// Deterministic assignment of observed (context, perturbation) pairs to
/// train / adapt_train / adapt_val / test roles. Pairs in non-test contexts
/// are always Train; within each test context the roles partition its
/// observed perturbations.
struct SplitPlan {
    std::size_t n_contexts = 0;
    std::size_t n_perturbations = 0;
    std::vector<std::size_t> test_contexts;  // ascending
    std::uint64_t seed = 0;
    double adapt_fraction = 0.0;
    double adapt_train_fraction = 0.75;
    std::vector<std::int8_t> roles;  // [c * P], -1 = unobserved
    bool validationless = false;     // some test context got no adapt_val pair

    bool in_range(std::size_t c, std::size_t p) const {
        return c < n_contexts && p < n_perturbations;
    }
    bool has_role(std::size_t c, std::size_t p) const {
        return roles[c * n_perturbations + p] >= 0;
    }
    Role role(std::size_t c, std::size_t p) const {
        const std::int8_t r = roles[c * n_perturbations + p];
        if (r < 0) throw BoundError("role queried for unobserved pair");
        return static_cast<Role>(r);
    }
    bool is_test_context(std::size_t c) const {
        return std::binary_search(test_contexts.begin(), test_contexts.end(), c);
    }

    /// Pairs carrying the given role, ascending in (context, perturbation).
    std::vector<PairKey> pairs_with_role(Role r) const {
        std::vector<PairKey> out;
        for (std::size_t c = 0; c < n_contexts; ++c)
            for (std::size_t p = 0; p < n_perturbations; ++p)
                if (roles[c * n_perturbations + p] == static_cast<std::int8_t>(r))
                    out.emplace_back(c, p);
        return out;
    }

    std::vector<PairKey> pairs_with_roles(std::initializer_list<Role> rs) const {
        std::vector<PairKey> out;
        for (std::size_t c = 0; c < n_contexts; ++c)
            for (std::size_t p = 0; p < n_perturbations; ++p) {
                const std::int8_t v = roles[c * n_perturbations + p];
                for (Role r : rs)
                    if (v == static_cast<std::int8_t>(r)) {
                        out.emplace_back(c, p);
                        break;
                    }
            }
        return out;
    }
};

namespace detail {

inline std::vector<std::size_t> checked_test_contexts(
    const PerturbationCube& cube, std::vector<std::size_t> test_contexts) {
    if (test_contexts.empty())
        throw ConfigError("split: test context set must be non-empty");
    std::sort(test_contexts.begin(), test_contexts.end());
    if (std::adjacent_find(test_contexts.begin(), test_contexts.end()) !=
        test_contexts.end())
        throw ConfigError("split: duplicate test context");
    if (test_contexts.back() >= cube.n_contexts)
        throw BoundError("split: test context index out of range");
    return test_contexts;
}

}  // namespace detail

/// Build one split plan per adaptation fraction, sharing a single seeded
/// shuffle per test context. Larger fractions take longer prefixes as
/// adaptation data, so the test sets are nested: for fractions X1 > X2,
/// test(X1) is a subset of test(X2).
///
/// Within the adaptation block, round(adapt_train_fraction * n_adapt) pairs
/// become adapt_train and the remainder adapt_val.
inline std::vector<SplitPlan> make_nested_splits(const PerturbationCube& cube,
                                                 std::vector<std::size_t> test_contexts,
                                                 const std::vector<double>& fractions,
                                                 std::uint64_t seed) {
    if (fractions.empty()) throw ConfigError("split: no adaptation fractions given");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0 && fractions[i] < 1.0))
            throw ConfigError("split: adaptation fraction must lie in (0, 1)");
        if (i > 0 && !(fractions[i] < fractions[i - 1]))
            throw ConfigError("split: adaptation fractions must be strictly decreasing");
    }
    test_contexts = detail::checked_test_contexts(cube, std::move(test_contexts));

    std::vector<SplitPlan> plans(fractions.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        SplitPlan& plan = plans[i];
        plan.n_contexts = cube.n_contexts;
        plan.n_perturbations = cube.n_perturbations;
        plan.test_contexts = test_contexts;
        plan.seed = seed;
        plan.adapt_fraction = fractions[i];
        plan.roles.assign(cube.n_contexts * cube.n_perturbations, -1);
        for (std::size_t c = 0; c < cube.n_contexts; ++c) {
            if (plan.is_test_context(c)) continue;
            for (std::size_t p = 0; p < cube.n_perturbations; ++p)
                if (cube.is_observed(c, p))
                    plan.roles[c * cube.n_perturbations + p] =
                        static_cast<std::int8_t>(Role::Train);
        }
    }

    for (std::size_t c : test_contexts) {
        std::vector<std::size_t> perts;
        for (std::size_t p = 0; p < cube.n_perturbations; ++p)
            if (cube.is_observed(c, p)) perts.push_back(p);
        const std::size_t n = perts.size();
        if (n == 0)
            throw DegenerateSplitError("split: test context " + std::to_string(c) +
                                       " observes no perturbation");
        // One shuffle per context, keyed by the context's stable identifier;
        // every fraction slices prefixes of this order.
        SplitMix64 rng(derive_seed(seed, "split/" + cube.context_key(c)));
        rng.shuffle(perts);

        for (std::size_t i = 0; i < fractions.size(); ++i) {
            const double x = fractions[i];
            const std::size_t n_adapt = static_cast<std::size_t>(
                std::ceil(x * static_cast<double>(n)));
            if (n_adapt >= n)
                throw DegenerateSplitError(
                    "split: empty test block in context " + std::to_string(c) +
                    " (adaptation fraction " + std::to_string(x) + " of " +
                    std::to_string(n) + " perturbations)");
            const std::size_t n_at = static_cast<std::size_t>(std::llround(
                plans[i].adapt_train_fraction * static_cast<double>(n_adapt)));
            SplitPlan& plan = plans[i];
            if (n_adapt - n_at == 0) plan.validationless = true;
            for (std::size_t j = 0; j < n; ++j) {
                Role r = Role::Test;
                if (j < n_at)
                    r = Role::AdaptTrain;
                else if (j < n_adapt)
                    r = Role::AdaptVal;
                plan.roles[c * cube.n_perturbations + perts[j]] =
                    static_cast<std::int8_t>(r);
            }
        }
    }
    return plans;
}

/// Single-fraction split: a seeded shuffle of each test context's observed
/// perturbations assigns ceil(X*n) pairs to adaptation and the rest to test.
inline SplitPlan make_split(const PerturbationCube& cube,
                            std::vector<std::size_t> test_contexts,
                            double adapt_fraction, std::uint64_t seed) {
    return make_nested_splits(cube, std::move(test_contexts), {adapt_fraction},
                              seed)
        .front();
}

}  // namespace c3tl
