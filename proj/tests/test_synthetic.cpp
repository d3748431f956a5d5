#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "c3tl/data.hpp"
#include "c3tl/rng.hpp"
#include "c3tl/synthetic.hpp"

using namespace c3tl;

namespace {

SyntheticSpec base_spec() {
    SyntheticSpec spec;
    spec.n_contexts = 3;
    spec.n_perturbations = 5;
    spec.n_genes = 10;
    spec.latent_dim = 2;
    spec.context_shift_scale = 1.0;
    spec.noise_scale = 0.1;
    spec.basal_scale = 0.5;
    spec.basal_coupling = 0.0;
    spec.cells_per_condition = 4;
    spec.exact_mode = false;
    spec.nonlinearity_gain = 0.3;
    spec.seed = 3;
    return spec;
}

}  // namespace

TEST_CASE("spec validation") {
    SyntheticSpec spec = base_spec();
    CHECK_NOTHROW(spec.validate());
    spec.n_genes = 1;  // below latent_dim
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = base_spec();
    spec.noise_scale = -0.1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("world generation is deterministic in the seed") {
    const SyntheticWorld a = generate_world(base_spec());
    const SyntheticWorld b = generate_world(base_spec());
    SyntheticSpec other = base_spec();
    other.seed = 4;
    const SyntheticWorld c = generate_world(other);
    CHECK(a.pert_latents == b.pert_latents);
    CHECK(a.map_nonlinear == b.map_nonlinear);
    CHECK(a.basal_means == b.basal_means);
    CHECK(a.pert_latents.data() != c.pert_latents.data());
}

TEST_CASE("zero context shift collapses all contexts onto one") {
    SyntheticSpec spec = base_spec();
    spec.context_shift_scale = 0.0;
    const SyntheticWorld world = generate_world(spec);
    for (std::size_t c = 0; c < spec.n_contexts; ++c)
        for (std::size_t j = 0; j < spec.latent_dim; ++j)
            CHECK(world.context_shifts(c, j) == 0.0);
    const PerturbationCube cube = emit_exact_cube(world);
    for (std::size_t p = 0; p < spec.n_perturbations; ++p) {
        const auto first = cube.delta_row(0, p);
        for (std::size_t c = 1; c < spec.n_contexts; ++c) {
            const auto other = cube.delta_row(c, p);
            CHECK(std::equal(first.begin(), first.end(), other.begin()));
        }
    }
}

TEST_CASE("zero gain gives the linear map A(z + psi)") {
    SyntheticSpec spec = base_spec();
    spec.nonlinearity_gain = 0.0;
    const SyntheticWorld world = generate_world(spec);
    for (std::size_t p = 1; p <= spec.n_perturbations; ++p)
        for (std::size_t c = 0; c < spec.n_contexts; ++c) {
            const Matrix effect = oracle_effect(world, p, c);
            for (std::size_t g = 0; g < spec.n_genes; ++g) {
                double expected = 0.0;
                for (std::size_t j = 0; j < spec.latent_dim; ++j)
                    expected += world.map_linear(g, j) *
                                (world.pert_latents(p - 1, j) +
                                 world.context_shifts(c, j));
                CHECK(effect(0, g) == Catch::Approx(expected).margin(1e-14));
            }
        }
}

TEST_CASE("oracle_effect: control is the zero vector") {
    const SyntheticWorld world = generate_world(base_spec());
    const Matrix zero = oracle_effect(world, 0, 1);
    for (double v : zero.data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(oracle_effect(world, 99, 0), BoundError);
}

TEST_CASE("oracle_effect matches an independent re-evaluation of the map") {
    const SyntheticWorld world = generate_world(base_spec());
    const SyntheticSpec& spec = world.spec;
    for (std::size_t p = 1; p <= spec.n_perturbations; ++p)
        for (std::size_t c = 0; c < spec.n_contexts; ++c) {
            const Matrix effect = oracle_effect(world, p, c);
            // Scalar-loop re-evaluation of A u + g B tanh(Cmix u + bias).
            std::vector<double> u(spec.latent_dim);
            for (std::size_t j = 0; j < spec.latent_dim; ++j)
                u[j] = world.pert_latents(p - 1, j) + world.context_shifts(c, j);
            std::vector<double> hidden(spec.latent_dim);
            for (std::size_t k = 0; k < spec.latent_dim; ++k) {
                double acc = world.map_bias(0, k);
                for (std::size_t j = 0; j < spec.latent_dim; ++j)
                    acc += world.map_mixing(k, j) * u[j];
                hidden[k] = std::tanh(acc);
            }
            for (std::size_t g = 0; g < spec.n_genes; ++g) {
                double expected = 0.0;
                for (std::size_t j = 0; j < spec.latent_dim; ++j)
                    expected += world.map_linear(g, j) * u[j];
                for (std::size_t k = 0; k < spec.latent_dim; ++k)
                    expected += spec.nonlinearity_gain *
                                world.map_nonlinear(g, k) * hidden[k];
                CHECK(effect(0, g) == Catch::Approx(expected).margin(1e-13));
            }
        }
}

TEST_CASE("the map Jacobian stays comfortably non-singular") {
    const SyntheticWorld world = generate_world(base_spec());
    SplitMix64 rng(123);
    const double min_sv = min_jacobian_singular_value(world, 100, rng);
    // Orthonormal A plus a g-contraction: the bound is 1 - g.
    CHECK(min_sv > 0.0);
    CHECK(min_sv >= 1.0 - world.spec.nonlinearity_gain - 1e-9);
}

TEST_CASE("noiseless sampling collapses onto basal mean plus effect") {
    SyntheticSpec spec = base_spec();
    spec.noise_scale = 0.0;
    spec.basal_scale = 0.0;
    spec.basal_coupling = 0.0;
    spec.cells_per_condition = 2;
    const SyntheticWorld world = generate_world(spec);
    const auto records = sample_cells(world);
    for (const CellRecord& r : records) {
        const Matrix effect = oracle_effect(world, r.perturbation_id, r.context_id);
        for (std::size_t g = 0; g < spec.n_genes; ++g)
            CHECK(r.expression[g] ==
                  world.basal_means(r.context_id, g) + effect(0, g));
    }
}

TEST_CASE("noiseless pipeline reproduces the exact cube bit for bit") {
    SyntheticSpec spec = base_spec();
    spec.noise_scale = 0.0;
    spec.basal_scale = 0.0;
    spec.cells_per_condition = 2;
    const SyntheticWorld world = generate_world(spec);
    const auto records = sample_cells(world);
    const PerturbationCube pipeline = compute_deltas(
        pseudobulk(records, spec.n_contexts, spec.n_perturbations, spec.n_genes));
    const PerturbationCube exact = emit_exact_cube(world);
    REQUIRE(pipeline.n_observed() == exact.n_observed());
    for (std::size_t c = 0; c < spec.n_contexts; ++c)
        for (std::size_t p = 0; p < spec.n_perturbations; ++p) {
            const auto a = pipeline.delta_row(c, p);
            const auto b = exact.delta_row(c, p);
            CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
}

TEST_CASE("sampled pseudo-bulk deltas concentrate on the oracle") {
    SyntheticSpec spec = base_spec();
    spec.n_contexts = 2;
    spec.n_perturbations = 3;
    spec.n_genes = 6;
    spec.noise_scale = 0.1;
    spec.basal_scale = 0.05;
    spec.basal_coupling = 0.0;
    spec.cells_per_condition = 10000;
    spec.seed = 7;
    const SyntheticWorld world = generate_world(spec);
    const auto records = sample_cells(world);
    const PerturbationCube cube = compute_deltas(
        pseudobulk(records, spec.n_contexts, spec.n_perturbations, spec.n_genes));
    // Per-coordinate standard error of the delta estimator: both arms have
    // variance sigma_b^2 + sigma_eps^2 over n cells each.
    const double per_cell_var = spec.basal_scale * spec.basal_scale +
                                spec.noise_scale * spec.noise_scale;
    const double se = std::sqrt(2.0 * per_cell_var /
                                static_cast<double>(spec.cells_per_condition));
    for (std::size_t c = 0; c < spec.n_contexts; ++c)
        for (std::size_t p = 0; p < spec.n_perturbations; ++p) {
            const Matrix effect = oracle_effect(world, p + 1, c);
            const auto row = cube.delta_row(c, p);
            for (std::size_t g = 0; g < spec.n_genes; ++g)
                CHECK(std::abs(row[g] - effect(0, g)) < 5.0 * se);
        }
}

TEST_CASE("basal coupling keeps the mean effect unbiased") {
    SyntheticSpec spec = base_spec();
    spec.n_contexts = 1;
    spec.n_perturbations = 1;
    spec.n_genes = 4;
    spec.noise_scale = 0.0;
    spec.basal_scale = 0.3;
    spec.basal_coupling = 0.5;
    spec.cells_per_condition = 100000;
    spec.seed = 11;
    const SyntheticWorld world = generate_world(spec);
    const auto records = sample_cells(world);

    // Mean of T_cell = X - M... not separable from records alone; instead
    // check E[X_p] - mu - E_coupling = T* within 4 standard errors, where the
    // coupled term has per-coordinate std kappa * sigma_b * |D_i|.
    const Matrix effect = oracle_effect(world, 1, 0);
    std::vector<double> mean(spec.n_genes, 0.0);
    std::size_t n = 0;
    for (const CellRecord& r : records) {
        if (r.perturbation_id != 1) continue;
        for (std::size_t g = 0; g < spec.n_genes; ++g) mean[g] += r.expression[g];
        ++n;
    }
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t g = 0; g < spec.n_genes; ++g) {
        double coupled_var = 0.0;
        for (std::size_t j = 0; j < spec.n_genes; ++j) {
            const double dij =
                spec.basal_coupling * world.basal_coupling_matrix(g, j) +
                (g == j ? 1.0 : 0.0);
            coupled_var += dij * dij;
        }
        const double se = spec.basal_scale * std::sqrt(coupled_var) /
                          std::sqrt(static_cast<double>(n));
        const double expected = world.basal_means(0, g) + effect(0, g);
        CHECK(std::abs(mean[g] - expected) < 4.0 * se);
    }
}

TEST_CASE("exact cube equals the oracle at every pair") {
    const SyntheticWorld world = generate_world(base_spec());
    const PerturbationCube cube = emit_exact_cube(world);
    for (std::size_t c = 0; c < world.spec.n_contexts; ++c)
        for (std::size_t p = 0; p < world.spec.n_perturbations; ++p) {
            const Matrix effect = oracle_effect(world, p + 1, c);
            const auto row = cube.delta_row(c, p);
            for (std::size_t g = 0; g < world.spec.n_genes; ++g)
                CHECK(row[g] == effect(0, g));
        }
}

TEST_CASE("the theoretical pipeline attains machine-zero loss") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SyntheticSpec spec = base_spec();
        spec.seed = 100 + seed;
        const SyntheticWorld world = generate_world(spec);
        CHECK(oracle_zero_loss_check(world) <= 1e-12);
    }
}

TEST_CASE("a perturbed decoder has strictly positive loss") {
    const SyntheticWorld world = generate_world(base_spec());
    const PerturbationCube truth = emit_exact_cube(world);
    SyntheticWorld wrong = world;
    for (double& v : wrong.map_linear.data()) v += 0.1;
    CHECK(oracle_zero_loss_check(wrong, &truth) > 0.0);
}

TEST_CASE("linear world: the loss of a wrong context assignment is ||psi_w - psi_t||^2") {
    SyntheticSpec spec = base_spec();
    spec.nonlinearity_gain = 0.0;
    spec.n_contexts = 2;
    const SyntheticWorld world = generate_world(spec);
    SyntheticWorld swapped = world;
    for (std::size_t j = 0; j < spec.latent_dim; ++j) {
        std::swap(swapped.context_shifts(0, j), swapped.context_shifts(1, j));
    }
    // With orthonormal-column A, || A (psi_w - psi_t) ||^2 = || psi_w -
    // psi_t ||^2, averaged over the two contexts (swap symmetry).
    double expected = 0.0;
    for (std::size_t j = 0; j < spec.latent_dim; ++j) {
        const double diff = world.context_shifts(0, j) - world.context_shifts(1, j);
        expected += diff * diff;
    }
    const PerturbationCube truth = emit_exact_cube(world);
    CHECK(oracle_zero_loss_check(swapped, &truth) ==
          Catch::Approx(expected).epsilon(1e-10));
}
