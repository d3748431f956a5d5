#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace c3tl {

/// Parameters of the synthetic generative model: latent perturbation
/// positions shifted per context, pushed through an injective map to gene
/// space, with optional basal state, basal coupling, and observation noise.
struct SyntheticSpec {
    std::size_t n_contexts = 4;
    std::size_t n_perturbations = 8;
    std::size_t n_genes = 16;
    std::size_t latent_dim = 2;  // q*
    double context_shift_scale = 1.0;   // sigma_psi
    double noise_scale = 0.1;           // sigma_eps
    double basal_scale = 1.0;           // sigma_b
    double basal_coupling = 0.0;        // kappa
    std::size_t cells_per_condition = 100;
    bool exact_mode = true;
    double nonlinearity_gain = 0.3;  // g
    std::uint64_t seed = 0;

    void validate() const {
        if (n_contexts == 0 || n_perturbations == 0 || n_genes == 0 || latent_dim == 0)
            throw ConfigError("SyntheticSpec: all counts must be >= 1");
        if (n_genes < latent_dim)
            throw ConfigError("SyntheticSpec: n_genes must be >= latent_dim");
        if (context_shift_scale < 0.0 || noise_scale < 0.0 || basal_scale < 0.0)
            throw ConfigError("SyntheticSpec: scales must be >= 0");
        if (!exact_mode && cells_per_condition < 1)
            throw ConfigError("SyntheticSpec: cells_per_condition must be >= 1");
    }
};

namespace detail {

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    for (std::size_t sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    return eig;
}

inline double spectral_norm(const Matrix& m) {
    const Matrix gram = matmul_at_b(m, m);
    double max_eig = 0.0;
    for (double e : symmetric_eigenvalues(gram)) max_eig = std::max(max_eig, e);
    return std::sqrt(std::max(max_eig, 0.0));
}

inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, SplitMix64& rng,
                              double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

/// Gram-Schmidt orthonormalization of the columns of a (rows >= cols).
inline Matrix orthonormal_columns(Matrix a) {
    const std::size_t rows = a.rows(), cols = a.cols();
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double dot = 0.0;
            for (std::size_t i = 0; i < rows; ++i) dot += a(i, j) * a(i, k);
            for (std::size_t i = 0; i < rows; ++i) a(i, j) -= dot * a(i, k);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < rows; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12)
            throw GenerationError("orthonormalization hit a rank-deficient draw");
        for (std::size_t i = 0; i < rows; ++i) a(i, j) /= norm;
    }
    return a;
}

}  // namespace detail

/// Ground truth of one synthetic world. The effect map is
///   f(u) = A u + g * B tanh(Cmix u + bias)
/// with orthonormal-column A and spectrally normalized B, Cmix, so for
/// g < 1 the nonlinear part is a contraction and f is injective.
struct SyntheticWorld {
    SyntheticSpec spec;
    Matrix pert_latents;      // P x q*, one row per non-control perturbation
    Matrix context_shifts;    // C x q*
    Matrix map_linear;        // A: d x q*, orthonormal columns
    Matrix map_nonlinear;     // B: d x q*
    Matrix map_mixing;        // Cmix: q* x q*
    Matrix map_bias;          // 1 x q*, applied inside the tanh
    Matrix basal_means;       // C x d
    Matrix basal_coupling_matrix;  // D: d x d

    /// Apply f row-wise to a batch of latent points (rows of u).
    Matrix evaluate_map(const Matrix& u) const {
        Matrix out = matmul_a_bt(u, map_linear);  // u A^T
        Matrix hidden = matmul_a_bt(u, map_mixing);
        for (std::size_t i = 0; i < hidden.rows(); ++i) {
            auto r = hidden.row(i);
            const auto b = map_bias.row(0);
            for (std::size_t j = 0; j < r.size(); ++j) r[j] = std::tanh(r[j] + b[j]);
        }
        Matrix bent = matmul_a_bt(hidden, map_nonlinear);
        bent *= spec.nonlinearity_gain;
        out += bent;
        return out;
    }

    /// Jacobian of f at a single latent point (1 x q* row vector).
    Matrix jacobian(const Matrix& u) const {
        const std::size_t d = spec.n_genes, q = spec.latent_dim;
        Matrix pre = matmul_a_bt(u, map_mixing);
        std::vector<double> gain(q);
        for (std::size_t k = 0; k < q; ++k) {
            const double t = std::tanh(pre(0, k) + map_bias(0, k));
            gain[k] = 1.0 - t * t;
        }
        Matrix j = map_linear;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t col = 0; col < q; ++col) {
                double acc = 0.0;
                for (std::size_t k = 0; k < q; ++k)
                    acc += map_nonlinear(i, k) * gain[k] * map_mixing(k, col);
                j(i, col) += spec.nonlinearity_gain * acc;
            }
        return j;
    }
};

/// Smallest singular value of the map Jacobian over seeded random probe
/// points; positive values certify local injectivity at each probe.
inline double min_jacobian_singular_value(const SyntheticWorld& world,
                                          std::size_t n_probes, SplitMix64& rng) {
    const double radius =
        std::sqrt(1.0 + world.spec.context_shift_scale * world.spec.context_shift_scale);
    double min_sv = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_probes; ++i) {
        Matrix u = detail::gaussian_matrix(1, world.spec.latent_dim, rng, radius);
        const Matrix j = world.jacobian(u);
        const Matrix gram = matmul_at_b(j, j);
        double min_eig = std::numeric_limits<double>::infinity();
        for (double e : detail::symmetric_eigenvalues(gram))
            min_eig = std::min(min_eig, e);
        min_sv = std::min(min_sv, std::sqrt(std::max(min_eig, 0.0)));
    }
    return min_sv;
}

/// Draw a world deterministically from the seed field. The injectivity of the
/// effect map is verified numerically (smallest Jacobian singular value over
/// 100 probe points must exceed 0); the nonlinear part is redrawn up to 10
/// times before giving up.
inline SyntheticWorld generate_world(const SyntheticSpec& spec) {
    spec.validate();
    SplitMix64 rng(derive_seed(spec.seed, "world"));

    SyntheticWorld world;
    world.spec = spec;
    world.pert_latents =
        detail::gaussian_matrix(spec.n_perturbations, spec.latent_dim, rng);
    world.context_shifts = detail::gaussian_matrix(spec.n_contexts, spec.latent_dim,
                                                   rng, spec.context_shift_scale);
    world.map_linear = detail::orthonormal_columns(
        detail::gaussian_matrix(spec.n_genes, spec.latent_dim, rng));

    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
        Matrix b = detail::gaussian_matrix(spec.n_genes, spec.latent_dim, rng);
        Matrix mix = detail::gaussian_matrix(spec.latent_dim, spec.latent_dim, rng);
        const double nb = detail::spectral_norm(b);
        const double nm = detail::spectral_norm(mix);
        if (nb < 1e-12 || nm < 1e-12) continue;
        b *= 1.0 / nb;
        mix *= 1.0 / nm;
        world.map_nonlinear = std::move(b);
        world.map_mixing = std::move(mix);
        world.map_bias = detail::gaussian_matrix(1, spec.latent_dim, rng, 0.5);
        accepted = min_jacobian_singular_value(world, 100, rng) > 0.0;
    }
    if (!accepted)
        throw GenerationError(
            "synthetic world generation failed the injectivity check after 10 "
            "redraws; lower nonlinearity_gain or raise n_genes");

    // Basal means scale with basal_scale, so a noiseless spec pins them to
    // exactly zero and the sampled pipeline reproduces the exact cube.
    world.basal_means = detail::gaussian_matrix(spec.n_contexts, spec.n_genes, rng,
                                                spec.basal_scale);
    world.basal_coupling_matrix = detail::gaussian_matrix(
        spec.n_genes, spec.n_genes, rng,
        1.0 / std::sqrt(static_cast<double>(spec.n_genes)));
    return world;
}

/// True effect of perturbation p (raw id, 0 = control) in context c:
/// f(z_p + psi_c), and the zero vector for the control by convention.
inline Matrix oracle_effect(const SyntheticWorld& world, std::size_t p, std::size_t c) {
    if (c >= world.spec.n_contexts)
        throw BoundError("oracle_effect: context index out of range");
    if (p > world.spec.n_perturbations)
        throw BoundError("oracle_effect: perturbation id out of range");
    if (p == 0) return Matrix(1, world.spec.n_genes);
    Matrix u(1, world.spec.latent_dim);
    for (std::size_t j = 0; j < world.spec.latent_dim; ++j)
        u(0, j) = world.pert_latents(p - 1, j) + world.context_shifts(c, j);
    return world.evaluate_map(u);
}

/// Fully observed cube carrying the exact effects (infinite-sample limit).
inline PerturbationCube emit_exact_cube(const SyntheticWorld& world) {
    const SyntheticSpec& spec = world.spec;
    PerturbationCube cube =
        PerturbationCube::empty(spec.n_contexts, spec.n_perturbations, spec.n_genes);
    for (std::size_t c = 0; c < spec.n_contexts; ++c) {
        Matrix u(spec.n_perturbations, spec.latent_dim);
        for (std::size_t p = 0; p < spec.n_perturbations; ++p)
            for (std::size_t j = 0; j < spec.latent_dim; ++j)
                u(p, j) = world.pert_latents(p, j) + world.context_shifts(c, j);
        const Matrix effects = world.evaluate_map(u);
        for (std::size_t p = 0; p < spec.n_perturbations; ++p) {
            auto dst = cube.delta_row(c, p);
            const auto src = effects.row(p);
            std::copy(src.begin(), src.end(), dst.begin());
            cube.set_observed(c, p);
        }
    }
    for (std::size_t c = 0; c < spec.n_contexts; ++c)
        cube.context_names.push_back("c" + std::to_string(c));
    for (std::size_t p = 0; p < spec.n_perturbations; ++p)
        cube.perturbation_names.push_back("p" + std::to_string(p));
    for (std::size_t g = 0; g < spec.n_genes; ++g)
        cube.gene_names.push_back("g" + std::to_string(g));
    return cube;
}

/// Draw cell-level records. Each cell's readout is
///   X = T_cell + M + eps,
/// with basal state M ~ Normal(mu_c, sigma_b^2 I) and
/// T_cell = oracle_effect(p, c) + kappa * D (M - mu_c), so the cell-level
/// effect depends on the realized basal state but keeps E[T_cell] equal to
/// the true effect.
inline std::vector<CellRecord> sample_cells(const SyntheticWorld& world) {
    const SyntheticSpec& spec = world.spec;
    if (spec.exact_mode)
        throw ConfigError("sample_cells: spec is exact_mode; no cells to draw");
    SplitMix64 rng(derive_seed(spec.seed, "cells"));
    const std::size_t d = spec.n_genes;

    std::vector<CellRecord> records;
    records.reserve(spec.n_contexts * (spec.n_perturbations + 1) *
                    spec.cells_per_condition);
    std::vector<double> basal_dev(d), coupled(d);
    for (std::size_t c = 0; c < spec.n_contexts; ++c) {
        for (std::size_t p = 0; p <= spec.n_perturbations; ++p) {
            const Matrix effect = oracle_effect(world, p, c);
            for (std::size_t cell = 0; cell < spec.cells_per_condition; ++cell) {
                for (std::size_t g = 0; g < d; ++g)
                    basal_dev[g] = spec.basal_scale * rng.normal();
                if (spec.basal_coupling != 0.0) {
                    for (std::size_t i = 0; i < d; ++i) {
                        double acc = 0.0;
                        for (std::size_t g = 0; g < d; ++g)
                            acc += world.basal_coupling_matrix(i, g) * basal_dev[g];
                        coupled[i] = spec.basal_coupling * acc;
                    }
                } else {
                    std::fill(coupled.begin(), coupled.end(), 0.0);
                }
                CellRecord rec;
                rec.context_id = c;
                rec.perturbation_id = p;
                rec.expression.resize(d);
                for (std::size_t g = 0; g < d; ++g)
                    rec.expression[g] = effect(0, g) + coupled[g] +
                                        world.basal_means(c, g) + basal_dev[g] +
                                        spec.noise_scale * rng.normal();
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

/// Executable form of the global-minimum proposition: run the theoretical
/// pipeline with ground-truth components (latent lookup in place of the
/// encoder chain, the true map as decoder) and return its l2 loss against
/// the exact cube. Equality of the two computations is the proof's chain of
/// identities, so the result must be machine-precision zero.
///
/// `reference` substitutes the cube the pipeline is scored against; passing
/// the exact cube of a different world exposes how any deviation from the
/// true components (a perturbed decoder, swapped context latents) leaves the
/// zero-loss point.
inline double oracle_zero_loss_check(const SyntheticWorld& world,
                                     const PerturbationCube* reference = nullptr) {
    const PerturbationCube cube = reference ? *reference : emit_exact_cube(world);
    const SyntheticSpec& spec = world.spec;
    double acc = 0.0;
    for (std::size_t c = 0; c < spec.n_contexts; ++c)
        for (std::size_t p = 0; p < spec.n_perturbations; ++p) {
            Matrix u(1, spec.latent_dim);
            for (std::size_t j = 0; j < spec.latent_dim; ++j)
                u(0, j) = world.pert_latents(p, j) + world.context_shifts(c, j);
            const Matrix pred = world.evaluate_map(u);
            const auto target = cube.delta_row(c, p);
            for (std::size_t g = 0; g < spec.n_genes; ++g) {
                const double diff = pred(0, g) - target[g];
                acc += diff * diff;
            }
        }
    return acc / static_cast<double>(spec.n_contexts * spec.n_perturbations);
}

}  // namespace c3tl
