#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "c3tl/gradcheck.hpp"
#include "c3tl/matrix.hpp"
#include "c3tl/mlp.hpp"
#include "c3tl/optimizer.hpp"
#include "c3tl/rng.hpp"
#include "oracles.hpp"

using namespace c3tl;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

MlpSpec random_spec(SplitMix64& rng, std::size_t max_dim = 8,
                    bool smooth_only = false) {
    MlpSpec spec;
    spec.input_dim = 1 + rng.bounded(max_dim);
    spec.output_dim = 1 + rng.bounded(max_dim);
    const std::size_t n_hidden = rng.bounded(3);
    for (std::size_t i = 0; i < n_hidden; ++i)
        spec.hidden_dims.push_back(1 + rng.bounded(max_dim));
    const Activation acts[] = {Activation::Tanh, Activation::Gelu, Activation::Relu};
    spec.activation = acts[rng.bounded(smooth_only ? 2 : 3)];
    return spec;
}

}  // namespace

TEST_CASE("matrix shape checks") {
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1.0}), DimensionError);
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
    const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
    const Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
    const Matrix ab = matmul(a, b);
    CHECK(ab(0, 0) == 58.0);
    CHECK(ab(0, 1) == 64.0);
    CHECK(ab(1, 0) == 139.0);
    CHECK(ab(1, 1) == 154.0);
}

TEST_CASE("transpose products agree with explicit transposes") {
    SplitMix64 rng(7);
    const Matrix a = random_matrix(5, 3, rng);
    const Matrix b = random_matrix(5, 4, rng);
    const Matrix atb = matmul_at_b(a, b);
    Matrix at(3, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j) at(j, i) = a(i, j);
    const Matrix ref = matmul(at, b);
    for (std::size_t i = 0; i < atb.size(); ++i)
        CHECK(atb.data()[i] == Catch::Approx(ref.data()[i]).epsilon(1e-14));

    const Matrix c = random_matrix(4, 3, rng);
    const Matrix d = random_matrix(6, 3, rng);
    const Matrix cdt = matmul_a_bt(c, d);
    Matrix dt(3, 6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) dt(j, i) = d(i, j);
    const Matrix ref2 = matmul(c, dt);
    for (std::size_t i = 0; i < cdt.size(); ++i)
        CHECK(cdt.data()[i] == Catch::Approx(ref2.data()[i]).epsilon(1e-14));
}

TEST_CASE("mean_rows basics") {
    SECTION("single element is returned unchanged") {
        const Matrix v = Matrix::row_vector({1.5, -2.0, 3.25});
        CHECK(mean_rows({v}) == v);
    }
    SECTION("pairwise mean") {
        const Matrix m =
            mean_rows({Matrix::row_vector({1, 3}), Matrix::row_vector({3, 1})});
        CHECK(m == Matrix::row_vector({2, 2}));
    }
    SECTION("empty list faults") {
        CHECK_THROWS_AS(mean_rows({}), EmptyAggregationError);
    }
    SECTION("mean of identical rows equals the row") {
        const Matrix v = Matrix::row_vector({0.1, -7.0});
        CHECK(mean_rows({v, v}) == v);
    }
}

TEST_CASE("mean_rows over a canonically ordered set is permutation-free") {
    // Callers aggregate sets by sorting member indices ascending before
    // averaging; any permutation of the set then reduces to the same list
    // and the output is bit-identical.
    SplitMix64 rng(11);
    std::vector<Matrix> rows;
    for (int i = 0; i < 7; ++i) rows.push_back(random_matrix(1, 4, rng));

    const auto aggregate = [&](std::vector<std::size_t> member_order) {
        std::sort(member_order.begin(), member_order.end());  // canonical
        std::vector<Matrix> list;
        for (std::size_t i : member_order) list.push_back(rows[i]);
        return mean_rows(list);
    };
    const Matrix ref = aggregate({0, 1, 2, 3, 4, 5, 6});
    CHECK(aggregate({6, 5, 4, 3, 2, 1, 0}) == ref);
    CHECK(aggregate({3, 0, 6, 2, 5, 1, 4}) == ref);
}

TEST_CASE("mlp_forward: identity affine map") {
    MlpSpec spec{3, {}, 3, Activation::Tanh};
    MlpParams params;
    params.spec = spec;
    params.weights.push_back(Matrix::identity(3));
    params.biases.emplace_back(1, 3);
    const Matrix v(2, 3, {1, -2, 3, 0.5, 0.25, -0.125});
    CHECK(mlp_forward(params, v) == v);
}

TEST_CASE("mlp_forward: empty batch") {
    const MlpSpec spec{4, {5}, 2, Activation::Relu};
    const MlpParams params = init_mlp(spec, 3);
    const Matrix out = mlp_forward(params, Matrix(0, 4));
    CHECK(out.rows() == 0);
    CHECK(out.cols() == 2);
}

TEST_CASE("mlp_forward: shape mismatch faults") {
    const MlpParams params = init_mlp(MlpSpec{4, {}, 2, Activation::Tanh}, 1);
    CHECK_THROWS_AS(mlp_forward(params, Matrix(1, 3)), DimensionError);
}

TEST_CASE("mlp_forward matches a naive per-neuron oracle") {
    SplitMix64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpSpec spec = random_spec(rng);
        const MlpParams params = init_mlp(spec, rng.next());
        const Matrix input = random_matrix(3, spec.input_dim, rng);
        const Matrix out = mlp_forward(params, input);
        for (std::size_t i = 0; i < input.rows(); ++i) {
            const std::vector<double> row(input.row(i).begin(), input.row(i).end());
            const auto expected = oracles::naive_mlp_forward(params, row);
            for (std::size_t j = 0; j < spec.output_dim; ++j)
                CHECK(out(i, j) == Catch::Approx(expected[j]).margin(1e-12));
        }
    }
}

TEST_CASE("mlp_forward is pure: repeated calls are bit-identical") {
    SplitMix64 rng(33);
    const MlpSpec spec{5, {6, 4}, 3, Activation::Gelu};
    const MlpParams params = init_mlp(spec, 9);
    const Matrix input = random_matrix(4, 5, rng);
    CHECK(mlp_forward(params, input) == mlp_forward(params, input));
}

TEST_CASE("mlp outputs stay finite for every activation") {
    SplitMix64 rng(41);
    for (Activation a : {Activation::Tanh, Activation::Relu, Activation::Gelu}) {
        const MlpSpec spec{6, {8, 8}, 4, a};
        const MlpParams params = init_mlp(spec, 17);
        const Matrix input = random_matrix(10, 6, rng, 50.0);
        CHECK(mlp_forward(params, input).all_finite());
    }
}

TEST_CASE("mlp_backward: affine-only gradient identities") {
    // y = x W + b with upstream g: dX = g W^T, dW = x^T g, db = g.
    MlpSpec spec{2, {}, 2, Activation::Tanh};
    MlpParams params;
    params.spec = spec;
    params.weights.push_back(Matrix(2, 2, {1, 2, 3, 4}));
    params.biases.emplace_back(1, 2);
    const Matrix x(1, 2, {5, 7});
    const Matrix g(1, 2, {0.5, -1.0});
    const auto [grads, input_grad] = mlp_backward(params, x, g);
    CHECK(input_grad == Matrix(1, 2, {0.5 * 1 + -1.0 * 2, 0.5 * 3 + -1.0 * 4}));
    CHECK(grads.weights[0] == Matrix(2, 2, {2.5, -5.0, 3.5, -7.0}));
    CHECK(grads.biases[0] == g);
}

TEST_CASE("mlp_backward: zero upstream gives zero gradients") {
    const MlpSpec spec{3, {4}, 2, Activation::Tanh};
    const MlpParams params = init_mlp(spec, 5);
    SplitMix64 rng(6);
    const Matrix x = random_matrix(3, 3, rng);
    const auto [grads, input_grad] = mlp_backward(params, x, Matrix(3, 2));
    for (const Matrix& m : grads.weights)
        for (double v : m.data()) CHECK(v == 0.0);
    for (const Matrix& m : grads.biases)
        for (double v : m.data()) CHECK(v == 0.0);
    for (double v : input_grad.data()) CHECK(v == 0.0);
}

TEST_CASE("mlp gradients match central finite differences") {
    // Random small nets with smooth activations, total parameters <= 500.
    // (A separate case covers relu away from its kink, where the central
    // difference is actually defined.)
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 12; ++trial) {
        const MlpSpec spec = random_spec(rng, 8, /*smooth_only=*/true);
        MlpParams params = init_mlp(spec, rng.next());
        REQUIRE(params.param_count() <= 500);
        const Matrix input = random_matrix(2, spec.input_dim, rng);
        // Scalar objective: 0.5 * sum of squared outputs.
        const auto objective = [&]() {
            const Matrix out = mlp_forward(params, input);
            double acc = 0.0;
            for (double v : out.data()) acc += 0.5 * v * v;
            return acc;
        };
        MlpCache cache;
        const Matrix out = mlp_forward_cached(params, input, cache);
        const auto [grads, input_grad] = mlp_backward_cached(params, cache, out);

        std::vector<Matrix*> pack;
        std::vector<const Matrix*> analytic;
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            pack.push_back(&params.weights[l]);
            analytic.push_back(&grads.weights[l]);
            pack.push_back(&params.biases[l]);
            analytic.push_back(&grads.biases[l]);
        }
        const GradCheckResult r = check_gradients(objective, pack, analytic, 1e-5);
        INFO("spec trial " << trial << " max rel error " << r.max_rel_error);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("relu gradients match finite differences away from the kink") {
    const MlpSpec spec{3, {4}, 2, Activation::Relu};
    SplitMix64 rng(5);
    // Find a draw whose hidden pre-activations all sit well clear of zero,
    // so the central difference cannot straddle the kink.
    MlpParams params;
    Matrix input;
    for (;;) {
        params = init_mlp(spec, rng.next());
        input = random_matrix(2, 3, rng);
        MlpCache cache;
        mlp_forward_cached(params, input, cache);
        bool clear = true;
        for (double z : cache.pre_activation[0].data())
            clear = clear && std::abs(z) > 1e-2;
        if (clear) break;
    }
    const auto objective = [&]() {
        const Matrix out = mlp_forward(params, input);
        double acc = 0.0;
        for (double v : out.data()) acc += 0.5 * v * v;
        return acc;
    };
    MlpCache cache;
    const Matrix out = mlp_forward_cached(params, input, cache);
    const auto [grads, input_grad] = mlp_backward_cached(params, cache, out);
    std::vector<Matrix*> pack;
    std::vector<const Matrix*> analytic;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        pack.push_back(&params.weights[l]);
        analytic.push_back(&grads.weights[l]);
        pack.push_back(&params.biases[l]);
        analytic.push_back(&grads.biases[l]);
    }
    CHECK(check_gradients(objective, pack, analytic, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("finite differences also confirm the input gradient") {
    SplitMix64 rng(77);
    const MlpSpec spec{4, {5}, 3, Activation::Tanh};
    const MlpParams params = init_mlp(spec, 8);
    Matrix input = random_matrix(1, 4, rng);
    const auto objective = [&]() {
        const Matrix out = mlp_forward(params, input);
        double acc = 0.0;
        for (double v : out.data()) acc += 0.5 * v * v;
        return acc;
    };
    MlpCache cache;
    const Matrix out = mlp_forward_cached(params, input, cache);
    const auto [grads, input_grad] = mlp_backward_cached(params, cache, out);
    std::vector<Matrix*> pack{&input};
    std::vector<const Matrix*> analytic{&input_grad};
    CHECK(check_gradients(objective, pack, analytic, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("optimizer: zero gradients leave fresh parameters unchanged") {
    Matrix p(2, 2, {1, 2, 3, 4});
    const Matrix zero(2, 2);
    OptimizerState state = OptimizerState::create({}, {&p});
    optimizer_step(state, {&p}, {&zero});
    CHECK(p == Matrix(2, 2, {1, 2, 3, 4}));
    CHECK(state.step_count == 1);
}

TEST_CASE("optimizer: single scalar step matches the published update") {
    const double g = 0.3, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Matrix p(1, 1, {2.0});
    const Matrix grad(1, 1, {g});
    OptimizerState state = OptimizerState::create({lr, b1, b2, eps}, {&p});
    optimizer_step(state, {&p}, {&grad});
    // Hand-computed: m = (1-b1) g, v = (1-b2) g^2, with bias correction the
    // first step is exactly -lr * g / (|g| + eps).
    const double m_hat = (1 - b1) * g / (1 - b1);
    const double v_hat = (1 - b2) * g * g / (1 - b2);
    const double expected = 2.0 - lr * m_hat / (std::sqrt(v_hat) + eps);
    CHECK(p(0, 0) == Catch::Approx(expected).margin(1e-18));
}

TEST_CASE("optimizer: replayed sequences are bit-identical") {
    SplitMix64 rng(55);
    const auto run = [&](std::uint64_t seed) {
        SplitMix64 local(seed);
        Matrix p = random_matrix(3, 2, local);
        OptimizerState state = OptimizerState::create({}, {&p});
        for (int i = 0; i < 5; ++i) {
            const Matrix g = random_matrix(3, 2, local);
            optimizer_step(state, {&p}, {&g});
        }
        return p;
    };
    CHECK(run(9) == run(9));
}

TEST_CASE("optimizer rejects invalid constants") {
    Matrix p(1, 1);
    CHECK_THROWS_AS(OptimizerState::create({1e-3, 1.0, 0.999, 1e-8}, {&p}),
                    ConfigError);
    CHECK_THROWS_AS(OptimizerState::create({1e-3, 0.9, 0.999, 0.0}, {&p}),
                    ConfigError);
}

TEST_CASE("glorot init is seeded and in range") {
    const MlpSpec spec{10, {12}, 8, Activation::Tanh};
    const MlpParams a = init_mlp(spec, 42);
    const MlpParams b = init_mlp(spec, 42);
    const MlpParams c = init_mlp(spec, 43);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.weights[0].data() != c.weights[0].data());
    const double bound = std::sqrt(6.0 / (10 + 12));
    for (double v : a.weights[0].data()) {
        CHECK(std::abs(v) <= bound);
    }
    for (double v : a.biases[0].data()) CHECK(v == 0.0);
}
