#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "c3tl/io.hpp"
#include "c3tl/rng.hpp"
#include "c3tl/synthetic.hpp"

using namespace c3tl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("c3tl_io_" + std::to_string(SplitMix64(::getpid()).next() % 1000000) +
                "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

PerturbationCube random_cube(std::size_t C, std::size_t P, std::size_t d,
                             std::uint64_t seed) {
    PerturbationCube cube = PerturbationCube::empty(C, P, d);
    SplitMix64 rng(seed);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) {
            for (double& v : cube.delta_row(c, p)) v = rng.normal() * 1e3;
            cube.set_observed(c, p);
        }
    return cube;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("tiny cube round-trips through CSV") {
    TempDir dir;
    PerturbationCube cube = PerturbationCube::empty(1, 1, 2);
    cube.delta_row(0, 0)[0] = 1.25;
    cube.delta_row(0, 0)[1] = -0.5;
    cube.set_observed(0, 0);
    save_cube_csv(cube, dir.file("cube.csv"));
    const PerturbationCube loaded = load_cube_csv(dir.file("cube.csv"));
    CHECK(loaded.n_contexts == 1);
    CHECK(loaded.n_perturbations == 1);
    CHECK(loaded.n_genes == 2);
    CHECK(loaded.deltas == cube.deltas);
}

TEST_CASE("random cube round-trips bit-exactly, labels via sidecar") {
    TempDir dir;
    PerturbationCube cube = random_cube(3, 4, 5, 1);
    cube.context_names = {"K562", "HepG2", "Jurkat"};
    cube.perturbation_names = {"a", "b", "c", "d"};
    for (std::size_t g = 0; g < 5; ++g) cube.gene_names.push_back("G" + std::to_string(g));
    cube.set_observed(1, 2, false);  // a hole survives the trip
    save_cube_csv(cube, dir.file("cube.csv"));
    CHECK(fs::exists(dir.file("cube.csv.meta.json")));
    const PerturbationCube loaded = load_cube_csv(dir.file("cube.csv"));
    CHECK(loaded.observed == cube.observed);
    CHECK(loaded.context_names == cube.context_names);
    CHECK(loaded.gene_names == cube.gene_names);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < 4; ++p) {
            if (!cube.is_observed(c, p)) continue;
            const auto a = cube.delta_row(c, p);
            const auto b = loaded.delta_row(c, p);
            CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
}

TEST_CASE("duplicate pair rows are rejected with the line number") {
    TempDir dir;
    std::ofstream out(dir.file("dup.csv"));
    out << "context,perturbation,gene_0\n0,0,1.0\n1,0,2.0\n0,0,3.0\n";
    out.close();
    try {
        load_cube_csv(dir.file("dup.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 4") != std::string::npos);
        CHECK(what.find("duplicate") != std::string::npos);
    }
}

TEST_CASE("malformed headers and rows are named by line") {
    TempDir dir;
    {
        std::ofstream out(dir.file("bad_header.csv"));
        out << "ctx,perturbation,gene_0\n0,0,1.0\n";
    }
    CHECK_THROWS_AS(load_cube_csv(dir.file("bad_header.csv")), ParseError);
    {
        std::ofstream out(dir.file("bad_row.csv"));
        out << "context,perturbation,gene_0,gene_1\n0,0,1.0\n";
    }
    try {
        load_cube_csv(dir.file("bad_row.csv"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    {
        std::ofstream out(dir.file("bad_num.csv"));
        out << "context,perturbation,gene_0\n0,0,abc\n";
    }
    CHECK_THROWS_AS(load_cube_csv(dir.file("bad_num.csv")), ParseError);
}

TEST_CASE("cell records round-trip through CSV") {
    TempDir dir;
    std::vector<CellRecord> records;
    SplitMix64 rng(3);
    for (int i = 0; i < 20; ++i) {
        CellRecord r;
        r.context_id = rng.bounded(2);
        r.perturbation_id = rng.bounded(3);
        for (int g = 0; g < 4; ++g) r.expression.push_back(rng.normal());
        records.push_back(r);
    }
    save_cell_csv(records, 4, dir.file("cells.csv"));
    const auto loaded = load_cell_csv(dir.file("cells.csv"));
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].context_id == records[i].context_id);
        CHECK(loaded[i].perturbation_id == records[i].perturbation_id);
        CHECK(loaded[i].expression == records[i].expression);
    }
}

TEST_CASE("split plans round-trip through JSON") {
    TempDir dir;
    const PerturbationCube cube = random_cube(4, 30, 2, 5);
    const SplitPlan plan = make_split(cube, {1, 3}, 0.2, 77);
    save_split_json(plan, dir.file("plan.json"));
    const SplitPlan loaded = load_split_json(dir.file("plan.json"));
    CHECK(loaded.n_contexts == plan.n_contexts);
    CHECK(loaded.test_contexts == plan.test_contexts);
    CHECK(loaded.roles == plan.roles);
    CHECK(loaded.seed == plan.seed);
    CHECK(loaded.adapt_fraction == plan.adapt_fraction);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    TempDir dir;
    const C3tlSpec spec = C3tlSpec::defaults(3, 5, 7, 4, {6});
    const C3tlParams params = init_params(spec, 9);
    save_checkpoint(params, dir.file("ckpt.json"), 12);
    const Checkpoint loaded = load_checkpoint(dir.file("ckpt.json"));
    CHECK(loaded.trained_epochs == 12);
    CHECK(loaded.params.spec == spec);
    for (std::size_t l = 0; l < params.theta_z.weights.size(); ++l) {
        CHECK(loaded.params.theta_z.weights[l] == params.theta_z.weights[l]);
        CHECK(loaded.params.theta_z.biases[l] == params.theta_z.biases[l]);
    }
    CHECK(loaded.params.gamma.weights.back() == params.gamma.weights.back());
}

TEST_CASE("checkpoints with empty hidden dims round-trip") {
    TempDir dir;
    const C3tlSpec spec = C3tlSpec::defaults(2, 3, 4, 4, {});
    const C3tlParams params = init_params(spec, 11);
    save_checkpoint(params, dir.file("ckpt.json"));
    const Checkpoint loaded = load_checkpoint(dir.file("ckpt.json"));
    CHECK(loaded.params.theta_z.weights.size() == 1);
    CHECK(loaded.params.theta_z.weights[0] == params.theta_z.weights[0]);
}

TEST_CASE("an edited latent_dim makes a checkpoint corrupt") {
    TempDir dir;
    const C3tlSpec spec = C3tlSpec::defaults(3, 5, 7, 4, {6});
    save_checkpoint(init_params(spec, 13), dir.file("ckpt.json"));
    json doc;
    std::ifstream(dir.file("ckpt.json")) >> doc;
    doc["spec"]["latent_dim"] = 9;
    std::ofstream(dir.file("ckpt.json")) << doc.dump();
    CHECK_THROWS_AS(load_checkpoint(dir.file("ckpt.json")), CorruptCheckpointError);
    std::ofstream(dir.file("junk.json")) << "{\"format\": \"nope\"}";
    CHECK_THROWS_AS(load_checkpoint(dir.file("junk.json")), CorruptCheckpointError);
}

TEST_CASE("synthetic worlds round-trip through JSON") {
    TempDir dir;
    SyntheticSpec spec;
    spec.seed = 15;
    spec.basal_coupling = 0.25;
    const SyntheticWorld world = generate_world(spec);
    save_world_json(world, dir.file("world.json"));
    const SyntheticWorld loaded = load_world_json(dir.file("world.json"));
    CHECK(loaded.pert_latents == world.pert_latents);
    CHECK(loaded.context_shifts == world.context_shifts);
    CHECK(loaded.map_linear == world.map_linear);
    CHECK(loaded.map_bias == world.map_bias);
    CHECK(loaded.basal_coupling_matrix == world.basal_coupling_matrix);
    CHECK(loaded.spec.nonlinearity_gain == world.spec.nonlinearity_gain);
    // The reloaded world answers oracle queries identically.
    const Matrix a = oracle_effect(world, 3, 1);
    const Matrix b = oracle_effect(loaded, 3, 1);
    CHECK(a == b);
}

TEST_CASE("predictions CSV round-trips") {
    TempDir dir;
    PredictionMap preds;
    SplitMix64 rng(17);
    preds[{0, 3}] = {rng.normal(), rng.normal()};
    preds[{2, 1}] = {rng.normal(), rng.normal()};
    save_predictions_csv(preds, 2, dir.file("preds.csv"));
    const PredictionMap loaded = load_predictions_csv(dir.file("preds.csv"));
    CHECK(loaded == preds);
}

TEST_CASE("scatter export: one row per test pair and gene") {
    TempDir dir;
    const PerturbationCube cube = random_cube(3, 6, 4, 19);
    const SplitPlan plan = make_split(cube, {2}, 0.4, 21);
    PredictionMap preds;
    for (const auto& [c, p] : plan.pairs_with_role(Role::Test)) {
        const auto row = cube.delta_row(c, p);
        preds[{c, p}] = std::vector<double>(row.begin(), row.end());
    }
    export_scatter(preds, cube, plan, "model_x", dir.file("scatter.csv"));
    const std::string text = slurp(dir.file("scatter.csv"));
    const std::size_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 1 + preds.size() * cube.n_genes);
    CHECK(text.rfind("model,pair,gene,pred,true\n", 0) == 0);

    // Round-trip spot check on the parsed values.
    std::istringstream in(text);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    const auto fields = [&first] {
        std::vector<std::string> out;
        std::stringstream ss(first);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(tok);
        return out;
    }();
    REQUIRE(fields.size() == 5);
    CHECK(fields[0] == "model_x");
    CHECK(fields[3] == fields[4]);  // pred == true for perfect predictions
}

TEST_CASE("empty test set gives a header-only scatter file") {
    TempDir dir;
    const PerturbationCube cube = random_cube(2, 4, 3, 23);
    const SplitPlan plan = make_split(cube, {1}, 0.5, 25);
    export_scatter({}, cube, plan, "m", dir.file("scatter.csv"));
    CHECK(slurp(dir.file("scatter.csv")) == "model,pair,gene,pred,true\n");
}

TEST_CASE("train log CSV honors the timing switch") {
    TempDir dir;
    std::vector<EpochLog> log{{1, 0.5, 0.6, 1.25}, {2, 0.25, 0.3, 1.5}};
    save_train_log_csv(log, dir.file("log.csv"), /*record_timing=*/false);
    const std::string text = slurp(dir.file("log.csv"));
    CHECK(text.find("epoch,train_loss,val_loss,seconds") == 0);
    CHECK(text.find("0.000000") != std::string::npos);
    CHECK(text.find("1.250000") == std::string::npos);
    save_train_log_csv(log, dir.file("log2.csv"), /*record_timing=*/true);
    CHECK(slurp(dir.file("log2.csv")).find("1.250000") != std::string::npos);
}

TEST_CASE("sweep CSV uses the documented header and row order") {
    TempDir dir;
    SweepResult result;
    result.rows.push_back({"m", 5, 0.5, 0, 0.9, 0.01});
    result.rows.push_back({"m", 5, 0.1, 0, 0.8, 0.02});
    save_sweep_csv(result, dir.file("sweep.csv"));
    const std::string text = slurp(dir.file("sweep.csv"));
    CHECK(text.rfind("model,n_train_contexts,adapt_fraction,fold,mean_pearson,mse\n",
                     0) == 0);
    CHECK(text.find("m,5,0.5,0,") != std::string::npos);
}
