// Command-line front end wiring the library into reproducible runs.
//
// Every command reads one JSON config (all fields defaulted, unknown keys
// rejected), derives all randomness from the single top-level seed, and
// echoes the fully resolved config into its output directory. Identical
// config + seed means byte-identical output files.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "c3tl/c3tl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace c3tl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

json default_config() {
    return json{
        {"format_version", 1},
        {"seed", 0},
        {"synthetic",
         {{"n_contexts", 4},
          {"n_perturbations", 8},
          {"n_genes", 16},
          {"latent_dim", 2},
          {"context_shift_scale", 1.0},
          {"noise_scale", 0.1},
          {"basal_scale", 1.0},
          {"basal_coupling", 0.0},
          {"cells_per_condition", 100},
          {"exact_mode", true},
          {"nonlinearity_gain", 0.3},
          {"emit_cells", false}}},
        {"model",
         {{"latent_dim", 32},
          {"hidden_dims", json::array({128})},
          {"activation", "tanh"},
          {"mask_target_in_aggregation", false}}},
        {"train",
         {{"epochs", 200},
          {"batch_size", 64},
          {"learning_rate", 1e-3},
          {"beta1", 0.9},
          {"beta2", 0.999},
          {"epsilon", 1e-8},
          {"patience", 20},
          {"aggregation_subsample", 0},
          {"record_timing", false}}},
        {"split", {{"test_contexts", json::array()}, {"adapt_fraction", 0.1}}},
        {"data", {{"hvg", 0}, {"prune_duplicates", false}}},
        {"cv", {{"folds", json::array()}, {"n_folds", 5}, {"fold_size", 1}}},
        {"sweep",
         {{"context_counts", json::array()},
          {"adaptation_fractions", json::array()},
          {"n_test_contexts", 2},
          {"repeats", 1}}},
        {"eval",
         {{"correlation_mode", "per_gene"},
          {"models", json::array({"c3tl", "mean_baseline", "closest_cell"})}}}};
}

void reject_unknown_keys(const json& given, const json& defaults,
                         const std::string& prefix) {
    if (!given.is_object()) return;
    for (const auto& [key, value] : given.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (!defaults.contains(key))
            throw ConfigError("unknown config key '" + path + "'");
        if (defaults.at(key).is_object()) reject_unknown_keys(value, defaults.at(key), path);
    }
}

void merge_into(json& base, const json& overrides) {
    for (const auto& [key, value] : overrides.items()) {
        if (value.is_object() && base.contains(key) && base.at(key).is_object())
            merge_into(base.at(key), value);
        else
            base[key] = value;
    }
}

/// Apply one `--set dotted.path=value` override; values parse as JSON when
/// possible and fall back to strings.
void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // plain string
    }
    json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("bad --set path '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

struct Cli {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed_override;
    json config;

    void resolve() {
        config = default_config();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config '" + config_path + "'");
            json user;
            try {
                in >> user;
            } catch (const json::exception& e) {
                throw ConfigError("config '" + config_path + "': " + e.what());
            }
            reject_unknown_keys(user, config, "");
            merge_into(config, user);
        }
        for (const std::string& s : overrides) apply_override(config, s);
        reject_unknown_keys(config, default_config(), "");
        if (seed_override) config["seed"] = *seed_override;
    }

    std::uint64_t seed() const { return config.at("seed").get<std::uint64_t>(); }
};

SyntheticSpec synthetic_spec_from(const json& cfg, std::uint64_t master_seed) {
    const json& s = cfg.at("synthetic");
    SyntheticSpec spec;
    spec.n_contexts = s.at("n_contexts").get<std::size_t>();
    spec.n_perturbations = s.at("n_perturbations").get<std::size_t>();
    spec.n_genes = s.at("n_genes").get<std::size_t>();
    spec.latent_dim = s.at("latent_dim").get<std::size_t>();
    spec.context_shift_scale = s.at("context_shift_scale").get<double>();
    spec.noise_scale = s.at("noise_scale").get<double>();
    spec.basal_scale = s.at("basal_scale").get<double>();
    spec.basal_coupling = s.at("basal_coupling").get<double>();
    spec.cells_per_condition = s.at("cells_per_condition").get<std::size_t>();
    spec.exact_mode = s.at("exact_mode").get<bool>();
    spec.nonlinearity_gain = s.at("nonlinearity_gain").get<double>();
    spec.seed = derive_seed(master_seed, "synth");
    return spec;
}

TrainConfig train_config_from(const json& cfg, std::uint64_t master_seed) {
    const json& t = cfg.at("train");
    TrainConfig config;
    config.epochs = t.at("epochs").get<std::size_t>();
    config.batch_size = t.at("batch_size").get<std::size_t>();
    config.adam.learning_rate = t.at("learning_rate").get<double>();
    config.adam.beta1 = t.at("beta1").get<double>();
    config.adam.beta2 = t.at("beta2").get<double>();
    config.adam.epsilon = t.at("epsilon").get<double>();
    config.patience = t.at("patience").get<std::size_t>();
    config.aggregation_subsample = t.at("aggregation_subsample").get<std::size_t>();
    config.seed = derive_seed(master_seed, "train");
    config.validate();
    return config;
}

C3tlRunnerOptions runner_options_from(const json& cfg) {
    const json& m = cfg.at("model");
    C3tlRunnerOptions options;
    options.latent_dim = m.at("latent_dim").get<std::size_t>();
    options.hidden_dims = m.at("hidden_dims").get<std::vector<std::size_t>>();
    options.activation = activation_from_string(m.at("activation").get<std::string>());
    options.mask_target_in_aggregation = m.at("mask_target_in_aggregation").get<bool>();
    return options;
}

C3tlSpec model_spec_from(const json& cfg, const PerturbationCube& cube) {
    const C3tlRunnerOptions o = runner_options_from(cfg);
    C3tlSpec spec =
        C3tlSpec::defaults(cube.n_contexts, cube.n_perturbations, cube.n_genes,
                           o.latent_dim, o.hidden_dims, o.activation);
    spec.mask_target_in_aggregation = o.mask_target_in_aggregation;
    return spec;
}

CorrelationMode correlation_mode_from(const json& cfg) {
    return correlation_mode_from_string(
        cfg.at("eval").at("correlation_mode").get<std::string>());
}

std::vector<Runner> runners_from(const json& cfg) {
    std::vector<Runner> runners;
    for (const auto& name : cfg.at("eval").at("models")) {
        const std::string model = name.get<std::string>();
        if (model == "c3tl") {
            C3tlRunnerOptions options = runner_options_from(cfg);
            options.train = train_config_from(cfg, cfg.at("seed").get<std::uint64_t>());
            runners.push_back(make_c3tl_runner(options));
        } else if (model == "mean_baseline") {
            runners.push_back(make_mean_baseline_runner());
        } else if (model == "closest_cell") {
            runners.push_back(make_closest_cell_runner());
        } else {
            throw ConfigError("unknown model '" + model +
                              "' (expected c3tl|mean_baseline|closest_cell)");
        }
    }
    return runners;
}

void write_resolved_config(const json& config, const fs::path& out_dir) {
    std::ofstream out(out_dir / "config.resolved.json");
    if (!out) throw Error("cannot write resolved config");
    out << config.dump(2) << "\n";
}

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

PerturbationCube load_cube_checked(const std::string& path) {
    if (!fs::exists(path)) throw Error("cube file '" + path + "' does not exist");
    return load_cube_csv(path);
}

/// Duplicate pruning rewrites the perturbation axis, so it must run before
/// any split plan is created or loaded.
PerturbationCube apply_pruning(PerturbationCube cube, const json& cfg) {
    if (cfg.at("data").at("prune_duplicates").get<bool>())
        cube = prune_duplicate_perturbations(cube);
    return cube;
}

/// Optional restriction to the top-k most variable genes. The ranking reads
/// the plan's training view when a plan applies (no test influence), all
/// observed pairs otherwise.
PerturbationCube apply_hvg(PerturbationCube cube, const json& cfg,
                           const SplitPlan* plan) {
    const std::size_t k = cfg.at("data").at("hvg").get<std::size_t>();
    if (k > 0 && k < cube.n_genes) {
        const GeneSelection sel =
            plan ? select_hvg(CubeView::training(cube, *plan), k)
                 : select_hvg(cube, k);
        cube = project_genes(cube, sel);
    }
    return cube;
}

SplitPlan obtain_plan(const PerturbationCube& cube, const json& cfg,
                      const std::string& plan_path, std::uint64_t master_seed,
                      const fs::path& out_dir) {
    if (!plan_path.empty()) {
        if (!fs::exists(plan_path))
            throw Error("plan file '" + plan_path + "' does not exist");
        SplitPlan plan = load_split_json(plan_path);
        if (plan.n_contexts != cube.n_contexts ||
            plan.n_perturbations != cube.n_perturbations)
            throw Error("plan dims disagree with cube dims");
        return plan;
    }
    const auto test_contexts =
        cfg.at("split").at("test_contexts").get<std::vector<std::size_t>>();
    if (test_contexts.empty())
        throw ConfigError("no --plan given and split.test_contexts is empty");
    const double fraction = cfg.at("split").at("adapt_fraction").get<double>();
    SplitPlan plan =
        make_split(cube, test_contexts, fraction, derive_seed(master_seed, "split"));
    save_split_json(plan, (out_dir / "plan.json").string());
    return plan;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Cli& cli, const std::string& out) {
    const SyntheticSpec spec = synthetic_spec_from(cli.config, cli.seed());
    spec.validate();  // fail before any file exists
    const SyntheticWorld world = generate_world(spec);
    const double zero_loss = oracle_zero_loss_check(world);
    if (!(zero_loss <= 1e-12))
        throw TrainingDivergedError("synthetic self-check failed: theoretical "
                                    "pipeline loss " +
                                        std::to_string(zero_loss),
                                    0);

    const fs::path dir = prepare_out_dir(out);
    save_world_json(world, (dir / "world.json").string());
    if (spec.exact_mode) {
        save_cube_csv(emit_exact_cube(world), (dir / "cube.csv").string());
    } else {
        const auto records = sample_cells(world);
        const PerturbationCube cube = compute_deltas(pseudobulk(
            records, spec.n_contexts, spec.n_perturbations, spec.n_genes));
        PerturbationCube named = cube;
        for (std::size_t c = 0; c < spec.n_contexts; ++c)
            named.context_names.push_back("c" + std::to_string(c));
        save_cube_csv(named, (dir / "cube.csv").string());
        if (cli.config.at("synthetic").at("emit_cells").get<bool>())
            save_cell_csv(records, spec.n_genes, (dir / "cells.csv").string());
    }
    write_resolved_config(cli.config, dir);
    std::cout << "synth: wrote world.json and cube.csv to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_train(const Cli& cli, const std::string& cube_path,
              const std::string& plan_path, const std::string& resume_path,
              const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    const SplitPlan plan = obtain_plan(cube, cli.config, plan_path, cli.seed(), dir);
    cube = apply_hvg(std::move(cube), cli.config, &plan);
    const C3tlSpec spec = model_spec_from(cli.config, cube);
    const TrainConfig config = train_config_from(cli.config, cli.seed());

    TrainResult result;
    if (!resume_path.empty()) {
        const Checkpoint ckpt = load_checkpoint(resume_path);
        if (ckpt.params.spec != spec)
            throw CorruptCheckpointError(
                "resume checkpoint spec disagrees with the configured model");
        result = train(cube, plan, spec, config, &ckpt.params, ckpt.trained_epochs);
    } else {
        result = train(cube, plan, spec, config);
    }

    const bool record_timing = cli.config.at("train").at("record_timing").get<bool>();
    save_checkpoint(result.params, (dir / "checkpoint.json").string(),
                    result.log.empty() ? 0 : result.log.back().epoch);
    save_train_log_csv(result.log, (dir / "train_log.csv").string(), record_timing);
    write_resolved_config(cli.config, dir);
    std::cout << "train: " << result.log.size() << " epochs, final train loss "
              << result.log.back().train_loss << ", best epoch "
              << result.best_epoch << "\n";
    return kExitOk;
}

PredictionMap model_predictions(const C3tlParams& params,
                                const PerturbationCube& cube, const SplitPlan& plan,
                                const std::vector<PairKey>& pairs) {
    const CubeView view = CubeView::training(cube, plan);
    PredictionMap preds;
    for (const auto& [c, p] : pairs) {
        const Matrix row = predict(params, view, p, c);
        preds[{c, p}] = std::vector<double>(row.row(0).begin(), row.row(0).end());
    }
    return preds;
}

int cmd_predict(const Cli& cli, const std::string& cube_path,
                const std::string& plan_path, const std::string& checkpoint_path,
                const std::string& pairs_mode, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    const SplitPlan plan = obtain_plan(cube, cli.config, plan_path, cli.seed(), dir);
    cube = apply_hvg(std::move(cube), cli.config, &plan);
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.params.spec.n_genes != cube.n_genes ||
        ckpt.params.spec.n_contexts != cube.n_contexts ||
        ckpt.params.spec.n_perturbations != cube.n_perturbations)
        throw CorruptCheckpointError("checkpoint dims disagree with the cube");

    std::vector<PairKey> pairs;
    if (pairs_mode == "test") {
        pairs = plan.pairs_with_role(Role::Test);
    } else if (pairs_mode == "grid") {
        for (std::size_t c = 0; c < cube.n_contexts; ++c)
            for (std::size_t p = 0; p < cube.n_perturbations; ++p)
                pairs.emplace_back(c, p);
    } else {
        throw ConfigError("--pairs must be test or grid");
    }
    const PredictionMap preds = model_predictions(ckpt.params, cube, plan, pairs);
    save_predictions_csv(preds, cube.n_genes, (dir / "predictions.csv").string());
    write_resolved_config(cli.config, dir);
    std::cout << "predict: wrote " << preds.size() << " rows\n";
    return kExitOk;
}

int cmd_eval(const Cli& cli, const std::string& cube_path,
             const std::string& plan_path, const std::string& checkpoint_path,
             const std::string& predictions_path, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    const SplitPlan plan = obtain_plan(cube, cli.config, plan_path, cli.seed(), dir);
    cube = apply_hvg(std::move(cube), cli.config, &plan);

    PredictionMap preds;
    std::string model_name;
    if (!predictions_path.empty()) {
        preds = load_predictions_csv(predictions_path);
        model_name = "predictions";
    } else if (!checkpoint_path.empty()) {
        const Checkpoint ckpt = load_checkpoint(checkpoint_path);
        preds = model_predictions(ckpt.params, cube, plan,
                                  plan.pairs_with_role(Role::Test));
        model_name = "c3tl";
        save_predictions_csv(preds, cube.n_genes, (dir / "predictions.csv").string());
    } else {
        throw ConfigError("eval needs --checkpoint or --predictions");
    }

    MetricsReport report =
        score_predictions(preds, cube, plan, correlation_mode_from(cli.config));
    report.model = model_name;
    report.seed = cli.seed();
    save_metrics_json(report, (dir / "metrics.json").string());
    export_scatter(preds, cube, plan, model_name, (dir / "scatter.csv").string());
    write_resolved_config(cli.config, dir);
    std::cout << "eval: mean_pearson " << report.mean_pearson << ", mse "
              << report.mse << " over " << report.n_test_pairs << " test pairs\n";
    return kExitOk;
}

int cmd_baseline(const Cli& cli, const std::string& cube_path,
                 const std::string& plan_path, const std::string& which,
                 const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    const SplitPlan plan = obtain_plan(cube, cli.config, plan_path, cli.seed(), dir);
    cube = apply_hvg(std::move(cube), cli.config, &plan);

    std::vector<Runner> runners;
    if (which == "mean" || which == "both") runners.push_back(make_mean_baseline_runner());
    if (which == "closest" || which == "both")
        runners.push_back(make_closest_cell_runner());
    if (runners.empty()) throw ConfigError("--which must be mean, closest, or both");

    const auto test_pairs = plan.pairs_with_role(Role::Test);
    for (const Runner& runner : runners) {
        const PredictionMap preds = runner.run(cube, plan, test_pairs, 0);
        MetricsReport report =
            score_predictions(preds, cube, plan, correlation_mode_from(cli.config));
        report.model = runner.name;
        report.seed = cli.seed();
        save_metrics_json(report, (dir / ("metrics_" + runner.name + ".json")).string());
        export_scatter(preds, cube, plan, runner.name,
                       (dir / ("scatter_" + runner.name + ".csv")).string());
        std::cout << "baseline " << runner.name << ": mean_pearson "
                  << report.mean_pearson << ", mse " << report.mse << "\n";
    }
    write_resolved_config(cli.config, dir);
    return kExitOk;
}

int cmd_cv(const Cli& cli, const std::string& cube_path, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    cube = apply_hvg(std::move(cube), cli.config, nullptr);

    std::vector<std::vector<std::size_t>> folds;
    for (const auto& fold : cli.config.at("cv").at("folds"))
        folds.push_back(fold.get<std::vector<std::size_t>>());
    if (folds.empty()) {
        const std::size_t n_folds = cli.config.at("cv").at("n_folds").get<std::size_t>();
        const std::size_t fold_size =
            cli.config.at("cv").at("fold_size").get<std::size_t>();
        if (n_folds * fold_size >= cube.n_contexts)
            throw ConfigError("cv folds would consume every context");
        std::vector<std::size_t> order(cube.n_contexts);
        std::iota(order.begin(), order.end(), 0);
        SplitMix64 rng(derive_seed(cli.seed(), "cv-contexts"));
        rng.shuffle(order);
        for (std::size_t f = 0; f < n_folds; ++f)
            folds.emplace_back(order.begin() + f * fold_size,
                               order.begin() + (f + 1) * fold_size);
        for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    }

    CvConfig config;
    config.adapt_fraction = cli.config.at("split").at("adapt_fraction").get<double>();
    config.seed = cli.seed();
    config.mode = correlation_mode_from(cli.config);

    json summary{{"format", "c3tl-cv-summary"}, {"version", 1}, {"models", json::object()}};
    std::ofstream csv(dir / "cv.csv");
    csv << "model,fold,mean_pearson,mse\n";
    char buf[64];
    bool plans_written = false;
    for (const Runner& runner : runners_from(cli.config)) {
        const CvResult result = run_cv(cube, folds, runner, config);
        if (!plans_written) {
            for (std::size_t i = 0; i < result.plans.size(); ++i)
                save_split_json(result.plans[i],
                                (dir / ("fold_" + std::to_string(i) + ".plan.json"))
                                    .string());
            plans_written = true;
        }
        for (const MetricsReport& fold : result.folds) {
            std::snprintf(buf, sizeof(buf), "%.17g", fold.mean_pearson);
            csv << runner.name << ',' << fold.fold << ',' << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", fold.mse);
            csv << ',' << buf << "\n";
        }
        summary["models"][runner.name] = {{"pearson_mean", result.pearson_mean},
                                          {"pearson_std", result.pearson_std},
                                          {"mse_mean", result.mse_mean},
                                          {"mse_std", result.mse_std},
                                          {"n_folds", result.folds.size()}};
        std::cout << "cv " << runner.name << ": pearson " << result.pearson_mean
                  << " +- " << result.pearson_std << ", mse " << result.mse_mean
                  << " +- " << result.mse_std << "\n";
    }
    csv.close();
    std::ofstream(dir / "cv_summary.json") << summary.dump(2) << "\n";
    write_resolved_config(cli.config, dir);
    return kExitOk;
}

int cmd_sweep(const Cli& cli, const std::string& cube_path, const std::string& out) {
    const fs::path dir = prepare_out_dir(out);
    PerturbationCube cube = apply_pruning(load_cube_checked(cube_path), cli.config);
    cube = apply_hvg(std::move(cube), cli.config, nullptr);

    const json& s = cli.config.at("sweep");
    SweepGrid grid;
    grid.context_counts = s.at("context_counts").get<std::vector<std::size_t>>();
    grid.adaptation_fractions = s.at("adaptation_fractions").get<std::vector<double>>();
    grid.n_test_contexts = s.at("n_test_contexts").get<std::size_t>();
    grid.repeats = s.at("repeats").get<std::size_t>();

    const std::vector<Runner> runners = runners_from(cli.config);
    const SweepResult result = run_sensitivity_sweep(
        cube, grid, runners, cli.seed(), correlation_mode_from(cli.config));
    save_sweep_csv(result, (dir / "sweep.csv").string());
    if (!result.skipped.empty()) {
        std::ofstream skipped(dir / "sweep_skipped.txt");
        for (const std::string& line : result.skipped) skipped << line << "\n";
    }
    write_resolved_config(cli.config, dir);
    std::cout << "sweep: " << result.rows.size() << " rows, "
              << result.skipped.size() << " skipped cells\n";
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"context-transfer perturbation-effect model"};
    app.require_subcommand(1);

    Cli cli;
    std::string out, cube_path, plan_path, checkpoint_path, predictions_path;
    std::string resume_path, pairs_mode = "test", which = "both";

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", cli.config_path, "JSON config file");
        cmd->add_option("--set", cli.overrides,
                        "override a config value, e.g. --set train.epochs=50");
        cmd->add_option("--seed", cli.seed_override, "override the master seed");
        cmd->add_option("--out", out, "output directory")->required();
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic world + cube");
    add_common(synth);

    CLI::App* train_cmd = app.add_subcommand("train", "train the model on a cube");
    add_common(train_cmd);
    train_cmd->add_option("--cube", cube_path, "cube CSV")->required();
    train_cmd->add_option("--plan", plan_path, "split plan JSON");
    train_cmd->add_option("--resume", resume_path, "checkpoint to continue from");

    CLI::App* predict_cmd = app.add_subcommand("predict", "predict with a checkpoint");
    add_common(predict_cmd);
    predict_cmd->add_option("--cube", cube_path, "cube CSV")->required();
    predict_cmd->add_option("--plan", plan_path, "split plan JSON");
    predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")
        ->required();
    predict_cmd->add_option("--pairs", pairs_mode, "test (default) or grid");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions on test pairs");
    add_common(eval_cmd);
    eval_cmd->add_option("--cube", cube_path, "cube CSV")->required();
    eval_cmd->add_option("--plan", plan_path, "split plan JSON");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON");
    eval_cmd->add_option("--predictions", predictions_path, "predictions CSV");

    CLI::App* baseline_cmd =
        app.add_subcommand("baseline", "run the closed-form baselines");
    add_common(baseline_cmd);
    baseline_cmd->add_option("--cube", cube_path, "cube CSV")->required();
    baseline_cmd->add_option("--plan", plan_path, "split plan JSON");
    baseline_cmd->add_option("--which", which, "mean, closest, or both");

    CLI::App* cv_cmd = app.add_subcommand("cv", "leave-context-out cross-validation");
    add_common(cv_cmd);
    cv_cmd->add_option("--cube", cube_path, "cube CSV")->required();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "data-scarcity sensitivity sweep");
    add_common(sweep_cmd);
    sweep_cmd->add_option("--cube", cube_path, "cube CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: usage: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        cli.resolve();
        if (synth->parsed()) return cmd_synth(cli, out);
        if (train_cmd->parsed())
            return cmd_train(cli, cube_path, plan_path, resume_path, out);
        if (predict_cmd->parsed())
            return cmd_predict(cli, cube_path, plan_path, checkpoint_path, pairs_mode,
                               out);
        if (eval_cmd->parsed())
            return cmd_eval(cli, cube_path, plan_path, checkpoint_path,
                            predictions_path, out);
        if (baseline_cmd->parsed())
            return cmd_baseline(cli, cube_path, plan_path, which, out);
        if (cv_cmd->parsed()) return cmd_cv(cli, cube_path, out);
        if (sweep_cmd->parsed()) return cmd_sweep(cli, cube_path, out);
        std::cerr << "error: usage: no subcommand\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const GenerationError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return kExitData;
    } catch (const json::exception& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
