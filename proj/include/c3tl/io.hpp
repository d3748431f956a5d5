#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "data.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "split.hpp"
#include "synthetic.hpp"

// File formats. CSV numbers are written with 17 significant digits so a
// save/load round trip reproduces every double bit-exactly; JSON documents
// rely on the library's shortest-round-trip serialization for the same
// guarantee.

namespace c3tl {

using json = nlohmann::json;

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view token, std::size_t line_no) {
    double v = 0.0;
    const char* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" +
                         std::string(token) + "'");
    return v;
}

inline std::size_t parse_index(std::string_view token, std::size_t line_no) {
    std::size_t v = 0;
    const char* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError("line " + std::to_string(line_no) + ": bad index '" +
                         std::string(token) + "'");
    return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return in;
}

inline json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

inline std::string cube_header(std::size_t n_genes) {
    std::string header = "context,perturbation";
    for (std::size_t g = 0; g < n_genes; ++g)
        header += ",gene_" + std::to_string(g);
    return header;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cube CSV: header `context,perturbation,gene_0,...`, one row per observed
// (context, perturbation) pair of delta values. An optional sidecar JSON at
// <path>.meta.json carries axis labels and explicit dimensions.

inline void save_cube_csv(const PerturbationCube& cube, const std::string& path) {
    auto out = detail::open_out(path);
    out << detail::cube_header(cube.n_genes) << "\n";
    for (std::size_t c = 0; c < cube.n_contexts; ++c)
        for (std::size_t p = 0; p < cube.n_perturbations; ++p) {
            if (!cube.is_observed(c, p)) continue;
            out << c << ',' << p;
            for (double v : cube.delta_row(c, p))
                out << ',' << detail::format_double(v);
            out << "\n";
        }
    if (!cube.context_names.empty() || !cube.perturbation_names.empty() ||
        !cube.gene_names.empty()) {
        json meta{{"format", "c3tl-cube-labels"},
                  {"version", 1},
                  {"n_contexts", cube.n_contexts},
                  {"n_perturbations", cube.n_perturbations},
                  {"n_genes", cube.n_genes},
                  {"contexts", cube.context_names},
                  {"perturbations", cube.perturbation_names},
                  {"genes", cube.gene_names}};
        detail::open_out(path + ".meta.json") << meta.dump(2) << "\n";
    }
}

inline PerturbationCube load_cube_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("line 1: empty file");
    std::size_t n_genes = 0;
    {
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < 3 || fields[0] != "context" || fields[1] != "perturbation")
            throw ParseError("line 1: malformed header (expected "
                             "context,perturbation,gene_0,...)");
        n_genes = fields.size() - 2;
        for (std::size_t g = 0; g < n_genes; ++g)
            if (fields[g + 2] != "gene_" + std::to_string(g))
                throw ParseError("line 1: malformed header (bad gene column " +
                                 std::to_string(g) + ")");
    }

    struct RawRow {
        std::size_t c, p, line_no;
        std::vector<double> values;
    };
    std::vector<RawRow> rows;
    std::map<PairKey, std::size_t> seen;  // pair -> first line
    std::size_t max_c = 0, max_p = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != n_genes + 2)
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(n_genes + 2) + " fields, got " +
                             std::to_string(fields.size()));
        RawRow row;
        row.c = detail::parse_index(fields[0], line_no);
        row.p = detail::parse_index(fields[1], line_no);
        row.line_no = line_no;
        const auto [it, inserted] = seen.emplace(PairKey{row.c, row.p}, line_no);
        if (!inserted)
            throw ParseError("line " + std::to_string(line_no) +
                             ": duplicate (context, perturbation) pair, first seen "
                             "on line " +
                             std::to_string(it->second));
        row.values.reserve(n_genes);
        for (std::size_t g = 0; g < n_genes; ++g)
            row.values.push_back(detail::parse_double(fields[g + 2], line_no));
        max_c = std::max(max_c, row.c);
        max_p = std::max(max_p, row.p);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("line 1: cube file has no data rows");

    std::size_t n_contexts = max_c + 1, n_perturbations = max_p + 1;
    std::vector<std::string> context_names, perturbation_names, gene_names;
    const std::string meta_path = path + ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        json meta;
        detail::open_in(meta_path) >> meta;
        const auto nc = meta.at("n_contexts").get<std::size_t>();
        const auto np = meta.at("n_perturbations").get<std::size_t>();
        const auto ng = meta.at("n_genes").get<std::size_t>();
        if (nc < n_contexts || np < n_perturbations || ng != n_genes)
            throw ParseError("sidecar dims disagree with '" + path + "'");
        n_contexts = nc;
        n_perturbations = np;
        context_names = meta.at("contexts").get<std::vector<std::string>>();
        perturbation_names = meta.at("perturbations").get<std::vector<std::string>>();
        gene_names = meta.at("genes").get<std::vector<std::string>>();
    }

    PerturbationCube cube =
        PerturbationCube::empty(n_contexts, n_perturbations, n_genes);
    cube.context_names = std::move(context_names);
    cube.perturbation_names = std::move(perturbation_names);
    cube.gene_names = std::move(gene_names);
    for (const RawRow& row : rows) {
        auto dst = cube.delta_row(row.c, row.p);
        std::copy(row.values.begin(), row.values.end(), dst.begin());
        cube.set_observed(row.c, row.p);
    }
    cube.validate();
    return cube;
}

// ---------------------------------------------------------------------------
// Cell-level CSV: same header, one row per cell, perturbation 0 rows are
// controls. Duplicate pairs are expected here (many cells per condition).

inline void save_cell_csv(std::span<const CellRecord> records, std::size_t n_genes,
                          const std::string& path) {
    auto out = detail::open_out(path);
    out << detail::cube_header(n_genes) << "\n";
    for (const CellRecord& r : records) {
        out << r.context_id << ',' << r.perturbation_id;
        for (double v : r.expression) out << ',' << detail::format_double(v);
        out << "\n";
    }
}

inline std::vector<CellRecord> load_cell_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("line 1: empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "context" || header[1] != "perturbation")
        throw ParseError("line 1: malformed header");
    const std::size_t n_genes = header.size() - 2;
    std::vector<CellRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != n_genes + 2)
            throw ParseError("line " + std::to_string(line_no) +
                             ": wrong field count");
        CellRecord rec;
        rec.context_id = detail::parse_index(fields[0], line_no);
        rec.perturbation_id = detail::parse_index(fields[1], line_no);
        for (std::size_t g = 0; g < n_genes; ++g)
            rec.expression.push_back(detail::parse_double(fields[g + 2], line_no));
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Predictions CSV: cube wire format without cube invariants (typically only
// test pairs are present).

inline void save_predictions_csv(const PredictionMap& preds, std::size_t n_genes,
                                 const std::string& path) {
    auto out = detail::open_out(path);
    out << detail::cube_header(n_genes) << "\n";
    for (const auto& [key, values] : preds) {
        out << key.first << ',' << key.second;
        for (double v : values) out << ',' << detail::format_double(v);
        out << "\n";
    }
}

inline PredictionMap load_predictions_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("line 1: empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "context" || header[1] != "perturbation")
        throw ParseError("line 1: malformed header");
    const std::size_t n_genes = header.size() - 2;
    PredictionMap preds;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != n_genes + 2)
            throw ParseError("line " + std::to_string(line_no) +
                             ": wrong field count");
        const std::size_t c = detail::parse_index(fields[0], line_no);
        const std::size_t p = detail::parse_index(fields[1], line_no);
        std::vector<double> values;
        values.reserve(n_genes);
        for (std::size_t g = 0; g < n_genes; ++g)
            values.push_back(detail::parse_double(fields[g + 2], line_no));
        if (!preds.emplace(PairKey{c, p}, std::move(values)).second)
            throw ParseError("line " + std::to_string(line_no) + ": duplicate pair");
    }
    return preds;
}

// ---------------------------------------------------------------------------
// Split plan JSON.

inline void save_split_json(const SplitPlan& plan, const std::string& path) {
    json roles;
    for (Role r : {Role::Train, Role::AdaptTrain, Role::AdaptVal, Role::Test}) {
        json pairs = json::array();
        for (const auto& [c, p] : plan.pairs_with_role(r))
            pairs.push_back(json::array({c, p}));
        roles[to_string(r)] = std::move(pairs);
    }
    json doc{{"format", "c3tl-split"},
             {"version", 1},
             {"n_contexts", plan.n_contexts},
             {"n_perturbations", plan.n_perturbations},
             {"test_contexts", plan.test_contexts},
             {"seed", plan.seed},
             {"adapt_fraction", plan.adapt_fraction},
             {"adapt_train_fraction", plan.adapt_train_fraction},
             {"validationless", plan.validationless},
             {"roles", std::move(roles)}};
    detail::open_out(path) << doc.dump(2) << "\n";
}

inline SplitPlan load_split_json(const std::string& path) {
    json doc;
    try {
        detail::open_in(path) >> doc;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "c3tl-split")
            throw ParseError("'" + path + "' is not a split plan");
        SplitPlan plan;
        plan.n_contexts = doc.at("n_contexts").get<std::size_t>();
        plan.n_perturbations = doc.at("n_perturbations").get<std::size_t>();
        plan.test_contexts = doc.at("test_contexts").get<std::vector<std::size_t>>();
        plan.seed = doc.at("seed").get<std::uint64_t>();
        plan.adapt_fraction = doc.at("adapt_fraction").get<double>();
        plan.adapt_train_fraction = doc.at("adapt_train_fraction").get<double>();
        plan.validationless = doc.at("validationless").get<bool>();
        plan.roles.assign(plan.n_contexts * plan.n_perturbations, -1);
        for (Role r : {Role::Train, Role::AdaptTrain, Role::AdaptVal, Role::Test})
            for (const auto& entry : doc.at("roles").at(to_string(r))) {
                const std::size_t c = entry.at(0).get<std::size_t>();
                const std::size_t p = entry.at(1).get<std::size_t>();
                if (c >= plan.n_contexts || p >= plan.n_perturbations)
                    throw ParseError("'" + path + "': role pair out of range");
                auto& slot = plan.roles[c * plan.n_perturbations + p];
                if (slot >= 0)
                    throw ParseError("'" + path + "': pair assigned two roles");
                slot = static_cast<std::int8_t>(r);
            }
        return plan;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Checkpoint JSON: self-describing spec plus full-precision weights.

namespace detail {

inline json mlp_spec_to_json(const MlpSpec& s) {
    return json{{"input_dim", s.input_dim},
                {"hidden_dims", s.hidden_dims},
                {"output_dim", s.output_dim},
                {"activation", to_string(s.activation)}};
}

inline MlpSpec mlp_spec_from_json(const json& j) {
    MlpSpec s;
    s.input_dim = j.at("input_dim").get<std::size_t>();
    s.hidden_dims = j.at("hidden_dims").get<std::vector<std::size_t>>();
    s.output_dim = j.at("output_dim").get<std::size_t>();
    s.activation = activation_from_string(j.at("activation").get<std::string>());
    return s;
}

inline json mlp_params_to_json(const MlpParams& p) {
    json layers = json::array();
    for (std::size_t l = 0; l < p.weights.size(); ++l)
        layers.push_back(json{{"weight", matrix_to_json(p.weights[l])},
                              {"bias", matrix_to_json(p.biases[l])}});
    return layers;
}

inline void mlp_params_from_json(const json& j, const MlpSpec& spec, MlpParams& out) {
    out.spec = spec;
    out.weights.clear();
    out.biases.clear();
    for (const auto& layer : j) {
        out.weights.push_back(matrix_from_json(layer.at("weight")));
        out.biases.push_back(matrix_from_json(layer.at("bias")));
    }
    out.validate();
}

inline json c3tl_spec_to_json(const C3tlSpec& s) {
    return json{{"n_contexts", s.n_contexts},
                {"n_perturbations", s.n_perturbations},
                {"n_genes", s.n_genes},
                {"latent_dim", s.latent_dim},
                {"theta_z", mlp_spec_to_json(s.theta_z)},
                {"theta_psi", mlp_spec_to_json(s.theta_psi)},
                {"gamma", mlp_spec_to_json(s.gamma)},
                {"mask_target_in_aggregation", s.mask_target_in_aggregation}};
}

inline C3tlSpec c3tl_spec_from_json(const json& j) {
    C3tlSpec s;
    s.n_contexts = j.at("n_contexts").get<std::size_t>();
    s.n_perturbations = j.at("n_perturbations").get<std::size_t>();
    s.n_genes = j.at("n_genes").get<std::size_t>();
    s.latent_dim = j.at("latent_dim").get<std::size_t>();
    s.theta_z = mlp_spec_from_json(j.at("theta_z"));
    s.theta_psi = mlp_spec_from_json(j.at("theta_psi"));
    s.gamma = mlp_spec_from_json(j.at("gamma"));
    s.mask_target_in_aggregation = j.at("mask_target_in_aggregation").get<bool>();
    return s;
}

}  // namespace detail

struct Checkpoint {
    C3tlParams params;
    std::size_t trained_epochs = 0;
};

inline void save_checkpoint(const C3tlParams& params, const std::string& path,
                            std::size_t trained_epochs = 0) {
    json doc{{"format", "c3tl-checkpoint"},
             {"version", 1},
             {"trained_epochs", trained_epochs},
             {"spec", detail::c3tl_spec_to_json(params.spec)},
             {"weights",
              json{{"theta_z", detail::mlp_params_to_json(params.theta_z)},
                   {"theta_psi", detail::mlp_params_to_json(params.theta_psi)},
                   {"gamma", detail::mlp_params_to_json(params.gamma)}}}};
    detail::open_out(path) << doc.dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    json doc;
    try {
        detail::open_in(path) >> doc;
    } catch (const json::exception& e) {
        throw CorruptCheckpointError("'" + path + "': " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "c3tl-checkpoint")
            throw CorruptCheckpointError("'" + path + "' is not a checkpoint");
        Checkpoint ckpt;
        ckpt.trained_epochs = doc.at("trained_epochs").get<std::size_t>();
        ckpt.params.spec = detail::c3tl_spec_from_json(doc.at("spec"));
        const json& weights = doc.at("weights");
        detail::mlp_params_from_json(weights.at("theta_z"), ckpt.params.spec.theta_z,
                                     ckpt.params.theta_z);
        detail::mlp_params_from_json(weights.at("theta_psi"),
                                     ckpt.params.spec.theta_psi,
                                     ckpt.params.theta_psi);
        detail::mlp_params_from_json(weights.at("gamma"), ckpt.params.spec.gamma,
                                     ckpt.params.gamma);
        ckpt.params.validate();
        return ckpt;
    } catch (const json::exception& e) {
        throw CorruptCheckpointError("'" + path + "': " + e.what());
    } catch (const DimensionError& e) {
        throw CorruptCheckpointError("'" + path + "': " + e.what());
    } catch (const ConfigError& e) {
        throw CorruptCheckpointError("'" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic world JSON: every parameter at full precision.

inline void save_world_json(const SyntheticWorld& world, const std::string& path) {
    const SyntheticSpec& s = world.spec;
    json spec{{"n_contexts", s.n_contexts},
              {"n_perturbations", s.n_perturbations},
              {"n_genes", s.n_genes},
              {"latent_dim", s.latent_dim},
              {"context_shift_scale", s.context_shift_scale},
              {"noise_scale", s.noise_scale},
              {"basal_scale", s.basal_scale},
              {"basal_coupling", s.basal_coupling},
              {"cells_per_condition", s.cells_per_condition},
              {"exact_mode", s.exact_mode},
              {"nonlinearity_gain", s.nonlinearity_gain},
              {"seed", s.seed}};
    json doc{{"format", "c3tl-world"},
             {"version", 1},
             {"spec", std::move(spec)},
             {"pert_latents", detail::matrix_to_json(world.pert_latents)},
             {"context_shifts", detail::matrix_to_json(world.context_shifts)},
             {"map_linear", detail::matrix_to_json(world.map_linear)},
             {"map_nonlinear", detail::matrix_to_json(world.map_nonlinear)},
             {"map_mixing", detail::matrix_to_json(world.map_mixing)},
             {"map_bias", detail::matrix_to_json(world.map_bias)},
             {"basal_means", detail::matrix_to_json(world.basal_means)},
             {"basal_coupling_matrix",
              detail::matrix_to_json(world.basal_coupling_matrix)}};
    detail::open_out(path) << doc.dump() << "\n";
}

inline SyntheticWorld load_world_json(const std::string& path) {
    json doc;
    try {
        detail::open_in(path) >> doc;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    try {
        if (doc.at("format").get<std::string>() != "c3tl-world")
            throw ParseError("'" + path + "' is not a synthetic world");
        const json& s = doc.at("spec");
        SyntheticWorld world;
        world.spec.n_contexts = s.at("n_contexts").get<std::size_t>();
        world.spec.n_perturbations = s.at("n_perturbations").get<std::size_t>();
        world.spec.n_genes = s.at("n_genes").get<std::size_t>();
        world.spec.latent_dim = s.at("latent_dim").get<std::size_t>();
        world.spec.context_shift_scale = s.at("context_shift_scale").get<double>();
        world.spec.noise_scale = s.at("noise_scale").get<double>();
        world.spec.basal_scale = s.at("basal_scale").get<double>();
        world.spec.basal_coupling = s.at("basal_coupling").get<double>();
        world.spec.cells_per_condition = s.at("cells_per_condition").get<std::size_t>();
        world.spec.exact_mode = s.at("exact_mode").get<bool>();
        world.spec.nonlinearity_gain = s.at("nonlinearity_gain").get<double>();
        world.spec.seed = s.at("seed").get<std::uint64_t>();
        world.pert_latents = detail::matrix_from_json(doc.at("pert_latents"));
        world.context_shifts = detail::matrix_from_json(doc.at("context_shifts"));
        world.map_linear = detail::matrix_from_json(doc.at("map_linear"));
        world.map_nonlinear = detail::matrix_from_json(doc.at("map_nonlinear"));
        world.map_mixing = detail::matrix_from_json(doc.at("map_mixing"));
        world.map_bias = detail::matrix_from_json(doc.at("map_bias"));
        world.basal_means = detail::matrix_from_json(doc.at("basal_means"));
        world.basal_coupling_matrix =
            detail::matrix_from_json(doc.at("basal_coupling_matrix"));
        return world;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Reports and logs.

inline void save_train_log_csv(const std::vector<EpochLog>& log,
                               const std::string& path, bool record_timing = true) {
    auto out = detail::open_out(path);
    out << "epoch,train_loss,val_loss,seconds\n";
    char seconds_buf[32];
    for (const EpochLog& e : log) {
        std::snprintf(seconds_buf, sizeof(seconds_buf), "%.6f",
                      record_timing ? e.seconds : 0.0);
        out << e.epoch << ',' << detail::format_double(e.train_loss) << ','
            << detail::format_double(e.val_loss) << ',' << seconds_buf << "\n";
    }
}

inline json metrics_to_json(const MetricsReport& r) {
    return json{{"format", "c3tl-metrics"},
                {"version", 1},
                {"model", r.model},
                {"fold", r.fold},
                {"seed", r.seed},
                {"correlation_mode", to_string(r.mode)},
                {"mean_pearson", r.mean_pearson},
                {"mse", r.mse},
                {"n_test_pairs", r.n_test_pairs},
                {"n_excluded", r.n_excluded},
                {"seconds_per_epoch", r.seconds_per_epoch},
                {"per_gene_pearson", r.per_gene_pearson}};
}

inline void save_metrics_json(const MetricsReport& r, const std::string& path) {
    detail::open_out(path) << metrics_to_json(r).dump(2) << "\n";
}

inline void save_sweep_csv(const SweepResult& result, const std::string& path) {
    auto out = detail::open_out(path);
    out << "model,n_train_contexts,adapt_fraction,fold,mean_pearson,mse\n";
    for (const SweepRow& row : result.rows)
        out << row.model << ',' << row.n_train_contexts << ','
            << detail::format_double(row.adapt_fraction) << ',' << row.fold << ','
            << detail::format_double(row.mean_pearson) << ','
            << detail::format_double(row.mse) << "\n";
}

/// Plot-ready long-format CSV of predictions versus observed test values.
inline void export_scatter(const PredictionMap& preds, const PerturbationCube& cube,
                           const SplitPlan& plan, const std::string& model,
                           const std::string& path) {
    const CubeView view = CubeView::evaluation(cube, plan);
    auto out = detail::open_out(path);
    out << "model,pair,gene,pred,true\n";
    for (const auto& [key, values] : preds) {
        const auto& [c, p] = key;
        if (!plan.has_role(c, p) || plan.role(c, p) != Role::Test)
            throw CoverageError("export_scatter: pair (context " + std::to_string(c) +
                                ", perturbation " + std::to_string(p) +
                                ") is not a test pair");
        if (values.size() != cube.n_genes)
            throw DimensionError("export_scatter: prediction length != n_genes");
        const auto target = view.row(c, p);
        for (std::size_t g = 0; g < cube.n_genes; ++g) {
            out << model << ",c" << c << ":p" << p << ',';
            if (!cube.gene_names.empty())
                out << cube.gene_names[g];
            else
                out << 'g' << g;
            out << ',' << detail::format_double(values[g]) << ','
                << detail::format_double(target[g]) << "\n";
        }
    }
}

}  // namespace c3tl
