#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/config.hpp"
#include "odflow/design.hpp"
#include "odflow/downscale.hpp"
#include "odflow/features.hpp"
#include "odflow/flows.hpp"
#include "odflow/geojson.hpp"
#include "odflow/metrics.hpp"
#include "odflow/model.hpp"
#include "odflow/sensitivity.hpp"
#include "odflow/serialize.hpp"
#include "odflow/synth.hpp"
#include "odflow/tuning.hpp"
#include "odflow/version.hpp"

namespace odflow::stages {

namespace fs = std::filesystem;

// Artifacts are written to a temp file and renamed, so an interrupted run
// never leaves a torn file behind.
inline void write_text_atomic(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string config_hash(const RunConfig& config) {
  std::string blob;
  for (const auto& [key, value] : config.explicit_values()) blob += key + "=" + value + "\n";
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(blob)));
  return buf;
}

inline void write_manifest(const RunConfig& config, const std::string& stage,
                           const std::vector<std::pair<std::string, std::string>>& inputs,
                           nlohmann::ordered_json extra = {}) {
  nlohmann::ordered_json doc;
  doc["stage"] = stage;
  doc["version"] = kVersion;
  doc["config_hash"] = config_hash(config);
  doc["config"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config.explicit_values()) doc["config"][key] = value;
  doc["seeds"] = nlohmann::ordered_json::object();
  for (const char* key : {"split_seed", "model_seed", "seeds", "synth_seed"})
    doc["seeds"][key] = config.get(key);
  doc["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [name, path] : inputs) doc["inputs"][name] = path;
  if (!extra.is_null()) doc["detail"] = std::move(extra);
  doc["created"] = static_cast<long long>(
      std::chrono::duration_cast<std::chrono::seconds>(
          std::chrono::system_clock::now().time_since_epoch())
          .count());
  const fs::path out_dir = config.get("out_dir");
  write_text_atomic(out_dir / ("manifest_" + stage + ".json"), doc.dump(2) + "\n");
}

// Bad enum-like config values are usage errors, not runtime failures.
template <typename Fn>
auto parse_config_value(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

inline void write_metrics(const RunConfig& config, ModelKind kind, const std::string& scope,
                          const std::string& level_name, const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["kind"] = kind_name(kind);
  doc["scope"] = scope;
  doc["level_name"] = level_name;
  doc["mse_z"] = report.mse_z;
  doc["rmse_trips"] = report.rmse_trips;
  doc["n"] = report.n;
  const fs::path out_dir = config.get("out_dir");
  write_text_atomic(out_dir / ("metrics_" + std::string(kind_name(kind)) + "_" + scope + ".json"),
                    doc.dump(2) + "\n");
}

// --- synth ------------------------------------------------------------------

inline void stage_synth(const RunConfig& config) {
  SynthSpec spec;
  spec.coarse_nx = static_cast<int>(config.get_int("synth_nx"));
  spec.coarse_ny = static_cast<int>(config.get_int("synth_ny"));
  spec.subdivision = static_cast<int>(config.get_int("synth_sub"));
  spec.seed = static_cast<std::uint64_t>(config.get_int("synth_seed"));
  spec.rule = parse_config_value([&] { return parse_flow_rule(config.get("synth_rule")); });
  spec.noise = config.get_double("synth_noise");
  spec.scale = config.get_double("synth_scale");
  spec.nonresidential_fine = static_cast<int>(config.get_int("synth_nonresidential"));

  const SynthWorld world = generate(spec);
  const fs::path out_dir = config.get("out_dir");
  const char delim = config.get_delim();

  write_text_atomic(out_dir / "coarse_zoning.geojson",
                    zoning_to_geojson(world.coarse, config.get("id_property")).dump(2) + "\n");
  write_text_atomic(out_dir / "fine_zoning.geojson",
                    zoning_to_geojson(world.fine, config.get("id_property")).dump(2) + "\n");
  {
    std::ostringstream buf;
    write_features_csv(buf, world.coarse_features, delim);
    write_text_atomic(out_dir / "coarse_features.csv", buf.str());
  }
  {
    std::ostringstream buf;
    write_features_csv(buf, world.fine_features, delim);
    write_text_atomic(out_dir / "fine_features.csv", buf.str());
  }
  {
    std::ostringstream buf;
    write_flows_csv(buf, world.fine_flows, delim);
    write_text_atomic(out_dir / "fine_flows.csv", buf.str());
  }
  {
    std::ostringstream buf;
    write_flows_csv(buf, world.coarse_flows, delim);
    write_text_atomic(out_dir / "coarse_flows.csv", buf.str());
  }
  {
    std::ostringstream buf;
    world.write_trips_csv(buf, delim);
    write_text_atomic(out_dir / "trips.csv", buf.str());
  }

  nlohmann::ordered_json detail;
  detail["rule"] = flow_rule_name(spec.rule);
  detail["total_trips"] = world.fine_flows.total_trips;
  detail["coarse_units"] = world.coarse.size();
  detail["fine_units"] = world.fine.size();
  if (spec.rule == FlowRule::affine) {
    detail["affine_base"] = world.affine.base;
  } else {
    detail["gravity_k"] = world.gravity_k;
    detail["gravity_soften"] = world.gravity_soften;
  }
  write_manifest(config, "synth", {}, std::move(detail));
}

// --- ingest -----------------------------------------------------------------

inline void stage_ingest(const RunConfig& config) {
  const fs::path zoning_path = config.require_path("zoning");
  const fs::path trips_path = config.require_path("trips");
  const Zoning zoning =
      load_zoning_geojson_file(zoning_path.string(), config.get("id_property"),
                               config.get("level_name"));
  const SpatialIndex index(zoning);

  TripColumns columns;
  columns.pickup_x = config.get("pickup_x");
  columns.pickup_y = config.get("pickup_y");
  columns.dropoff_x = config.get("dropoff_x");
  columns.dropoff_y = config.get("dropoff_y");

  std::ifstream trips(trips_path);
  if (!trips) throw std::runtime_error("cannot open trips file '" + trips_path.string() + "'");
  const AggregateResult result =
      filter_and_aggregate(trips, zoning, index, columns, config.get_delim());

  const fs::path out_dir = config.get("out_dir");
  std::ostringstream buf;
  write_flows_csv(buf, result.table, config.get_delim());
  write_text_atomic(out_dir / "flows.csv", buf.str());

  nlohmann::ordered_json detail;
  detail["rows"] = result.rows;
  detail["aggregated_trips"] = result.table.total_trips;
  detail["dropped_outside"] = result.dropped;
  detail["malformed_rows"] = result.malformed;
  write_manifest(config, "ingest",
                 {{"zoning", zoning_path.string()}, {"trips", trips_path.string()}},
                 std::move(detail));
}

// --- shared training preparation ---------------------------------------------

struct PreparedData {
  FeatureTable features;  // after imputation
  NormalizationParams params;
  SplitDataset data;  // x standardized everywhere, y standardized by train-fitted target
};

inline PreparedData prepare_training(const RunConfig& config) {
  const fs::path flows_path = config.require_path("flows");  // the ingest artifact
  const fs::path features_path = config.require_path("features");
  const bool population = config.get("std_dev") == "population";
  if (!population && config.get("std_dev") != "sample")
    throw ConfigError("std_dev must be population or sample");

  PreparedData prep;
  {
    std::ifstream in(features_path);
    prep.features = mean_impute(read_features_csv(in, config.get_delim()));
  }
  prep.params = fit_feature_params(prep.features, population);

  ODFlowTable flows;
  {
    std::ifstream in(flows_path);
    flows = read_flows_csv(in, config.get("level_name"), config.get_delim());
  }
  ODDesignMatrix matrix = assemble(flows, prep.features, config.get_bool("include_zero_pairs"));
  standardize_features_inplace(matrix, prep.params);
  prep.data = split(matrix, config.get_double("split_ratio"),
                    static_cast<std::uint64_t>(config.get_int("split_seed")));
  // Target normalization is fitted on the training rows only; the held-out
  // rows reuse those parameters.
  prep.params.target = zscore_fit(prep.data.train.y, population, "__target__");
  standardize_target_inplace(prep.data.train, prep.params.target);
  standardize_target_inplace(prep.data.test, prep.params.target);
  return prep;
}

inline TrainConfig train_config_from(const RunConfig& config, ModelKind kind) {
  const bool allow = config.get_bool("allow_nonstandard");
  switch (kind) {
    case ModelKind::linear: {
      LinearConfig c;
      c.allow_nonstandard = allow;
      return c;
    }
    case ModelKind::forest: {
      ForestConfig c;
      c.trees = static_cast<int>(config.get_int("trees"));
      c.max_features =
          parse_config_value([&] { return parse_max_features(config.get("max_features")); });
      c.seed = static_cast<std::uint64_t>(config.get_int("model_seed"));
      c.min_samples_split = static_cast<int>(config.get_int("min_samples_split"));
      c.allow_nonstandard = allow;
      return c;
    }
    case ModelKind::svr: {
      SvrConfig c;
      c.cost = config.get_double("cost");
      c.epsilon = config.get_double("epsilon");
      c.gamma = config.get_double("gamma");
      c.tol = config.get_double("svr_tol");
      c.max_pair_updates = static_cast<std::uint64_t>(config.get_int("max_pair_updates"));
      c.allow_nonstandard = allow;
      return c;
    }
    case ModelKind::fnn: {
      FnnConfig c;
      c.width = static_cast<int>(config.get_int("width"));
      c.depth = static_cast<int>(config.get_int("depth"));
      c.seed = static_cast<std::uint64_t>(config.get_int("model_seed"));
      c.epochs = static_cast<int>(config.get_int("epochs"));
      c.batch = static_cast<int>(config.get_int("batch"));
      c.beta1 = config.get_double("beta1");
      c.beta2 = config.get_double("beta2");
      c.lr_peak = config.get_double("lr_peak");
      c.lr_floor = config.get_double("lr_floor");
      c.lr_cycles = static_cast<int>(config.get_int("lr_cycles"));
      c.allow_nonstandard = allow;
      return c;
    }
  }
  throw ConfigError("unknown model kind");
}

inline void write_model_artifacts(const RunConfig& config, ModelKind kind, const Model& model,
                                  const NormalizationParams& params, const EvalReport& test) {
  const fs::path out_dir = config.get("out_dir");
  const std::string kind_tag = kind_name(kind);
  write_text_atomic(out_dir / ("model_" + kind_tag + ".txt"), serialize_model(model));
  {
    std::ostringstream buf;
    write_params_csv(buf, params, config.get_delim());
    write_text_atomic(out_dir / ("params_" + kind_tag + ".csv"), buf.str());
  }
  write_metrics(config, kind, "coarse", config.get("level_name"), test);
}

// --- train -------------------------------------------------------------------

inline void stage_train(const RunConfig& config) {
  const ModelKind kind = parse_config_value([&] { return parse_kind(config.get("kind")); });
  PreparedData prep = prepare_training(config);
  const Model model = fit_model(prep.data.train.x, prep.data.train.y,
                                train_config_from(config, kind));
  const EvalReport train_report = evaluate(model, prep.data.train, prep.params);
  const EvalReport test_report = evaluate(model, prep.data.test, prep.params);
  write_model_artifacts(config, kind, model, prep.params, test_report);

  nlohmann::ordered_json detail;
  detail["train_mse_z"] = train_report.mse_z;
  detail["test_mse_z"] = test_report.mse_z;
  detail["test_rmse_trips"] = test_report.rmse_trips;
  detail["train_rows"] = prep.data.train.rows();
  detail["test_rows"] = prep.data.test.rows();
  write_manifest(config, "train_" + std::string(kind_name(kind)),
                 {{"features", config.get("features")}, {"flows", config.get("flows")}},
                 std::move(detail));
}

// --- tune --------------------------------------------------------------------

inline void stage_tune(const RunConfig& config) {
  const ModelKind kind = parse_config_value([&] { return parse_kind(config.get("kind")); });
  PreparedData prep = prepare_training(config);
  const HyperGrid grid = HyperGrid::defaults(kind, config.get_seeds());
  TuneOptions options;
  options.threads = static_cast<unsigned>(config.get_int("threads"));
  const TuneResult result = grid_search(grid, prep.data, prep.params, options);

  const fs::path out_dir = config.get("out_dir");
  {
    std::ostringstream buf;
    write_leaderboard_csv(buf, result, config.get_delim());
    write_text_atomic(out_dir / ("leaderboard_" + std::string(kind_name(kind)) + ".csv"),
                      buf.str());
  }
  write_model_artifacts(config, kind, result.best_model, prep.params,
                        result.rows[result.selected].test);

  nlohmann::ordered_json detail;
  detail["evaluated_configs"] = result.rows.size();
  detail["selected"] = describe_config(result.rows[result.selected].config);
  detail["test_mse_z"] = result.rows[result.selected].test.mse_z;
  detail["test_rmse_trips"] = result.rows[result.selected].test.rmse_trips;
  write_manifest(config, "tune_" + std::string(kind_name(kind)),
                 {{"features", config.get("features")}, {"flows", config.get("flows")}},
                 std::move(detail));
}

// --- downscale ---------------------------------------------------------------

inline void stage_downscale(const RunConfig& config) {
  const fs::path model_path = config.require_path("model");
  const fs::path params_path = config.require_path("params");
  const fs::path fine_features_path = config.require_path("fine_features");
  const bool refit = config.get("normalization") == "refit";
  if (!refit && config.get("normalization") != "reuse")
    throw ConfigError("normalization must be refit or reuse");
  const bool population = config.get("std_dev") == "population";
  if (!population && config.get("std_dev") != "sample")
    throw ConfigError("std_dev must be population or sample");
  const std::string statistic = config.get("error_statistic");
  if (statistic != "mean" && statistic != "sum")
    throw ConfigError("error_statistic must be mean or sum");

  const Model model = load_model_file(model_path.string());
  const ModelKind kind = kind_of(model);
  NormalizationParams coarse_params;
  {
    std::ifstream in(params_path);
    coarse_params = read_params_csv(in, config.get_delim());
  }
  FeatureTable fine_features;
  {
    std::ifstream in(fine_features_path);
    fine_features = mean_impute(read_features_csv(in, config.get_delim()));
  }

  NormalizationParams fine_params =
      refit ? fit_feature_params(fine_features, population) : coarse_params;

  const bool has_truth = !config.get("fine_flows").empty();
  ODFlowTable fine_flows;
  fine_flows.level_name = config.get("fine_level_name");
  if (has_truth) {
    const fs::path flows_path = config.require_path("fine_flows");
    std::ifstream in(flows_path);
    fine_flows = read_flows_csv(in, config.get("fine_level_name"), config.get_delim());
  }
  // Without observed flows the prediction universe is every ordered pair.
  const bool zero_pairs = has_truth ? config.get_bool("include_zero_pairs") : true;
  ODDesignMatrix matrix = assemble(fine_flows, fine_features, zero_pairs);
  standardize_features_inplace(matrix, fine_params);
  if (has_truth && refit)
    fine_params.target = zscore_fit(matrix.y, population, "__target__");

  const DownscaleRun run = downscale_predict(model, matrix, fine_params, has_truth);

  const fs::path out_dir = config.get("out_dir");
  const std::string kind_tag = kind_name(kind);
  {
    std::ostringstream buf;
    write_predictions_csv(buf, run, config.get_delim());
    write_text_atomic(out_dir / ("predictions_" + kind_tag + ".csv"), buf.str());
  }

  nlohmann::ordered_json detail;
  detail["rows"] = run.rows();
  detail["normalization"] = refit ? "refit" : "reuse";
  if (has_truth) {
    write_metrics(config, kind, "fine", config.get("fine_level_name"), *run.eval);
    detail["mse_z"] = run.eval->mse_z;
    detail["rmse_trips"] = run.eval->rmse_trips;
    const auto origin_records = unit_errors(run, UnitRole::origin);
    const auto dest_records = unit_errors(run, UnitRole::destination);
    if (!config.get("fine_zoning").empty()) {
      const fs::path zoning_path = config.require_path("fine_zoning");
      const Zoning fine_zoning = load_zoning_geojson_file(
          zoning_path.string(), config.get("id_property"), config.get("fine_level_name"));
      const ErrorStatistic mode =
          statistic == "sum" ? ErrorStatistic::sum : ErrorStatistic::mean;
      write_text_atomic(
          out_dir / ("error_map_" + kind_tag + ".geojson"),
          error_map_geojson(fine_zoning, origin_records, dest_records, mode).dump(2) + "\n");
    }
  }
  write_manifest(config, "downscale_" + kind_tag,
                 {{"model", model_path.string()},
                  {"params", params_path.string()},
                  {"fine_features", fine_features_path.string()}},
                 std::move(detail));
}

// --- sensitivity --------------------------------------------------------------

inline void stage_sensitivity(const RunConfig& config) {
  const fs::path model_path = config.require_path("model");
  const fs::path params_path = config.require_path("params");
  const fs::path features_path = config.require_path("features");
  const fs::path flows_path = config.require_path("flows");

  const Model model = load_model_file(model_path.string());
  const ModelKind kind = kind_of(model);
  NormalizationParams params;
  {
    std::ifstream in(params_path);
    params = read_params_csv(in, config.get_delim());
  }
  FeatureTable features;
  {
    std::ifstream in(features_path);
    features = mean_impute(read_features_csv(in, config.get_delim()));
  }
  ODFlowTable flows;
  {
    std::ifstream in(flows_path);
    flows = read_flows_csv(in, config.get("level_name"), config.get_delim());
  }
  ODDesignMatrix matrix = assemble(flows, features, config.get_bool("include_zero_pairs"));
  standardize_features_inplace(matrix, params);

  const std::string rows_mode = config.get("sensitivity_rows");
  Eigen::MatrixXd rows;
  if (rows_mode == "test") {
    SplitDataset data = split(matrix, config.get_double("split_ratio"),
                              static_cast<std::uint64_t>(config.get_int("split_seed")));
    rows = data.test.x;
  } else if (rows_mode == "all") {
    rows = matrix.x;
  } else {
    throw ConfigError("sensitivity_rows must be test or all");
  }

  SensitivityOptions options;
  options.delta = config.get_double("delta");
  if (options.delta <= 0.0) options.delta = default_delta(kind);
  const std::string difference = config.get("difference");
  if (difference != "central" && difference != "one_sided")
    throw ConfigError("difference must be central or one_sided");
  options.central = difference == "central";

  const SensitivityReport report = pseudo_coefficients(model, rows, options);
  const fs::path out_dir = config.get("out_dir");
  {
    std::ostringstream buf;
    write_sensitivity_csv(buf, report, kind, config.get_delim());
    write_text_atomic(out_dir / ("sensitivity_" + std::string(kind_name(kind)) + ".csv"),
                      buf.str());
  }
  nlohmann::ordered_json detail;
  detail["rows"] = report.rows;
  detail["delta"] = report.delta;
  detail["difference"] = difference;
  write_manifest(config, "sensitivity_" + std::string(kind_name(kind)),
                 {{"model", model_path.string()}, {"flows", flows_path.string()}},
                 std::move(detail));
}

// --- report --------------------------------------------------------------------

// Per-model table of coarse test error and fine downscale error, rows in the
// fixed LR, RF, SVM, FNN order.
inline std::string stage_report(const RunConfig& config) {
  const fs::path out_dir = config.get("out_dir");
  struct Row {
    std::string name;
    std::optional<EvalReport> coarse;
    std::optional<EvalReport> fine;
  };
  std::vector<Row> rows;
  std::string coarse_level = "coarse";
  std::string fine_level = "fine";
  bool any = false;
  for (ModelKind kind :
       {ModelKind::linear, ModelKind::forest, ModelKind::svr, ModelKind::fnn}) {
    Row row;
    row.name = kind_display_name(kind);
    for (const char* scope : {"coarse", "fine"}) {
      const fs::path path =
          out_dir / ("metrics_" + std::string(kind_name(kind)) + "_" + scope + ".json");
      if (!fs::exists(path)) continue;
      std::ifstream in(path);
      nlohmann::json doc;
      in >> doc;
      EvalReport report;
      report.mse_z = doc.at("mse_z").get<double>();
      report.rmse_trips = doc.at("rmse_trips").get<double>();
      report.n = doc.value("n", 0u);
      if (std::string(scope) == "coarse") {
        row.coarse = report;
        coarse_level = doc.value("level_name", coarse_level);
      } else {
        row.fine = report;
        fine_level = doc.value("level_name", fine_level);
      }
      any = true;
    }
    if (row.coarse || row.fine) rows.push_back(std::move(row));
  }
  if (!any)
    throw std::runtime_error("report: no metrics_*.json artifacts in '" + out_dir.string() +
                             "' (run train/tune/downscale first)");

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %14s %14s %14s %14s\n", "Method",
                (coarse_level + " mse_z").c_str(), "rmse (trips)",
                (fine_level + " mse_z").c_str(), "rmse (trips)");
  out << line;
  out << std::string(88, '-') << "\n";
  auto cell = [](const std::optional<EvalReport>& r, bool rmse) {
    if (!r) return std::string("-");
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", rmse ? r->rmse_trips : r->mse_z);
    return std::string(buf);
  };
  for (const Row& row : rows) {
    std::snprintf(line, sizeof(line), "%-28s %14s %14s %14s %14s\n", row.name.c_str(),
                  cell(row.coarse, false).c_str(), cell(row.coarse, true).c_str(),
                  cell(row.fine, false).c_str(), cell(row.fine, true).c_str());
    out << line;
  }
  write_text_atomic(out_dir / "report.txt", out.str());
  write_manifest(config, "report", {});
  return out.str();
}

}  // namespace odflow::stages
