// odflow: aggregate point trips into OD flows, learn flow volume from
// demographic features, transfer the model to a finer zoning and interpret it
// via perturbation pseudo-coefficients.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "odflow/config.hpp"
#include "odflow/pipeline.hpp"
#include "odflow/version.hpp"

namespace {

struct StageSpec {
  const char* name;
  const char* help;
  std::vector<std::string> keys;  // options surfaced in --help for this stage
};

const std::vector<std::string> kCommonKeys = {"out_dir", "delimiter"};

const std::vector<StageSpec> kStages = {
    {"synth",
     "generate a deterministic synthetic world (zonings, features, trips, flows)",
     {"synth_nx", "synth_ny", "synth_sub", "synth_seed", "synth_rule", "synth_noise",
      "synth_scale", "synth_nonresidential", "id_property"}},
    {"ingest",
     "aggregate a trip file into an OD flow table over a zoning",
     {"zoning", "trips", "id_property", "level_name", "pickup_x", "pickup_y", "dropoff_x",
      "dropoff_y"}},
    {"train",
     "fit one model with explicit hyperparameters and evaluate it",
     {"flows", "features", "kind", "include_zero_pairs", "std_dev", "split_ratio", "split_seed",
      "level_name", "trees", "max_features", "model_seed", "min_samples_split", "cost", "epsilon",
      "gamma", "svr_tol", "max_pair_updates", "width", "depth", "epochs", "batch", "beta1",
      "beta2", "lr_peak", "lr_floor", "lr_cycles", "allow_nonstandard"}},
    {"tune",
     "exhaustive grid search over the declared hyperparameter grids",
     {"flows", "features", "kind", "include_zero_pairs", "std_dev", "split_ratio", "split_seed",
      "level_name", "seeds", "threads", "svr_tol", "max_pair_updates"}},
    {"downscale",
     "apply a trained model to a finer zoning and emit predictions and error maps",
     {"model", "params", "fine_features", "fine_flows", "fine_zoning", "fine_level_name",
      "normalization", "std_dev", "include_zero_pairs", "error_statistic", "id_property"}},
    {"sensitivity",
     "perturbation pseudo-coefficients for a trained model",
     {"model", "params", "flows", "features", "include_zero_pairs", "split_ratio", "split_seed",
      "level_name", "delta", "difference", "sensitivity_rows"}},
    {"report",
     "render the per-model error table from emitted metrics artifacts",
     {}},
};

int run_stage(const std::string& stage, const odflow::RunConfig& config) {
  using namespace odflow::stages;
  if (stage == "synth") stage_synth(config);
  else if (stage == "ingest") stage_ingest(config);
  else if (stage == "train") stage_train(config);
  else if (stage == "tune") stage_tune(config);
  else if (stage == "downscale") stage_downscale(config);
  else if (stage == "sensitivity") stage_sensitivity(config);
  else if (stage == "report") std::cout << stage_report(config);
  else throw odflow::ConfigError("unknown stage '" + stage + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"origin-destination flow modeling and downscaling toolkit"};
  app.set_version_flag("--version", odflow::kVersion);
  app.require_subcommand(1);

  std::map<std::string, std::map<std::string, std::string>> flag_values;
  std::map<std::string, std::string> config_files;
  std::string selected;

  for (const StageSpec& stage : kStages) {
    CLI::App* sub = app.add_subcommand(stage.name, stage.help);
    sub->add_option("--config", config_files[stage.name], "key=value configuration file");
    std::vector<std::string> keys = kCommonKeys;
    keys.insert(keys.end(), stage.keys.begin(), stage.keys.end());
    for (const std::string& key : keys) {
      const odflow::KeySpec* spec = odflow::RunConfig::find_key(key);
      sub->add_option("--" + key, flag_values[stage.name][key], spec ? spec->help : "");
    }
    sub->callback([&selected, name = std::string(stage.name)]() { selected = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  }

  try {
    odflow::RunConfig config;
    if (!config_files[selected].empty()) config.merge_file(config_files[selected]);
    for (const auto& [key, value] : flag_values[selected])
      if (!value.empty()) config.set(key, value);  // flag beats file beats default
    return run_stage(selected, config);
  } catch (const odflow::ConfigError& e) {
    std::fprintf(stderr, "odflow %s: %s\n", selected.c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "odflow %s: %s\n", selected.c_str(), e.what());
    return 1;
  }
}
