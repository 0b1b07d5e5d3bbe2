#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "odflow/text.hpp"

namespace odflow {

// Usage / configuration problems map to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  const char* name;
  const char* def;
  const char* help;
};

// Flat key=value configuration. Every key has a CLI-flag twin; precedence is
// flag > file > built-in default. Unknown keys are rejected.
class RunConfig {
 public:
  static const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = {
        {"out_dir", "out", "directory for stage artifacts"},
        {"trips", "", "delimited trip records (ingest)"},
        {"zoning", "", "zoning GeoJSON (ingest)"},
        {"fine_zoning", "", "fine zoning GeoJSON (downscale error map)"},
        {"features", "", "feature table CSV (train/tune/sensitivity)"},
        {"fine_features", "", "fine feature table CSV (downscale)"},
        {"flows", "", "OD flow CSV (train/tune/sensitivity)"},
        {"fine_flows", "", "observed fine OD flow CSV (downscale evaluation)"},
        {"model", "", "serialized model file (downscale/sensitivity)"},
        {"params", "", "normalization sidecar CSV (downscale/sensitivity)"},
        {"id_property", "id", "GeoJSON property carrying the unit id"},
        {"level_name", "zone", "name of the coarse zoning level"},
        {"fine_level_name", "tract", "name of the fine zoning level"},
        {"delimiter", ",", "field delimiter for delimited text"},
        {"pickup_x", "pickup_x", "trip column: pickup x"},
        {"pickup_y", "pickup_y", "trip column: pickup y"},
        {"dropoff_x", "dropoff_x", "trip column: dropoff x"},
        {"dropoff_y", "dropoff_y", "trip column: dropoff y"},
        {"include_zero_pairs", "false", "emit a row for every ordered unit pair"},
        {"normalization", "refit", "fine-level normalization mode: refit|reuse"},
        {"std_dev", "population", "standard deviation convention: population|sample"},
        {"split_ratio", "0.8", "training fraction"},
        {"split_seed", "0", "train/test split seed"},
        {"kind", "linear", "model kind: linear|forest|svr|fnn"},
        {"trees", "10", "forest: number of trees"},
        {"max_features", "log2", "forest: per-split feature rule sqrt|log2"},
        {"model_seed", "0", "forest/fnn: training seed"},
        {"min_samples_split", "2", "forest: minimum node size eligible to split"},
        {"cost", "1", "svr: box constraint C"},
        {"epsilon", "0.1", "svr: tube half-width e"},
        {"gamma", "0", "svr: RBF width (0 = automatic)"},
        {"svr_tol", "0.001", "svr: KKT violation tolerance"},
        {"max_pair_updates", "1000000", "svr: pair update cap"},
        {"width", "150", "fnn: hidden layer width"},
        {"depth", "2", "fnn: hidden layer count"},
        {"epochs", "2000", "fnn: training epochs"},
        {"batch", "5000", "fnn: batch size"},
        {"beta1", "0.9", "fnn: Adam beta1"},
        {"beta2", "0.95", "fnn: Adam beta2"},
        {"lr_peak", "0.01", "fnn: triangular schedule peak"},
        {"lr_floor", "0.000001", "fnn: triangular schedule floor"},
        {"lr_cycles", "1", "fnn: triangular cycles over the run"},
        {"allow_nonstandard", "false", "permit hyperparameters outside the declared grids"},
        {"seeds", "0,1,2,3,4", "grid search: seed axis"},
        {"threads", "0", "grid search worker threads (0 = hardware)"},
        {"delta", "0", "sensitivity perturbation (0 = per-kind default)"},
        {"difference", "central", "sensitivity mode: central|one_sided"},
        {"sensitivity_rows", "test", "sensitivity evaluation rows: test|all"},
        {"error_statistic", "mean", "per-unit error aggregate: mean|sum"},
        {"synth_nx", "4", "synth: coarse grid columns"},
        {"synth_ny", "4", "synth: coarse grid rows"},
        {"synth_sub", "2", "synth: fine cells per coarse side"},
        {"synth_seed", "0", "synth: world seed"},
        {"synth_rule", "affine", "synth: flow rule affine|gravity|noisy_gravity"},
        {"synth_noise", "0", "synth: relative noise level"},
        {"synth_scale", "1", "synth: trips-per-pair scale"},
        {"synth_nonresidential", "0", "synth: leading fine units flagged non-residential"},
    };
    return keys;
  }

  static const KeySpec* find_key(const std::string& name) {
    for (const KeySpec& key : registry())
      if (name == key.name) return &key;
    return nullptr;
  }

  void set(const std::string& key, const std::string& value) {
    if (!find_key(key)) throw ConfigError("unknown configuration key '" + key + "'");
    values_[key] = value;
  }

  bool is_set(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it != values_.end()) return it->second;
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("unknown configuration key '" + key + "'");
    return spec->def;
  }

  long long get_int(const std::string& key) const {
    auto v = parse_int(get(key));
    if (!v) throw ConfigError("key '" + key + "' must be an integer, got '" + get(key) + "'");
    return *v;
  }

  double get_double(const std::string& key) const {
    auto v = parse_double(get(key));
    if (!v) throw ConfigError("key '" + key + "' must be a number, got '" + get(key) + "'");
    return *v;
  }

  bool get_bool(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "' must be a boolean, got '" + v + "'");
  }

  char get_delim() const {
    const std::string v = get("delimiter");
    if (v.size() != 1) throw ConfigError("delimiter must be a single character");
    return v[0];
  }

  std::vector<std::uint64_t> get_seeds() const {
    std::vector<std::uint64_t> seeds;
    for (auto part : split(get("seeds"), ',')) {
      auto v = parse_int(part);
      if (!v || *v < 0) throw ConfigError("seeds must be a comma list of non-negative integers");
      seeds.push_back(static_cast<std::uint64_t>(*v));
    }
    if (seeds.empty()) throw ConfigError("seeds list is empty");
    return seeds;
  }

  // A stage prerequisite: the key must be set and the file must exist.
  std::filesystem::path require_path(const std::string& key) const {
    const std::string v = get(key);
    if (v.empty())
      throw ConfigError("missing required input '" + key + "' (set --" + key + ")");
    if (!std::filesystem::exists(v))
      throw ConfigError("input file for '" + key + "' not found: " + v);
    return v;
  }

  const std::map<std::string, std::string>& explicit_values() const { return values_; }

  // key=value file; '#' comments and blank lines ignored; unknown keys fail.
  void merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view row = trim(line);
      if (row.empty() || row.front() == '#') continue;
      auto eq = row.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config file line " + std::to_string(line_no) +
                          ": expected key=value");
      std::string key(trim(row.substr(0, eq)));
      std::string value(trim(row.substr(eq + 1)));
      set(key, value);
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace odflow
