#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "odflow/metrics.hpp"
#include "odflow/model.hpp"
#include "odflow/text.hpp"

namespace odflow {

// Exhaustive grid over the declared hyperparameter axes. Linear regression
// has no axes (a one-point grid keeps the harness uniform).
struct HyperGrid {
  ModelKind kind = ModelKind::linear;
  std::vector<TrainConfig> points;

  static HyperGrid defaults(ModelKind kind,
                            const std::vector<std::uint64_t>& seeds = {0, 1, 2, 3, 4}) {
    HyperGrid grid;
    grid.kind = kind;
    switch (kind) {
      case ModelKind::linear: {
        grid.points.push_back(LinearConfig{});
        break;
      }
      case ModelKind::forest: {
        for (int trees : {10, 50, 100, 500, 1000})
          for (MaxFeatures m : {MaxFeatures::sqrt_rule, MaxFeatures::log2_rule})
            for (std::uint64_t seed : seeds) {
              ForestConfig c;
              c.trees = trees;
              c.max_features = m;
              c.seed = seed;
              grid.points.push_back(c);
            }
        break;
      }
      case ModelKind::svr: {
        for (double cost : {0.1, 1.0, 10.0})
          for (double epsilon : {0.01, 0.1, 1.0}) {
            SvrConfig c;
            c.cost = cost;
            c.epsilon = epsilon;
            grid.points.push_back(c);
          }
        break;
      }
      case ModelKind::fnn: {
        for (int width : {50, 100, 150})
          for (int depth : {2, 4})
            for (std::uint64_t seed : seeds) {
              FnnConfig c;
              c.width = width;
              c.depth = depth;
              c.seed = seed;
              grid.points.push_back(c);
            }
        break;
      }
    }
    if (grid.points.empty()) throw std::runtime_error("empty hyperparameter grid");
    return grid;
  }
};

inline std::string describe_config(const TrainConfig& config) {
  return std::visit(
      [](const auto& c) -> std::string {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, LinearConfig>) {
          return "linear";
        } else if constexpr (std::is_same_v<C, ForestConfig>) {
          return "trees=" + std::to_string(c.trees) +
                 ";max_features=" + max_features_name(c.max_features) +
                 ";seed=" + std::to_string(c.seed);
        } else if constexpr (std::is_same_v<C, SvrConfig>) {
          return "cost=" + format_double(c.cost) + ";epsilon=" + format_double(c.epsilon);
        } else {
          return "width=" + std::to_string(c.width) + ";depth=" + std::to_string(c.depth) +
                 ";seed=" + std::to_string(c.seed);
        }
      },
      config);
}

namespace tuning_detail {

// Parsimony key for equal test error: smaller model first (fewer trees /
// smaller C / smaller width, then depth), then lower seed. On equal tree
// count log2 precedes sqrt (smaller per-split subset); on equal C the larger
// epsilon wins (fewer support vectors).
inline std::tuple<double, double, double> size_key(const TrainConfig& config) {
  return std::visit(
      [](const auto& c) -> std::tuple<double, double, double> {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, LinearConfig>) {
          return {0.0, 0.0, 0.0};
        } else if constexpr (std::is_same_v<C, ForestConfig>) {
          return {static_cast<double>(c.trees),
                  c.max_features == MaxFeatures::log2_rule ? 0.0 : 1.0,
                  static_cast<double>(c.seed)};
        } else if constexpr (std::is_same_v<C, SvrConfig>) {
          return {c.cost, -c.epsilon, 0.0};
        } else {
          return {static_cast<double>(c.width), static_cast<double>(c.depth),
                  static_cast<double>(c.seed)};
        }
      },
      config);
}

}  // namespace tuning_detail

struct ConfigResult {
  TrainConfig config;
  bool ok = false;
  std::string error;
  EvalReport train;
  EvalReport test;
};

struct TuneResult {
  ModelKind kind = ModelKind::linear;
  std::vector<ConfigResult> rows;  // grid enumeration order
  std::size_t selected = 0;
  Model best_model;
  std::vector<std::string> log;
};

struct TuneOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Trains one model per grid point on the training rows, evaluates on the
// held-out rows and keeps the configuration with the minimum test error.
// Failed fits are recorded and excluded; grid points are independent jobs and
// the selection is a total order, so worker count never changes the result.
inline TuneResult grid_search(const HyperGrid& grid, const SplitDataset& data,
                              const NormalizationParams& params, const TuneOptions& options = {}) {
  if (grid.points.empty()) throw std::runtime_error("grid_search: empty grid");
  if (data.train.rows() == 0 || data.test.rows() == 0)
    throw std::runtime_error("grid_search needs non-empty train and test rows");

  TuneResult result;
  result.kind = grid.kind;
  result.rows.resize(grid.points.size());

  struct Best {
    bool set = false;
    double mse = 0.0;
    std::tuple<double, double, double> size{};
    std::size_t index = 0;
    Model model;
  } best;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.points.size()) return;
      ConfigResult row;
      row.config = grid.points[i];
      std::optional<Model> model;
      try {
        model = fit_model(data.train.x, data.train.y, row.config);
        row.train = evaluate(*model, data.train, params);
        row.test = evaluate(*model, data.test, params);
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      std::lock_guard<std::mutex> lock(mutex);
      if (row.ok) {
        const auto size = tuning_detail::size_key(row.config);
        const bool better =
            !best.set || row.test.mse_z < best.mse ||
            (row.test.mse_z == best.mse &&
             std::tuple{size, i} < std::tuple{best.size, best.index});
        if (better) {
          best.set = true;
          best.mse = row.test.mse_z;
          best.size = size;
          best.index = i;
          best.model = std::move(*model);
        }
      }
      result.rows[i] = std::move(row);
    }
  };

  unsigned thread_count = options.threads != 0 ? options.threads
                                               : std::max(1u, std::thread::hardware_concurrency());
  thread_count = std::min<unsigned>(thread_count,
                                    static_cast<unsigned>(grid.points.size()));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (!best.set) {
    std::string detail;
    for (const ConfigResult& row : result.rows)
      if (!row.error.empty() && detail.empty()) detail = row.error;
    throw std::runtime_error("grid_search: every configuration failed (first error: " + detail +
                             ")");
  }
  result.selected = best.index;
  result.best_model = std::move(best.model);
  for (const ConfigResult& row : result.rows) {
    std::string line = describe_config(row.config);
    if (row.ok)
      line += " test_mse_z=" + format_double(row.test.mse_z);
    else
      line += " FAILED: " + row.error;
    result.log.push_back(std::move(line));
  }
  result.log.push_back("selected " + describe_config(result.rows[result.selected].config));
  return result;
}

// Leaderboard: one row per grid point with the metric pair, plus the
// selection marker.
inline void write_leaderboard_csv(std::ostream& out, const TuneResult& result, char delim = ',') {
  out << "config" << delim << "status" << delim << "train_mse_z" << delim << "test_mse_z" << delim
      << "test_rmse_trips" << delim << "selected\n";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const ConfigResult& row = result.rows[i];
    out << describe_config(row.config) << delim;
    if (row.ok) {
      out << "ok" << delim << format_double(row.train.mse_z) << delim
          << format_double(row.test.mse_z) << delim << format_double(row.test.rmse_trips);
    } else {
      std::string error = row.error;
      std::replace(error.begin(), error.end(), delim, ';');
      out << "failed: " << error << delim << delim << delim;
    }
    out << delim << (i == result.selected ? 1 : 0) << "\n";
  }
}

}  // namespace odflow
