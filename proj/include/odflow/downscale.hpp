#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "odflow/design.hpp"
#include "odflow/geojson.hpp"
#include "odflow/metrics.hpp"
#include "odflow/model.hpp"

namespace odflow {

// A coarse-trained model applied to fine-zoning OD pairs. Predictions are
// kept both in standardized units and in trips (inverted with the fine-level
// target parameters).
struct DownscaleRun {
  std::vector<std::string> origin_ids;
  std::vector<std::string> dest_ids;
  Eigen::VectorXd pred_std;
  Eigen::VectorXd pred_trips;
  bool has_actual = false;
  Eigen::VectorXd actual_trips;
  std::optional<EvalReport> eval;
  MuSigma target_params;

  std::size_t rows() const { return origin_ids.size(); }
};

// fine_matrix must carry standardized features; y holds raw observed trip
// counts when has_truth is set (used for the EvalReport and error maps).
inline DownscaleRun downscale_predict(const Model& model, const ODDesignMatrix& fine_matrix,
                                      const NormalizationParams& fine_params, bool has_truth) {
  if (!fine_matrix.x_standardized)
    throw std::runtime_error("downscale_predict expects standardized fine features");
  if (fine_matrix.y_standardized)
    throw std::runtime_error("downscale_predict expects raw trip counts as targets");
  if (fine_matrix.x.cols() != input_width(model))
    throw std::runtime_error("downscale_predict: feature width mismatch (model expects " +
                             std::to_string(input_width(model)) + ", matrix has " +
                             std::to_string(fine_matrix.x.cols()) + ")");
  DownscaleRun run;
  run.origin_ids = fine_matrix.origin_ids;
  run.dest_ids = fine_matrix.dest_ids;
  run.target_params = fine_params.target;
  run.pred_std = predict_batch(model, fine_matrix.x);
  run.pred_trips = zscore_invert(run.pred_std, fine_params.target);
  if (has_truth) {
    run.has_actual = true;
    run.actual_trips = fine_matrix.y;
    const Eigen::VectorXd actual_std = zscore_apply(fine_matrix.y, fine_params.target);
    run.eval = make_eval_report(run.pred_std, actual_std, fine_params.target.sigma);
  }
  return run;
}

enum class UnitRole { origin, destination };

inline const char* role_name(UnitRole role) {
  return role == UnitRole::origin ? "origin" : "destination";
}

enum class ErrorStatistic { mean, sum };

// Signed error aggregate in trips; positive means the model underestimates.
struct UnitErrorRecord {
  std::string unit_id;
  UnitRole role = UnitRole::origin;
  double error_sum = 0.0;  // sum over contributing pairs of (actual - predicted)
  std::size_t pair_count = 0;

  double error_mean() const { return error_sum / static_cast<double>(pair_count); }
  double statistic(ErrorStatistic mode) const {
    return mode == ErrorStatistic::mean ? error_mean() : error_sum;
  }
};

inline std::vector<UnitErrorRecord> unit_errors(const DownscaleRun& run, UnitRole role) {
  if (!run.has_actual)
    throw std::runtime_error("unit_errors requires observed fine-level flows");
  std::map<std::string, UnitErrorRecord> by_unit;
  const auto& ids = role == UnitRole::origin ? run.origin_ids : run.dest_ids;
  for (std::size_t i = 0; i < run.rows(); ++i) {
    UnitErrorRecord& record = by_unit[ids[i]];
    if (record.pair_count == 0) {
      record.unit_id = ids[i];
      record.role = role;
    }
    record.error_sum += run.actual_trips(static_cast<Eigen::Index>(i)) -
                        run.pred_trips(static_cast<Eigen::Index>(i));
    ++record.pair_count;
  }
  std::vector<UnitErrorRecord> records;
  records.reserve(by_unit.size());
  for (auto& [id, record] : by_unit) records.push_back(std::move(record));
  return records;
}

inline void write_predictions_csv(std::ostream& out, const DownscaleRun& run, char delim = ',') {
  out << "origin_id" << delim << "destination_id" << delim << "predicted_trips";
  if (run.has_actual) out << delim << "actual_trips" << delim << "error_trips";
  out << "\n";
  for (std::size_t i = 0; i < run.rows(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << run.origin_ids[i] << delim << run.dest_ids[i] << delim
        << format_double(run.pred_trips(idx));
    if (run.has_actual)
      out << delim << format_double(run.actual_trips(idx)) << delim
          << format_double(run.actual_trips(idx) - run.pred_trips(idx));
    out << "\n";
  }
}

// GeoJSON error map: the fine zoning's polygons re-emitted with the signed
// per-unit statistic, ready for any external map viewer.
inline nlohmann::ordered_json error_map_geojson(const Zoning& fine,
                                                const std::vector<UnitErrorRecord>& origin_records,
                                                const std::vector<UnitErrorRecord>& dest_records,
                                                ErrorStatistic mode = ErrorStatistic::mean) {
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = nlohmann::ordered_json::array();
  auto emit = [&](const std::vector<UnitErrorRecord>& records) {
    for (const UnitErrorRecord& record : records) {
      auto unit_index = fine.find(record.unit_id);
      if (!unit_index)
        throw std::runtime_error("error map: unit '" + record.unit_id +
                                 "' missing from fine zoning");
      nlohmann::ordered_json feature;
      feature["type"] = "Feature";
      feature["properties"]["unit_id"] = record.unit_id;
      feature["properties"]["role"] = role_name(record.role);
      feature["properties"]["error_trips"] = record.statistic(mode);
      feature["properties"]["pair_count"] = record.pair_count;
      feature["geometry"] = geojson_detail::geometry_json(fine.unit(*unit_index));
      doc["features"].push_back(std::move(feature));
    }
  };
  emit(origin_records);
  emit(dest_records);
  return doc;
}

}  // namespace odflow
