#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <Eigen/Core>

#include "odflow/design.hpp"
#include "odflow/model.hpp"

namespace odflow {

// Error pair reported everywhere: mean squared error in standardized target
// units, and its trip-unit companion rmse = sigma_Y * sqrt(mse).
struct EvalReport {
  double mse_z = 0.0;
  double rmse_trips = 0.0;
  std::size_t n = 0;
  int output_dim = 1;
};

inline EvalReport make_eval_report(const Eigen::Ref<const Eigen::VectorXd>& predictions_std,
                                   const Eigen::Ref<const Eigen::VectorXd>& targets_std,
                                   double sigma_y) {
  if (predictions_std.size() == 0) throw std::runtime_error("evaluate: no rows");
  if (predictions_std.size() != targets_std.size())
    throw std::runtime_error("evaluate: prediction/target size mismatch");
  EvalReport report;
  report.n = static_cast<std::size_t>(predictions_std.size());
  report.mse_z = (predictions_std - targets_std).squaredNorm() /
                 static_cast<double>(predictions_std.size());
  report.rmse_trips = sigma_y * std::sqrt(report.mse_z);
  return report;
}

inline EvalReport evaluate(const Model& model, const ODDesignMatrix& rows,
                           const NormalizationParams& params) {
  if (rows.rows() == 0) throw std::runtime_error("evaluate: no rows");
  if (!rows.x_standardized || !rows.y_standardized)
    throw std::runtime_error("evaluate expects standardized rows");
  return make_eval_report(predict_batch(model, rows.x), rows.y, params.target.sigma);
}

}  // namespace odflow
