#pragma once

#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "odflow/fnn.hpp"
#include "odflow/forest.hpp"
#include "odflow/linear.hpp"
#include "odflow/svr.hpp"

namespace odflow {

enum class ModelKind { linear, forest, svr, fnn };

inline const char* kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "linear";
    case ModelKind::forest: return "forest";
    case ModelKind::svr: return "svr";
    case ModelKind::fnn: return "fnn";
  }
  return "unknown";
}

inline const char* kind_display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::linear: return "Linear Regression";
    case ModelKind::forest: return "Random Forest";
    case ModelKind::svr: return "Support Vector Machine";
    case ModelKind::fnn: return "Feedforward Neural Network";
  }
  return "unknown";
}

inline ModelKind parse_kind(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "forest") return ModelKind::forest;
  if (s == "svr") return ModelKind::svr;
  if (s == "fnn") return ModelKind::fnn;
  throw std::runtime_error("unknown model kind '" + s + "'");
}

// All four prediction functions behind one opaque contract, so tuning,
// downscaling and sensitivity treat the model uniformly.
using Model = std::variant<LinearModel, ForestModel, SvrModel, FnnModel>;

struct LinearConfig {
  bool allow_nonstandard = false;  // no hyperparameters; kept for symmetry
};

using TrainConfig = std::variant<LinearConfig, ForestConfig, SvrConfig, FnnConfig>;

inline ModelKind kind_of(const Model& model) {
  return static_cast<ModelKind>(model.index());
}

inline ModelKind kind_of(const TrainConfig& config) {
  return static_cast<ModelKind>(config.index());
}

inline Model fit_model(const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, const TrainConfig& config) {
  return std::visit(
      [&](const auto& c) -> Model {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, LinearConfig>) return fit_linear(x, y);
        else if constexpr (std::is_same_v<C, ForestConfig>) return fit_forest(x, y, c);
        else if constexpr (std::is_same_v<C, SvrConfig>) return fit_svr(x, y, c);
        else return fit_fnn(x, y, c);
      },
      config);
}

inline double predict(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearModel>) return predict_linear(m, x);
        else if constexpr (std::is_same_v<M, ForestModel>) return predict_forest(m, x);
        else if constexpr (std::is_same_v<M, SvrModel>) return predict_svr(m, x);
        else return predict_fnn(m, x);
      },
      model);
}

inline Eigen::VectorXd predict_batch(const Model& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearModel>) return predict_linear_batch(m, x);
        else if constexpr (std::is_same_v<M, ForestModel>) return predict_forest_batch(m, x);
        else if constexpr (std::is_same_v<M, SvrModel>) return predict_svr_batch(m, x);
        else return predict_fnn_batch(m, x);
      },
      model);
}

inline Eigen::Index input_width(const Model& model) {
  return std::visit(
      [](const auto& m) -> Eigen::Index {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, LinearModel>) return m.coef.size();
        else if constexpr (std::is_same_v<M, ForestModel>) return m.n_features;
        else if constexpr (std::is_same_v<M, SvrModel>) return m.support.cols();
        else return m.weights.front().cols();
      },
      model);
}

}  // namespace odflow
