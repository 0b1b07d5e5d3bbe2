#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odflow/features.hpp"
#include "odflow/flows.hpp"

namespace odflow {

// One row per OD pair: 60 features (origin's 30 then destination's 30) and
// the trip-count target. Built raw; standardization is a separate step.
struct ODDesignMatrix {
  std::vector<std::string> origin_ids;
  std::vector<std::string> dest_ids;
  Eigen::MatrixXd x;  // rows x 60
  Eigen::VectorXd y;
  bool x_standardized = false;
  bool y_standardized = false;

  std::size_t rows() const { return origin_ids.size(); }
};

inline ODDesignMatrix assemble(const ODFlowTable& flows, const FeatureTable& features,
                               bool include_zero_pairs = false) {
  constexpr Eigen::Index width = 2 * VariableCatalog::size;
  ODDesignMatrix matrix;
  std::vector<double> counts;
  auto push_row = [&](const std::string& origin, const std::string& destination, double count) {
    matrix.origin_ids.push_back(origin);
    matrix.dest_ids.push_back(destination);
    counts.push_back(count);
  };
  if (include_zero_pairs) {
    for (const std::string& origin : features.unit_ids)
      for (const std::string& destination : features.unit_ids)
        push_row(origin, destination,
                 static_cast<double>(flows.count(origin, destination)));
  } else {
    for (const auto& [pair, count] : flows.entries)
      push_row(pair.first, pair.second, static_cast<double>(count));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(matrix.rows());
  matrix.x.resize(n, width);
  matrix.y = Eigen::Map<const Eigen::VectorXd>(counts.data(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t o = features.row_of(matrix.origin_ids[static_cast<std::size_t>(i)]);
    std::size_t d = features.row_of(matrix.dest_ids[static_cast<std::size_t>(i)]);
    matrix.x.block(i, 0, 1, VariableCatalog::size) =
        features.values.row(static_cast<Eigen::Index>(o));
    matrix.x.block(i, VariableCatalog::size, 1, VariableCatalog::size) =
        features.values.row(static_cast<Eigen::Index>(d));
  }
  return matrix;
}

// Standardizes the 60 feature columns using the per-variable parameters; the
// origin and destination columns of a variable share its (mu, sigma).
inline void standardize_features_inplace(ODDesignMatrix& matrix,
                                         const NormalizationParams& params) {
  if (matrix.x_standardized) throw std::runtime_error("design matrix already standardized");
  for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
    const MuSigma& p = params.vars[j];
    if (p.sigma <= 0.0)
      throw std::runtime_error("non-positive sigma for variable '" +
                               std::string(VariableCatalog::name(j)) + "'");
    auto a = matrix.x.col(static_cast<Eigen::Index>(j));
    a = (a.array() - p.mu) / p.sigma;
    auto b = matrix.x.col(static_cast<Eigen::Index>(j + VariableCatalog::size));
    b = (b.array() - p.mu) / p.sigma;
  }
  matrix.x_standardized = true;
}

inline void standardize_target_inplace(ODDesignMatrix& matrix, const MuSigma& target) {
  if (matrix.y_standardized) throw std::runtime_error("target already standardized");
  matrix.y = zscore_apply(matrix.y, target);
  matrix.y_standardized = true;
}

struct SplitDataset {
  ODDesignMatrix train;
  ODDesignMatrix test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
};

namespace design_detail {

inline ODDesignMatrix take_rows(const ODDesignMatrix& matrix, const std::vector<std::size_t>& idx) {
  ODDesignMatrix out;
  out.x_standardized = matrix.x_standardized;
  out.y_standardized = matrix.y_standardized;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), matrix.x.cols());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.origin_ids.push_back(matrix.origin_ids[idx[i]]);
    out.dest_ids.push_back(matrix.dest_ids[idx[i]]);
    out.x.row(static_cast<Eigen::Index>(i)) = matrix.x.row(static_cast<Eigen::Index>(idx[i]));
    out.y(static_cast<Eigen::Index>(i)) = matrix.y(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace design_detail

// Uniform random permutation under the seed; the first round(ratio*N) rows
// become the training set. Deterministic for a fixed seed.
inline SplitDataset split(const ODDesignMatrix& matrix, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw std::runtime_error("split ratio must be inside (0, 1)");
  const std::size_t n = matrix.rows();
  if (n < 2) throw std::runtime_error("split needs at least 2 rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto train_count =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(train_count));
  std::vector<std::size_t> test_idx(order.begin() + static_cast<std::ptrdiff_t>(train_count),
                                    order.end());
  SplitDataset out;
  out.train = design_detail::take_rows(matrix, train_idx);
  out.test = design_detail::take_rows(matrix, test_idx);
  out.seed = seed;
  out.ratio = ratio;
  return out;
}

}  // namespace odflow
