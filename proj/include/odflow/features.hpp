#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "odflow/catalog.hpp"
#include "odflow/text.hpp"

namespace odflow {

// Per-unit values of the 30 catalog variables plus the residential flag.
struct FeatureTable {
  std::vector<std::string> unit_ids;       // catalog order (load order)
  std::vector<bool> residential;           // parallel to unit_ids
  Eigen::MatrixXd values;                  // units x 30, catalog column order
  std::unordered_map<std::string, std::size_t> index_of;

  std::size_t units() const { return unit_ids.size(); }

  std::size_t row_of(const std::string& id) const {
    auto it = index_of.find(id);
    if (it == index_of.end())
      throw std::runtime_error("unit '" + id + "' missing from feature table");
    return it->second;
  }

  void rebuild_index() {
    index_of.clear();
    for (std::size_t i = 0; i < unit_ids.size(); ++i) {
      if (!index_of.emplace(unit_ids[i], i).second)
        throw std::runtime_error("duplicate unit id '" + unit_ids[i] + "' in feature table");
    }
  }
};

// Fills every non-residential unit's variables with the arithmetic mean over
// residential units; residential units are untouched. Idempotent.
inline FeatureTable mean_impute(FeatureTable table) {
  std::size_t residential_count = 0;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(table.values.cols());
  for (std::size_t i = 0; i < table.units(); ++i) {
    if (table.residential[i]) {
      mean += table.values.row(static_cast<Eigen::Index>(i));
      ++residential_count;
    }
  }
  if (residential_count == 0)
    throw std::runtime_error("mean imputation requires at least one residential unit");
  mean /= static_cast<double>(residential_count);
  for (std::size_t i = 0; i < table.units(); ++i)
    if (!table.residential[i]) table.values.row(static_cast<Eigen::Index>(i)) = mean;
  return table;
}

struct MuSigma {
  double mu = 0.0;
  double sigma = 1.0;
};

// Z-score parameters. Population standard deviation (divide by N) by default;
// the sample variant (divide by N-1) is selectable.
inline MuSigma zscore_fit(const Eigen::Ref<const Eigen::VectorXd>& values,
                          bool population = true, const std::string& name = "") {
  const Eigen::Index n = values.size();
  if (n < 2) throw std::runtime_error("zscore_fit needs at least 2 values" +
                                      (name.empty() ? "" : " (variable '" + name + "')"));
  const double mu = values.mean();
  const double ss = (values.array() - mu).square().sum();
  const double denom = population ? static_cast<double>(n) : static_cast<double>(n - 1);
  const double sigma = std::sqrt(ss / denom);
  if (sigma == 0.0)
    throw std::runtime_error("degenerate variable" +
                             (name.empty() ? std::string(" (constant column)")
                                           : " '" + name + "' (constant column)"));
  return MuSigma{mu, sigma};
}

inline double zscore_apply(double value, const MuSigma& p) {
  if (p.sigma <= 0.0) throw std::runtime_error("zscore_apply: sigma must be positive");
  return (value - p.mu) / p.sigma;
}

inline double zscore_invert(double standardized, const MuSigma& p) {
  if (p.sigma <= 0.0) throw std::runtime_error("zscore_invert: sigma must be positive");
  return standardized * p.sigma + p.mu;
}

inline Eigen::VectorXd zscore_apply(const Eigen::Ref<const Eigen::VectorXd>& values,
                                    const MuSigma& p) {
  if (p.sigma <= 0.0) throw std::runtime_error("zscore_apply: sigma must be positive");
  return (values.array() - p.mu) / p.sigma;
}

inline Eigen::VectorXd zscore_invert(const Eigen::Ref<const Eigen::VectorXd>& values,
                                     const MuSigma& p) {
  if (p.sigma <= 0.0) throw std::runtime_error("zscore_invert: sigma must be positive");
  return values.array() * p.sigma + p.mu;
}

// (mu, sigma) for every catalog variable plus the trip-count target.
struct NormalizationParams {
  std::array<MuSigma, VariableCatalog::size> vars;
  MuSigma target;
  bool population_std = true;
};

inline NormalizationParams fit_feature_params(const FeatureTable& table, bool population = true) {
  NormalizationParams params;
  params.population_std = population;
  for (std::size_t j = 0; j < VariableCatalog::size; ++j)
    params.vars[j] = zscore_fit(table.values.col(static_cast<Eigen::Index>(j)), population,
                                std::string(VariableCatalog::name(j)));
  return params;
}

inline FeatureTable standardize_features(FeatureTable table, const NormalizationParams& params) {
  for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
    auto col = table.values.col(static_cast<Eigen::Index>(j));
    col = zscore_apply(col, params.vars[j]);
  }
  return table;
}

// --- delimited text I/O ---------------------------------------------------

// First column is the unit id; the remaining columns must be exactly the 30
// catalog variables (any order) plus an optional `residential` 0/1 column.
inline FeatureTable read_features_csv(std::istream& in, char delim = ',') {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("feature input is empty (header required)");
  auto header = split(trim(line), delim);
  if (header.size() < 1 + VariableCatalog::size)
    throw std::runtime_error("feature header must have unit id plus the 30 catalog variables");

  std::array<long, VariableCatalog::size> column_of;
  column_of.fill(-1);
  long residential_col = -1;
  for (std::size_t i = 1; i < header.size(); ++i) {
    std::string name(trim(header[i]));
    if (name == "residential") {
      residential_col = static_cast<long>(i);
    } else if (VariableCatalog::contains(name)) {
      std::size_t j = VariableCatalog::index_of(name);
      if (column_of[j] != -1) throw std::runtime_error("duplicate feature column '" + name + "'");
      column_of[j] = static_cast<long>(i);
    } else {
      throw std::runtime_error("unknown feature column '" + name + "'");
    }
  }
  for (std::size_t j = 0; j < VariableCatalog::size; ++j)
    if (column_of[j] < 0)
      throw std::runtime_error("feature header missing variable '" +
                               std::string(VariableCatalog::name(j)) + "'");

  FeatureTable table;
  std::vector<std::array<double, VariableCatalog::size>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    auto fields = split(row, delim);
    if (fields.size() < header.size())
      throw std::runtime_error("feature row " + std::to_string(line_no) + ": too few fields");
    std::string id(trim(fields[0]));
    if (id.empty())
      throw std::runtime_error("feature row " + std::to_string(line_no) + ": empty unit id");
    std::array<double, VariableCatalog::size> values{};
    for (std::size_t j = 0; j < VariableCatalog::size; ++j) {
      auto v = parse_double(fields[static_cast<std::size_t>(column_of[j])]);
      if (!v || !std::isfinite(*v))
        throw std::runtime_error("feature row " + std::to_string(line_no) + ": bad value for '" +
                                 std::string(VariableCatalog::name(j)) + "'");
      values[j] = *v;
    }
    bool residential = true;
    if (residential_col >= 0) {
      auto flag = parse_int(fields[static_cast<std::size_t>(residential_col)]);
      if (!flag || (*flag != 0 && *flag != 1))
        throw std::runtime_error("feature row " + std::to_string(line_no) +
                                 ": residential must be 0 or 1");
      residential = (*flag == 1);
    }
    table.unit_ids.push_back(std::move(id));
    table.residential.push_back(residential);
    rows.push_back(values);
  }
  if (rows.empty()) throw std::runtime_error("feature table has no units");
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(VariableCatalog::size));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < VariableCatalog::size; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  table.rebuild_index();
  return table;
}

inline void write_features_csv(std::ostream& out, const FeatureTable& table, char delim = ',') {
  out << "unit_id";
  for (std::size_t j = 0; j < VariableCatalog::size; ++j)
    out << delim << VariableCatalog::name(j);
  out << delim << "residential\n";
  for (std::size_t i = 0; i < table.units(); ++i) {
    out << table.unit_ids[i];
    for (std::size_t j = 0; j < VariableCatalog::size; ++j)
      out << delim
          << format_double(table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << delim << (table.residential[i] ? 1 : 0) << "\n";
  }
}

// Sidecar with one row per variable and a reserved `__target__` row, so
// downscaling runs can either reuse or refit the parameters.
inline void write_params_csv(std::ostream& out, const NormalizationParams& params,
                             char delim = ',') {
  out << "# odflow normalization v1 std=" << (params.population_std ? "population" : "sample")
      << "\n";
  out << "variable" << delim << "mu" << delim << "sigma\n";
  for (std::size_t j = 0; j < VariableCatalog::size; ++j)
    out << VariableCatalog::name(j) << delim << format_double(params.vars[j].mu) << delim
        << format_double(params.vars[j].sigma) << "\n";
  out << "__target__" << delim << format_double(params.target.mu) << delim
      << format_double(params.target.sigma) << "\n";
}

inline NormalizationParams read_params_csv(std::istream& in, char delim = ',') {
  NormalizationParams params;
  std::array<bool, VariableCatalog::size> seen{};
  bool target_seen = false;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    if (row.front() == '#') {
      if (row.find("std=sample") != std::string_view::npos) params.population_std = false;
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // "variable,mu,sigma"
      continue;
    }
    auto fields = split(row, delim);
    if (fields.size() < 3)
      throw std::runtime_error("params row " + std::to_string(line_no) + ": too few fields");
    std::string name(trim(fields[0]));
    auto mu = parse_double(fields[1]);
    auto sigma = parse_double(fields[2]);
    if (!mu || !sigma)
      throw std::runtime_error("params row " + std::to_string(line_no) + ": bad number");
    if (name == "__target__") {
      params.target = MuSigma{*mu, *sigma};
      target_seen = true;
    } else {
      std::size_t j = VariableCatalog::index_of(name);
      params.vars[j] = MuSigma{*mu, *sigma};
      seen[j] = true;
    }
  }
  for (std::size_t j = 0; j < VariableCatalog::size; ++j)
    if (!seen[j])
      throw std::runtime_error("params file missing variable '" +
                               std::string(VariableCatalog::name(j)) + "'");
  if (!target_seen) throw std::runtime_error("params file missing __target__ row");
  return params;
}

}  // namespace odflow
