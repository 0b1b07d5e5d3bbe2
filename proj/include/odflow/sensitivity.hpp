#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odflow/catalog.hpp"
#include "odflow/model.hpp"
#include "odflow/text.hpp"

namespace odflow {

// Perturbations are applied in standardized feature space, which keeps the
// pseudo-coefficients comparable across variables.
struct SensitivityOptions {
  double delta = 0.01;
  bool central = true;  // central difference; one-sided (forward) via flag
};

// Forest responses are piecewise-constant, so an infinitesimal step reads
// zero almost everywhere; a half-sigma step probes across split boundaries.
inline double default_delta(ModelKind kind) {
  return kind == ModelKind::forest ? 0.5 : 0.01;
}

// Expected-derivative estimate for one input: the mean over evaluation rows
// of a finite-difference quotient of the model output.
inline double perturb_one(const Model& model, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                          Eigen::Index column, double delta, bool central = true) {
  if (delta <= 0.0) throw std::runtime_error("perturbation delta must be positive");
  if (rows.rows() == 0) throw std::runtime_error("perturb_one: no evaluation rows");
  if (column < 0 || column >= rows.cols())
    throw std::runtime_error("perturb_one: column out of range");
  Eigen::MatrixXd shifted = rows;
  shifted.col(column).array() += delta;
  const Eigen::VectorXd up = predict_batch(model, shifted);
  if (central) {
    shifted.col(column).array() -= 2.0 * delta;
    const Eigen::VectorXd down = predict_batch(model, shifted);
    return (up - down).mean() / (2.0 * delta);
  }
  const Eigen::VectorXd base = predict_batch(model, rows);
  return (up - base).mean() / delta;
}

struct SensitivityEntry {
  Eigen::Index column = 0;
  double delta_y = 0.0;
  int rank = 0;  // 1 = largest magnitude
};

struct SensitivityReport {
  std::vector<SensitivityEntry> entries;  // column order; rank filled in
  double delta = 0.0;
  bool central = true;
  std::size_t rows = 0;
};

inline SensitivityReport pseudo_coefficients(const Model& model,
                                             const Eigen::Ref<const Eigen::MatrixXd>& rows,
                                             const SensitivityOptions& options) {
  SensitivityReport report;
  report.delta = options.delta;
  report.central = options.central;
  report.rows = static_cast<std::size_t>(rows.rows());
  const Eigen::Index n = rows.cols();
  report.entries.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    report.entries[static_cast<std::size_t>(i)].column = i;
    report.entries[static_cast<std::size_t>(i)].delta_y =
        perturb_one(model, rows, i, options.delta, options.central);
  }
  // Rank by |delta_y| descending; ties resolve in catalog (column) order.
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double ma = std::abs(report.entries[a].delta_y);
    double mb = std::abs(report.entries[b].delta_y);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  for (std::size_t r = 0; r < order.size(); ++r)
    report.entries[order[r]].rank = static_cast<int>(r + 1);
  return report;
}

inline SensitivityReport pseudo_coefficients(const Model& model,
                                             const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  SensitivityOptions options;
  options.delta = default_delta(kind_of(model));
  return pseudo_coefficients(model, rows, options);
}

// Report rows mirror the catalog: variable name plus origin/destination side
// when the evaluation width is the 60-column OD layout.
inline void write_sensitivity_csv(std::ostream& out, const SensitivityReport& report,
                                  ModelKind kind, char delim = ',') {
  out << "# odflow sensitivity: model=" << kind_name(kind) << " delta="
      << format_double(report.delta) << " difference="
      << (report.central ? "central" : "one_sided") << " rows=" << report.rows << "\n";
  if (kind == ModelKind::forest)
    out << "# forest responses are piecewise-constant; delta probes across split boundaries\n";
  out << "variable" << delim << "side" << delim << "pseudo_coefficient" << delim << "sign"
      << delim << "rank\n";
  const bool od_layout = report.entries.size() == 2 * VariableCatalog::size;
  for (const SensitivityEntry& entry : report.entries) {
    std::string name;
    std::string side;
    if (od_layout) {
      const auto c = static_cast<std::size_t>(entry.column);
      side = c < VariableCatalog::size ? "origin" : "destination";
      name = std::string(VariableCatalog::name(c % VariableCatalog::size));
    } else {
      side = "-";
      name = "x" + std::to_string(entry.column);
    }
    const char* sign = entry.delta_y > 0.0 ? "+" : (entry.delta_y < 0.0 ? "-" : "0");
    out << name << delim << side << delim << format_double(entry.delta_y) << delim << sign
        << delim << entry.rank << "\n";
  }
}

}  // namespace odflow
