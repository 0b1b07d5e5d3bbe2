#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace odflow {

struct SvrConfig {
  double cost = 1.0;     // box constraint C
  double epsilon = 0.1;  // tube half-width e
  double gamma = 0.0;    // RBF width; 0 selects 1/(n_features * mean feature variance)
  double tol = 1e-3;     // KKT violation tolerance
  std::uint64_t max_pair_updates = 1000000;
  bool allow_nonstandard = false;
};

struct SvrModel {
  Eigen::VectorXd coeffs;   // nonzero dual coefficients a_i, |a_i| <= C
  Eigen::MatrixXd support;  // retained training inputs, one row per coefficient
  double bias = 0.0;
  double gamma = 0.0;
  SvrConfig config;
};

inline double rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b, double gamma) {
  return std::exp(-gamma * (a - b).squaredNorm());
}

namespace svr_detail {

inline void validate_config(const SvrConfig& config) {
  if (config.cost <= 0.0) throw std::runtime_error("svr cost must be positive");
  if (config.epsilon < 0.0) throw std::runtime_error("svr epsilon must be non-negative");
  if (config.allow_nonstandard) return;
  auto in = [](double v, std::initializer_list<double> grid) {
    for (double g : grid)
      if (v == g) return true;
    return false;
  };
  if (!in(config.cost, {0.1, 1.0, 10.0}))
    throw std::runtime_error("svr cost outside grid {0.1,1,10}; set allow_nonstandard");
  if (!in(config.epsilon, {0.01, 0.1, 1.0}))
    throw std::runtime_error("svr epsilon outside grid {0.01,0.1,1}; set allow_nonstandard");
}

inline double auto_gamma(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const double p = static_cast<double>(x.cols());
  double var_sum = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    var_sum += (x.col(j).array() - mean).square().sum() / static_cast<double>(x.rows());
  }
  const double mean_var = var_sum / p;
  if (mean_var <= 0.0) return 1.0 / p;
  return 1.0 / (p * mean_var);
}

// Kernel rows computed lazily; the full matrix is cached when small enough.
class KernelCache {
 public:
  KernelCache(const Eigen::MatrixXd& x, double gamma) : x_(x), gamma_(gamma) {
    n_ = x.rows();
    if (n_ * n_ <= kFullLimit) {
      full_.resize(n_, n_);
      for (Eigen::Index i = 0; i < n_; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
          double k = rbf_kernel(x_.row(i).transpose(), x_.row(j).transpose(), gamma_);
          full_(i, j) = k;
          full_(j, i) = k;
        }
      }
      have_full_ = true;
    } else {
      rows_.resize(static_cast<std::size_t>(n_));
    }
  }

  // The kernel is symmetric, so row i is served as a contiguous column view.
  Eigen::Ref<const Eigen::VectorXd> row(Eigen::Index i) {
    if (have_full_) return full_.col(i);
    auto& slot = rows_[static_cast<std::size_t>(i)];
    if (slot.size() == 0) {
      slot.resize(n_);
      for (Eigen::Index j = 0; j < n_; ++j)
        slot(j) = rbf_kernel(x_.row(i).transpose(), x_.row(j).transpose(), gamma_);
    }
    return slot;
  }

  double at(Eigen::Index i, Eigen::Index j) {
    if (have_full_) return full_(i, j);
    return row(i)(j);
  }

 private:
  static constexpr Eigen::Index kFullLimit = 2048 * 2048;
  const Eigen::MatrixXd& x_;
  double gamma_;
  Eigen::Index n_;
  bool have_full_ = false;
  Eigen::MatrixXd full_;
  std::vector<Eigen::VectorXd> rows_;
};

struct SolveResult {
  Eigen::VectorXd beta;  // full-length dual coefficients
  double bias = 0.0;
  double violation = 0.0;
  double duality_gap = 0.0;
  std::uint64_t updates = 0;
  bool converged = false;
};

// Maximal-violating-pair dual ascent on the coefficient form of the
// epsilon-insensitive dual: minimize 1/2 b'Kb - y'b + e*sum|b_i| subject to
// sum(b_i) = 0 and |b_i| <= C. Each step solves the two-variable subproblem
// exactly; the objective is piecewise quadratic along the pair direction with
// kinks where either coefficient crosses zero.
inline SolveResult solve_dual(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double cost,
                              double epsilon, double gamma, double tol,
                              std::uint64_t max_updates) {
  const Eigen::Index n = x.rows();
  KernelCache kernel(x, gamma);

  SolveResult result;
  result.beta = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd residual = y;  // E_i = y_i - (K beta)_i

  auto lower_bound = [&](Eigen::Index t) {  // b >= lo_t, defined when beta_t < C
    return result.beta(t) >= 0.0 ? residual(t) - epsilon : residual(t) + epsilon;
  };
  auto upper_bound = [&](Eigen::Index t) {  // b <= up_t, defined when beta_t > -C
    return result.beta(t) > 0.0 ? residual(t) - epsilon : residual(t) + epsilon;
  };

  const double bound_slack = 1e-12 * std::max(cost, 1.0);
  std::uint64_t updates = 0;
  double max_lo = 0.0, min_up = 0.0;
  Eigen::Index i = -1, j = -1;
  auto scan_bounds = [&]() {
    i = j = -1;
    max_lo = -std::numeric_limits<double>::infinity();
    min_up = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (result.beta(t) < cost - bound_slack) {
        double lo = lower_bound(t);
        if (lo > max_lo) {
          max_lo = lo;
          i = t;
        }
      }
      if (result.beta(t) > -cost + bound_slack) {
        double up = upper_bound(t);
        if (up < min_up) {
          min_up = up;
          j = t;
        }
      }
    }
  };
  while (true) {
    scan_bounds();
    result.violation = max_lo - min_up;
    if (result.violation < tol || i < 0 || j < 0 || i == j) {
      result.converged = result.violation < tol;
      break;
    }
    if (updates >= max_updates) break;
    ++updates;

    const double beta_i = result.beta(i);
    const double beta_j = result.beta(j);
    const double kii = kernel.at(i, i);
    const double kjj = kernel.at(j, j);
    const double kij = kernel.at(i, j);
    const double curvature = kii + kjj - 2.0 * kij;
    const double grad = residual(j) - residual(i);  // smooth directional derivative at t=0

    // Feasible range for t = delta(beta_i) with delta(beta_j) = -t.
    const double t_min = std::max(-cost - beta_i, beta_j - cost);
    const double t_max = std::min(cost - beta_i, beta_j + cost);

    auto objective_delta = [&](double t) {
      return 0.5 * curvature * t * t + grad * t +
             epsilon * (std::abs(beta_i + t) - std::abs(beta_i)) +
             epsilon * (std::abs(beta_j - t) - std::abs(beta_j));
    };

    double best_t = 0.0;
    double best_delta = 0.0;
    auto consider = [&](double t) {
      if (!(t >= t_min && t <= t_max)) return;
      const double d = objective_delta(t);
      if (d < best_delta || (d == best_delta && std::abs(t) < std::abs(best_t))) {
        best_delta = d;
        best_t = t;
      }
    };
    if (curvature > 1e-14) {
      for (double si : {-1.0, 1.0})
        for (double sj : {-1.0, 1.0})
          consider(std::clamp((-grad - epsilon * (si - sj)) / curvature, t_min, t_max));
    }
    consider(-beta_i);  // kink: beta_i crosses zero
    consider(beta_j);   // kink: beta_j crosses zero
    consider(t_min);
    consider(t_max);
    if (best_delta >= 0.0) break;  // numerically stuck; bias midpoint still valid

    result.beta(i) = std::clamp(beta_i + best_t, -cost, cost);
    result.beta(j) = std::clamp(beta_j - best_t, -cost, cost);
    const double di = result.beta(i) - beta_i;
    const double dj = result.beta(j) - beta_j;
    residual -= di * kernel.row(i) + dj * kernel.row(j);
    if (updates % 16384 == 0)  // periodic refresh against incremental drift
      for (Eigen::Index t = 0; t < n; ++t)
        residual(t) = y(t) - kernel.row(t).dot(result.beta);
  }

  result.updates = updates;
  // Exact residual refresh, then the bias from fresh stationarity bounds.
  for (Eigen::Index t = 0; t < n; ++t) residual(t) = y(t) - kernel.row(t).dot(result.beta);
  scan_bounds();
  if (std::isfinite(max_lo) && std::isfinite(min_up))
    result.bias = 0.5 * (max_lo + min_up);
  else
    result.bias = residual.mean();

  // Duality gap: primal uses the current (beta, bias), dual drops the bias.
  double quad = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) quad += result.beta(t) * (y(t) - residual(t));
  double primal = 0.5 * quad;
  for (Eigen::Index t = 0; t < n; ++t)
    primal += cost * std::max(0.0, std::abs(residual(t) - result.bias) - epsilon);
  const double dual = -0.5 * quad + y.dot(result.beta) - epsilon * result.beta.lpNorm<1>();
  result.duality_gap = primal - dual;
  return result;
}

}  // namespace svr_detail

struct SvrFitDetail {
  SvrModel model;
  Eigen::VectorXd beta_full;  // dual coefficients over every training point
  double violation = 0.0;
  double duality_gap = 0.0;
  std::uint64_t updates = 0;
};

inline SvrFitDetail fit_svr_detailed(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     const SvrConfig& config) {
  svr_detail::validate_config(config);
  if (x.rows() != y.size()) throw std::runtime_error("fit_svr: row count mismatch");
  if (x.rows() < 2) throw std::runtime_error("fit_svr needs at least 2 rows");

  const Eigen::MatrixXd xm = x;
  const Eigen::VectorXd ym = y;
  const double gamma = config.gamma > 0.0 ? config.gamma : svr_detail::auto_gamma(xm);

  auto solved = svr_detail::solve_dual(xm, ym, config.cost, config.epsilon, gamma, config.tol,
                                       config.max_pair_updates);
  if (!solved.converged) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", solved.duality_gap);
    throw std::runtime_error("svr did not converge within " +
                             std::to_string(config.max_pair_updates) +
                             " pair updates (duality gap " + buf + ")");
  }

  // Coefficients below numeric dust are not support vectors.
  const double dust = 1e-12 * std::max(config.cost, 1.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index t = 0; t < xm.rows(); ++t)
    if (std::abs(solved.beta(t)) > dust) kept.push_back(t);

  SvrFitDetail detail;
  detail.beta_full = solved.beta;
  detail.violation = solved.violation;
  detail.duality_gap = solved.duality_gap;
  detail.updates = solved.updates;
  detail.model.config = config;
  detail.model.gamma = gamma;
  detail.model.bias = solved.bias;
  detail.model.coeffs.resize(static_cast<Eigen::Index>(kept.size()));
  detail.model.support.resize(static_cast<Eigen::Index>(kept.size()), xm.cols());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    detail.model.coeffs(static_cast<Eigen::Index>(k)) = solved.beta(kept[k]);
    detail.model.support.row(static_cast<Eigen::Index>(k)) = xm.row(kept[k]);
  }
  return detail;
}

inline SvrModel fit_svr(const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y, const SvrConfig& config) {
  return fit_svr_detailed(x, y, config).model;
}

// Kernel expansion over the retained support vectors.
inline double predict_svr(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (model.support.cols() != x.size())
    throw std::runtime_error("predict_svr: feature width mismatch");
  double sum = model.bias;
  for (Eigen::Index k = 0; k < model.coeffs.size(); ++k)
    sum += model.coeffs(k) * rbf_kernel(x, model.support.row(k).transpose(), model.gamma);
  return sum;
}

inline Eigen::VectorXd predict_svr_batch(const SvrModel& model,
                                         const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_svr(model, x.row(i).transpose());
  return out;
}

}  // namespace odflow
