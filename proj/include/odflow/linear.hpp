#pragma once

#include <limits>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace odflow {

struct LinearModel {
  Eigen::VectorXd coef;
  double intercept = 0.0;
};

// Ordinary least squares on centered data. The normal matrix is inverted
// through its symmetric eigendecomposition with rank truncation, so
// rank-deficient systems get the minimum-norm coefficient vector.
inline LinearModel fit_linear(const Eigen::Ref<const Eigen::MatrixXd>& x,
                              const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n != y.size()) throw std::runtime_error("fit_linear: row count mismatch");
  if (n < 2) throw std::runtime_error("fit_linear needs at least 2 rows");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  const Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("fit_linear: eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.size() > 0 ? lambda(lambda.size() - 1) : 0.0;
  const double tol =
      lambda_max * static_cast<double>(p) * std::numeric_limits<double>::epsilon();

  LinearModel model;
  model.coef = Eigen::VectorXd::Zero(p);
  if (lambda_max > 0.0) {
    const Eigen::VectorXd projected = eig.eigenvectors().transpose() * rhs;
    Eigen::VectorXd scaled = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < p; ++i)
      if (lambda(i) > tol) scaled(i) = projected(i) / lambda(i);
    model.coef = eig.eigenvectors() * scaled;
  }
  model.intercept = y_mean - model.coef.dot(x_mean);
  return model;
}

inline double predict_linear(const LinearModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.coef.size())
    throw std::runtime_error("predict_linear: feature width mismatch");
  return model.intercept + model.coef.dot(x);
}

inline Eigen::VectorXd predict_linear_batch(const LinearModel& model,
                                            const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != model.coef.size())
    throw std::runtime_error("predict_linear: feature width mismatch");
  return (x * model.coef).array() + model.intercept;
}

}  // namespace odflow
