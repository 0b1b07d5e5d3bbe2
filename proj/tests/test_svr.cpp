#include <catch2/catch.hpp>

#include <random>

#include "odflow/svr.hpp"
#include "svr_qp_oracle.hpp"

using namespace odflow;

namespace {

SvrConfig config_for(double cost, double epsilon) {
  SvrConfig config;
  config.cost = cost;
  config.epsilon = epsilon;
  return config;
}

}  // namespace

TEST_CASE("rbf kernel is 1 at zero distance and decays", "[svr]") {
  Eigen::Vector2d a{0.3, -0.7};
  CHECK(rbf_kernel(a, a, 0.5) == 1.0);
  Eigen::Vector2d b{1.3, -0.7};
  CHECK(rbf_kernel(a, b, 0.5) == Approx(std::exp(-0.5)));
  CHECK(rbf_kernel(a, b, 2.0) < rbf_kernel(a, b, 0.5));
}

TEST_CASE("empty expansion predicts the bias", "[svr]") {
  SvrModel model;
  model.coeffs.resize(0);
  model.support.resize(0, 3);
  model.bias = 1.25;
  model.gamma = 0.1;
  Eigen::Vector3d x{1, 2, 3};
  CHECK(predict_svr(model, x) == 1.25);
}

TEST_CASE("far from every support vector the prediction approaches the bias", "[svr]") {
  SvrModel model;
  model.coeffs = Eigen::VectorXd::Constant(1, 2.0);
  model.support = Eigen::MatrixXd::Zero(1, 2);
  model.bias = -0.5;
  model.gamma = 1.0;
  Eigen::Vector2d at_sv{0.0, 0.0};
  CHECK(predict_svr(model, at_sv) == Approx(1.5));  // bias + 2 * R(0)
  Eigen::Vector2d far{50.0, 50.0};
  CHECK(predict_svr(model, far) == Approx(-0.5).margin(1e-12));
}

TEST_CASE("five points on a line stay inside the tube", "[svr]") {
  Eigen::MatrixXd x(5, 1);
  x << -1.0, -0.5, 0.0, 0.5, 1.0;
  const Eigen::VectorXd y = x.col(0);
  const SvrFitDetail detail = fit_svr_detailed(x, y, config_for(10.0, 0.1));
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double pred = predict_svr(detail.model, x.row(i).transpose());
    CHECK(std::abs(y(i) - pred) <= 0.1 + 1e-3);
  }
  // cross-check against the projected-gradient QP oracle
  const double gamma = detail.model.gamma;
  const auto oracle = svr_oracle::solve(x, y, 10.0, 0.1, gamma);
  Eigen::MatrixXd kernel(5, 5);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j)
      kernel(i, j) = rbf_kernel(x.row(i).transpose(), x.row(j).transpose(), gamma);
  const double f_main = svr_oracle::dual_objective(kernel, y, 0.1, detail.beta_full);
  const double f_oracle = svr_oracle::dual_objective(kernel, y, 0.1, oracle.beta);
  CHECK(f_main <= f_oracle + 1e-4 * (1.0 + std::abs(f_oracle)));
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double main_pred = predict_svr(detail.model, x.row(i).transpose());
    const double oracle_pred = kernel.row(i).dot(oracle.beta) + oracle.bias;
    CHECK(main_pred == Approx(oracle_pred).margin(2e-3));
  }
}

TEST_CASE("box constraint and tube property hold on random problems", "[svr]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  const double costs[] = {0.1, 1.0, 10.0};
  const double epsilons[] = {0.01, 0.1, 1.0};
  for (int round = 0; round < 12; ++round) {
    const int n = 6 + static_cast<int>(rng() % 20);
    const int p = (round % 2 == 0) ? 1 : 5;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) x(i, j) = coord(rng);
      y(i) = std::sin(2.0 * x(i, 0)) + 0.2 * coord(rng);
    }
    const double cost = costs[rng() % 3];
    const double epsilon = epsilons[rng() % 3];
    const SvrFitDetail detail = fit_svr_detailed(x, y, config_for(cost, epsilon));
    CHECK(detail.beta_full.cwiseAbs().maxCoeff() <= cost + 1e-9);
    // non-support residuals stay inside the tube
    for (Eigen::Index i = 0; i < n; ++i) {
      if (detail.beta_full(i) != 0.0) continue;
      const double pred = predict_svr(detail.model, x.row(i).transpose());
      CHECK(std::abs(y(i) - pred) <= epsilon + 1e-3);
    }
    // the SV-only expansion equals the full expansion over all training rows
    for (Eigen::Index probe = 0; probe < n; ++probe) {
      double full = detail.model.bias;
      for (Eigen::Index i = 0; i < n; ++i)
        full += detail.beta_full(i) *
                rbf_kernel(x.row(probe).transpose(), x.row(i).transpose(), detail.model.gamma);
      CHECK(predict_svr(detail.model, x.row(probe).transpose()) ==
            Approx(full).margin(1e-9));
    }
  }
}

TEST_CASE("svr grid values are enforced unless overridden", "[svr]") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  Eigen::VectorXd y(4);
  y << 0, 1, 2, 3;
  SvrConfig config = config_for(2.5, 0.1);
  CHECK_THROWS(fit_svr(x, y, config));
  config.allow_nonstandard = true;
  CHECK_NOTHROW(fit_svr(x, y, config));
}

TEST_CASE("non-convergence carries the duality gap", "[svr]") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  Eigen::MatrixXd x(40, 2);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = coord(rng);
    x(i, 1) = coord(rng);
    y(i) = 3.0 * coord(rng);
  }
  SvrConfig config = config_for(10.0, 0.01);
  config.max_pair_updates = 3;  // starve the solver
  config.allow_nonstandard = true;
  CHECK_THROWS_WITH(fit_svr(x, y, config), Catch::Matchers::Contains("duality gap"));
}

TEST_CASE("automatic gamma is the dimension-scaled default", "[svr]") {
  // unit-variance features: gamma = 1 / n_features
  Eigen::MatrixXd x(4, 2);
  x << 1, -1, -1, 1, 1, 1, -1, -1;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  SvrConfig config = config_for(10.0, 0.1);
  const SvrModel model = fit_svr(x, y, config);
  CHECK(model.gamma == Approx(0.5));
}
