#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odflow/text.hpp"

namespace odflow {

struct FnnConfig {
  int width = 150;
  int depth = 2;
  std::uint64_t seed = 0;
  int epochs = 2000;
  int batch = 5000;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double lr_peak = 1e-2;
  double lr_floor = 1e-6;
  int lr_cycles = 1;
  bool allow_nonstandard = false;
};

// depth hidden ReLU layers of width neurons, linear scalar output.
struct FnnModel {
  std::vector<Eigen::MatrixXd> weights;  // out x in per layer
  std::vector<Eigen::VectorXd> biases;
  FnnConfig config;
};

namespace fnn_detail {

inline void validate_config(const FnnConfig& config) {
  if (config.width < 1 || config.depth < 1)
    throw std::runtime_error("fnn width and depth must be positive");
  if (config.epochs < 1 || config.batch < 1 || config.lr_cycles < 1)
    throw std::runtime_error("fnn epochs, batch and lr_cycles must be positive");
  if (config.allow_nonstandard) return;
  auto in = [](int v, std::initializer_list<int> grid) {
    for (int g : grid)
      if (v == g) return true;
    return false;
  };
  if (!in(config.width, {50, 100, 150}))
    throw std::runtime_error("fnn width outside grid {50,100,150}; set allow_nonstandard");
  if (!in(config.depth, {2, 4}))
    throw std::runtime_error("fnn depth outside grid {2,4}; set allow_nonstandard");
  if (config.seed > 4)
    throw std::runtime_error("fnn seed outside grid {0..4}; set allow_nonstandard");
  if (config.epochs != 2000 || config.batch != 5000 || config.beta1 != 0.9 ||
      config.beta2 != 0.95 || config.lr_peak != 1e-2 || config.lr_floor != 1e-6 ||
      config.lr_cycles != 1)
    throw std::runtime_error("fnn training settings differ from the declared configuration; "
                             "set allow_nonstandard");
}

}  // namespace fnn_detail

// Symmetric triangular schedule: the floor rate at each cycle boundary, the
// peak at mid-cycle.
inline double triangular_lr(int epoch, const FnnConfig& config) {
  const double cycle_len = static_cast<double>(config.epochs) / config.lr_cycles;
  const double pos = std::fmod(static_cast<double>(epoch), cycle_len) / cycle_len;
  return config.lr_floor + (config.lr_peak - config.lr_floor) * (1.0 - std::abs(2.0 * pos - 1.0));
}

inline FnnModel make_fnn(int n_features, const FnnConfig& config) {
  fnn_detail::validate_config(config);
  FnnModel model;
  model.config = config;
  std::mt19937_64 rng(mix_seed(config.seed, 0x66AA));
  std::vector<int> dims;
  dims.push_back(n_features);
  for (int l = 0; l < config.depth; ++l) dims.push_back(config.width);
  dims.push_back(1);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    Eigen::VectorXd b(fan_out);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = uniform(rng);
    for (int r = 0; r < fan_out; ++r) b(r) = uniform(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }
  return model;
}

inline Eigen::VectorXd predict_fnn_batch(const FnnModel& model,
                                         const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != model.weights.front().cols())
    throw std::runtime_error("predict_fnn: feature width mismatch");
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::MatrixXd z =
        (h * model.weights[l].transpose()).rowwise() + model.biases[l].transpose();
    if (l + 1 < model.weights.size()) z = z.cwiseMax(0.0);  // ReLU on hidden layers
    h = std::move(z);
  }
  return h.col(0);
}

inline double predict_fnn(const FnnModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::MatrixXd row = x.transpose();
  return predict_fnn_batch(model, row)(0);
}

struct FnnGradient {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double loss = 0.0;
};

// Mean-squared-error loss over the given rows plus its analytic gradient.
inline FnnGradient fnn_loss_gradient(const FnnModel& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  const std::size_t layers = model.weights.size();
  const double inv_n = 1.0 / static_cast<double>(x.rows());

  std::vector<Eigen::MatrixXd> activations(layers + 1);
  activations[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z =
        (activations[l] * model.weights[l].transpose()).rowwise() + model.biases[l].transpose();
    if (l + 1 < layers) z = z.cwiseMax(0.0);
    activations[l + 1] = std::move(z);
  }

  const Eigen::VectorXd error = activations[layers].col(0) - y;
  FnnGradient grad;
  grad.loss = error.squaredNorm() * inv_n;
  grad.weights.resize(layers);
  grad.biases.resize(layers);

  Eigen::MatrixXd delta = (2.0 * inv_n) * error;  // d(loss)/d(output)
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights[l] = delta.transpose() * activations[l];
    grad.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = delta * model.weights[l];
      // ReLU mask from the stored (post-activation) hidden values.
      delta.array() *= (activations[l].array() > 0.0).cast<double>();
    }
  }
  return grad;
}

// Adam with the triangular schedule, batches reshuffled per epoch under the
// run seed (full batch when the dataset is smaller than the batch size).
// Identical (x, y, config) reproduce bit-identical parameters.
inline FnnModel fit_fnn(const Eigen::Ref<const Eigen::MatrixXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& y, const FnnConfig& config) {
  if (x.rows() != y.size()) throw std::runtime_error("fit_fnn: row count mismatch");
  if (x.rows() < 1) throw std::runtime_error("fit_fnn needs at least 1 row");
  FnnModel model = make_fnn(static_cast<int>(x.cols()), config);

  const Eigen::Index n = x.rows();
  const bool full_batch = n <= config.batch;
  const std::size_t layers = model.weights.size();

  std::vector<Eigen::MatrixXd> m_w(layers), v_w(layers);
  std::vector<Eigen::VectorXd> m_b(layers), v_b(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    m_w[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(), model.weights[l].cols());
    v_w[l] = m_w[l];
    m_b[l] = Eigen::VectorXd::Zero(model.biases[l].size());
    v_b[l] = m_b[l];
  }

  constexpr double kAdamEps = 1e-8;
  long step = 0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd batch_x;
  Eigen::VectorXd batch_y;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = triangular_lr(epoch, config);
    if (!full_batch) {
      std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0xB47C + static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }
    const Eigen::Index batch_size = full_batch ? n : config.batch;
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
      FnnGradient grad;
      if (full_batch) {
        grad = fnn_loss_gradient(model, x, y);
      } else {
        batch_x.resize(count, x.cols());
        batch_y.resize(count);
        for (Eigen::Index i = 0; i < count; ++i) {
          batch_x.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
          batch_y(i) = y(order[static_cast<std::size_t>(start + i)]);
        }
        grad = fnn_loss_gradient(model, batch_x, batch_y);
      }
      if (!std::isfinite(grad.loss))
        throw std::runtime_error("fnn training diverged (non-finite loss at epoch " +
                                 std::to_string(epoch) + ")");
      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t l = 0; l < layers; ++l) {
        m_w[l] = config.beta1 * m_w[l] + (1.0 - config.beta1) * grad.weights[l];
        v_w[l] = config.beta2 * v_w[l] +
                 (1.0 - config.beta2) * grad.weights[l].array().square().matrix();
        model.weights[l].array() -=
            lr * (m_w[l].array() / bc1) / ((v_w[l].array() / bc2).sqrt() + kAdamEps);
        m_b[l] = config.beta1 * m_b[l] + (1.0 - config.beta1) * grad.biases[l];
        v_b[l] = config.beta2 * v_b[l] +
                 (1.0 - config.beta2) * grad.biases[l].array().square().matrix();
        model.biases[l].array() -=
            lr * (m_b[l].array() / bc1) / ((v_b[l].array() / bc2).sqrt() + kAdamEps);
      }
    }
  }
  return model;
}

}  // namespace odflow
