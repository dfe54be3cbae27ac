#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tailrisk/errors.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk::nn {

inline double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

/// Fully connected network with tanh hidden layers and a linear output layer.
///
/// Parameters are not owned: they live in a flat vector laid out layer by
/// layer as W (out x in, column-major) followed by b. Batches are passed as
/// (features x batch) matrices.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> activations;  // input, hidden layers, output
  };

  Mlp() = default;
  Mlp(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t outputs);

  std::size_t inputs() const { return sizes_.front(); }
  std::size_t outputs() const { return sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t parameter_count() const { return offsets_.back(); }

  // Glorot-uniform weights, zero biases.
  void initialize(Eigen::Ref<Eigen::VectorXd> params, Rng& rng) const;

  // Index of output unit k's bias in the flat vector.
  std::size_t output_bias_index(std::size_t k) const;

  Eigen::MatrixXd forward(Eigen::Ref<const Eigen::VectorXd> params, const Eigen::MatrixXd& x,
                          Cache* cache = nullptr) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(outputs).
  void backward(Eigen::Ref<const Eigen::VectorXd> params, const Cache& cache, const Eigen::MatrixXd& d_out,
                Eigen::Ref<Eigen::VectorXd> grad) const;

  // Sum of squared weights (biases excluded), and its gradient scaled by `l2`.
  double weight_norm_sq(Eigen::Ref<const Eigen::VectorXd> params) const;
  void add_weight_decay(Eigen::Ref<const Eigen::VectorXd> params, double l2, Eigen::Ref<Eigen::VectorXd> grad) const;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const { return offsets_[layer] + sizes_[layer + 1] * sizes_[layer]; }

  std::vector<std::size_t> sizes_{1, 1};
  std::vector<std::size_t> offsets_{0, 2};
};

class Adam {
 public:
  Adam(std::size_t n, double learning_rate) : lr_(learning_rate), m_(Eigen::VectorXd::Zero(n)), v_(m_) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

struct TrainOptions {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double validation_fraction = 0.2;
};

struct TrainTrace {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::size_t best_epoch = 0;
  double best_validation = std::numeric_limits<double>::infinity();
  std::size_t step_rejections = 0;
};

// Splits rows into (train, validation) with a random permutation.
void split_rows(std::size_t n, double validation_fraction, Rng& rng, std::vector<std::size_t>& train,
                std::vector<std::size_t>& validation);

/// Minibatch Adam with early stopping on the validation loss.
///
/// Objective must provide
///   double loss(const Eigen::VectorXd& params, std::span<const std::size_t> rows) const;
///   double loss_and_grad(const Eigen::VectorXd& params, std::span<const std::size_t> rows,
///                        Eigen::VectorXd& grad) const;
/// where loss() is the early-stopping criterion (it may omit a penalty that
/// loss_and_grad() optimizes) and a non-finite value marks parameters outside the objective's domain. Such
/// steps are undone and the learning rate halved. On return `params` holds the
/// best-validation iterate.
template <class Objective>
TrainTrace train_adam(const Objective& objective, Eigen::VectorXd& params, std::vector<std::size_t> train_rows,
                      const std::vector<std::size_t>& validation_rows, const TrainOptions& options, Rng& rng) {
  if (train_rows.empty()) throw EstimationError("training set is empty");
  const auto& monitor_rows = validation_rows.empty() ? train_rows : validation_rows;
  TrainTrace trace;
  Adam adam(static_cast<std::size_t>(params.size()), options.learning_rate);
  Eigen::VectorXd grad(params.size());
  Eigen::VectorXd previous = params;
  Eigen::VectorXd best = params;
  trace.best_validation = objective.loss(params, monitor_rows);
  if (!std::isfinite(trace.best_validation)) throw EstimationError("initial parameters give a non-finite loss");

  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    for (std::size_t i = train_rows.size(); i > 1; --i) std::swap(train_rows[i - 1], train_rows[rng.index(i)]);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t len = std::min(batch, train_rows.size() - start);
      const std::span<const std::size_t> rows(train_rows.data() + start, len);
      grad.setZero();
      double value = objective.loss_and_grad(params, rows, grad);
      while (!std::isfinite(value) || !grad.allFinite()) {
        ++trace.step_rejections;
        if (trace.step_rejections > 60) {
          throw EstimationError("training diverged: loss not finite after " + std::to_string(epoch) + " epochs");
        }
        params = previous;
        adam.set_learning_rate(0.5 * adam.learning_rate());
        grad.setZero();
        value = objective.loss_and_grad(params, rows, grad);
      }
      epoch_loss += value * static_cast<double>(len);
      seen += len;
      previous = params;
      adam.step(params, grad);
    }
    trace.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    double val = objective.loss(params, monitor_rows);
    if (!std::isfinite(val)) {
      // The last step left the domain; fall back to the iterate before it.
      params = previous;
      adam.set_learning_rate(0.5 * adam.learning_rate());
      ++trace.step_rejections;
      val = objective.loss(params, monitor_rows);
    }
    trace.validation_loss.push_back(val);
    if (val < trace.best_validation) {
      trace.best_validation = val;
      trace.best_epoch = epoch + 1;
      best = params;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  params = best;
  return trace;
}

}  // namespace tailrisk::nn
