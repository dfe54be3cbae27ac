#include "tailrisk/network.hpp"

#include <algorithm>

namespace tailrisk::nn {

Mlp::Mlp(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t outputs) {
  if (inputs == 0 || outputs == 0) throw DomainError("network needs at least one input and one output");
  sizes_.clear();
  sizes_.push_back(inputs);
  for (std::size_t h : hidden) {
    if (h == 0) throw DomainError("hidden layer of width zero");
    sizes_.push_back(h);
  }
  sizes_.push_back(outputs);
  offsets_.assign(1, 0);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(offsets_.back() + sizes_[l + 1] * sizes_[l] + sizes_[l + 1]);
  }
}

void Mlp::initialize(Eigen::Ref<Eigen::VectorXd> params, Rng& rng) const {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes_[l] + sizes_[l + 1]));
    const std::size_t nw = sizes_[l + 1] * sizes_[l];
    for (std::size_t i = 0; i < nw; ++i) params[weight_offset(l) + i] = limit * (2.0 * rng.uniform() - 1.0);
    for (std::size_t i = 0; i < sizes_[l + 1]; ++i) params[bias_offset(l) + i] = 0.0;
  }
}

std::size_t Mlp::output_bias_index(std::size_t k) const {
  if (k >= outputs()) throw DomainError("output index out of range");
  return bias_offset(sizes_.size() - 2) + k;
}

Eigen::MatrixXd Mlp::forward(Eigen::Ref<const Eigen::VectorXd> params, const Eigen::MatrixXd& x,
                             Cache* cache) const {
  if (static_cast<std::size_t>(x.rows()) != inputs()) throw DomainError("network input has the wrong width");
  const std::size_t layers = sizes_.size() - 1;
  if (cache) {
    cache->activations.resize(layers + 1);
    cache->activations[0] = x;
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + weight_offset(l), rows, cols);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + bias_offset(l), rows);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (l + 1 < layers) z = z.array().tanh().matrix();
    a = std::move(z);
    if (cache) cache->activations[l + 1] = a;
  }
  return a;
}

void Mlp::backward(Eigen::Ref<const Eigen::VectorXd> params, const Cache& cache, const Eigen::MatrixXd& d_out,
                   Eigen::Ref<Eigen::VectorXd> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + weight_offset(l), rows, cols);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + weight_offset(l), rows, cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + bias_offset(l), rows);
    const Eigen::MatrixXd& a_prev = cache.activations[l];
    gw.noalias() += delta * a_prev.transpose();
    gb += delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = w.transpose() * delta;
      delta = (back.array() * (1.0 - a_prev.array().square())).matrix();
    }
  }
}

double Mlp::weight_norm_sq(Eigen::Ref<const Eigen::VectorXd> params) const {
  double total = 0.0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    total += params.segment(static_cast<Eigen::Index>(weight_offset(l)),
                            static_cast<Eigen::Index>(sizes_[l + 1] * sizes_[l]))
                 .squaredNorm();
  }
  return total;
}

void Mlp::add_weight_decay(Eigen::Ref<const Eigen::VectorXd> params, double l2,
                           Eigen::Ref<Eigen::VectorXd> grad) const {
  if (l2 == 0.0) return;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto off = static_cast<Eigen::Index>(weight_offset(l));
    const auto len = static_cast<Eigen::Index>(sizes_[l + 1] * sizes_[l]);
    grad.segment(off, len) += 2.0 * l2 * params.segment(off, len);
  }
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

void split_rows(std::size_t n, double validation_fraction, Rng& rng, std::vector<std::size_t>& train,
                std::vector<std::size_t>& validation) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw DomainError("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(n)));
  validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(validation.begin(), validation.end());
  std::sort(train.begin(), train.end());
}

}  // namespace tailrisk::nn
