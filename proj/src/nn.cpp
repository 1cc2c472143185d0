#include "rsim/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rsim {

namespace {

void check_sizes(std::span<const std::size_t> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("network needs input and output sizes");
  for (auto s : sizes)
    if (s == 0) throw std::invalid_argument("layer sizes must be positive");
}

}  // namespace

Mlp::Mlp(std::span<const std::size_t> sizes, Rng& rng) {
  check_sizes(sizes);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(sizes[l]);
    const auto fan_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c)
      for (Eigen::Index r = 0; r < fan_out; ++r) w(r, c) = rng.uniform(-limit, limit);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(fan_out));
  }
}

Mlp Mlp::zeros(std::span<const std::size_t> sizes) {
  check_sizes(sizes);
  Mlp m;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    m.weights_.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l])));
    m.biases_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1])));
  }
  return m;
}

std::vector<std::size_t> Mlp::sizes() const {
  std::vector<std::size_t> s;
  if (weights_.empty()) return s;
  s.push_back(input_dim());
  for (const auto& w : weights_) s.push_back(static_cast<std::size_t>(w.rows()));
  return s;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) throw std::invalid_argument("network input dimension mismatch");
  if (!x.allFinite()) throw std::domain_error("non-finite network input");
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = l + 1 < weights_.size() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != input_dim()) throw std::invalid_argument("network input dimension mismatch");
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    a = l + 1 < weights_.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a;
}

Mlp::Gradients Mlp::backward(const Eigen::VectorXd& x, const Eigen::VectorXd& output_grad) const {
  if (static_cast<std::size_t>(output_grad.size()) != output_dim()) throw std::invalid_argument("output gradient size mismatch");
  if (!x.allFinite()) throw std::domain_error("non-finite network input");
  std::vector<Eigen::VectorXd> acts{x};
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * acts.back() + biases_[l];
    acts.push_back(l + 1 < weights_.size() ? Eigen::VectorXd(z.array().tanh()) : z);
  }
  Gradients g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  Eigen::VectorXd delta = output_grad;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    g.weights[l] = delta * acts[l].transpose();
    g.biases[l] = delta;
    if (l > 0) delta = (weights_[l].transpose() * delta).array() * (1.0 - acts[l].array().square());
  }
  return g;
}

double Mlp::head_loss(const Eigen::MatrixXd& x, std::span<const std::uint32_t> heads,
                      std::span<const double> targets) const {
  const Eigen::MatrixXd out = forward_batch(x);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double e = out(heads[static_cast<std::size_t>(i)], i) - targets[static_cast<std::size_t>(i)];
    loss += 0.5 * e * e;
  }
  return out.cols() > 0 ? loss / static_cast<double>(out.cols()) : 0.0;
}

double Mlp::train_heads(const Eigen::MatrixXd& x, std::span<const std::uint32_t> heads, std::span<const double> targets,
                        double learning_rate) {
  const Eigen::Index m = x.cols();
  if (static_cast<std::size_t>(m) != heads.size() || heads.size() != targets.size())
    throw std::invalid_argument("batch, heads and targets must have equal length");
  if (m == 0) return 0.0;
  if (static_cast<std::size_t>(x.rows()) != input_dim()) throw std::invalid_argument("network input dimension mismatch");

  std::vector<Eigen::MatrixXd> acts{x};
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * acts.back()).colwise() + biases_[l];
    acts.push_back(l + 1 < weights_.size() ? Eigen::MatrixXd(z.array().tanh()) : z);
  }
  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(acts.back().rows(), m);
  double loss = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto h = heads[static_cast<std::size_t>(i)];
    if (h >= output_dim()) throw std::out_of_range("output head out of range");
    const double e = acts.back()(h, i) - targets[static_cast<std::size_t>(i)];
    loss += 0.5 * e * e;
    delta(h, i) = e * inv_m;
  }
  for (std::size_t l = weights_.size(); l-- > 0;) {
    Eigen::MatrixXd gw = delta * acts[l].transpose();
    Eigen::VectorXd gb = delta.rowwise().sum();
    if (l > 0) delta = (weights_[l].transpose() * delta).array() * (1.0 - acts[l].array().square());
    weights_[l] -= learning_rate * gw;
    biases_[l] -= learning_rate * gb;
  }
  return loss * inv_m;
}

void Mlp::apply(const Gradients& g, double learning_rate) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= learning_rate * g.weights[l];
    biases_[l] -= learning_rate * g.biases[l];
  }
}

std::size_t Mlp::n_parameters() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> p;
  p.reserve(n_parameters());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    p.insert(p.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    p.insert(p.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return p;
}

void Mlp::set_flat_parameters(std::span<const double> p) {
  if (p.size() != n_parameters()) throw std::invalid_argument("parameter vector size mismatch");
  std::size_t at = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::copy_n(p.data() + at, weights_[l].size(), weights_[l].data());
    at += static_cast<std::size_t>(weights_[l].size());
    std::copy_n(p.data() + at, biases_[l].size(), biases_[l].data());
    at += static_cast<std::size_t>(biases_[l].size());
  }
}

void Mlp::write(BinaryWriter& w) const {
  const auto s = sizes();
  w.put_vector(std::vector<std::uint64_t>(s.begin(), s.end()));
  w.put_vector(flat_parameters());
}

Mlp Mlp::read(BinaryReader& r) {
  const auto s64 = r.get_vector<std::uint64_t>();
  const std::vector<std::size_t> s(s64.begin(), s64.end());
  Mlp m = zeros(s);
  m.set_flat_parameters(r.get_vector<double>());
  return m;
}

bool operator==(const Mlp& a, const Mlp& b) { return a.sizes() == b.sizes() && a.flat_parameters() == b.flat_parameters(); }

}  // namespace rsim
