#pragma once

// Small fully connected network: tanh hidden layers, linear output.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rsim/binary_io.hpp"
#include "rsim/rng.hpp"

namespace rsim {

class Mlp {
 public:
  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };

  Mlp() = default;

  /// Glorot-uniform weights, zero biases. sizes = {input, hidden..., output}.
  Mlp(std::span<const std::size_t> sizes, Rng& rng);

  /// All parameters zero.
  static Mlp zeros(std::span<const std::size_t> sizes);

  std::size_t input_dim() const noexcept { return weights_.empty() ? 0 : static_cast<std::size_t>(weights_.front().cols()); }
  std::size_t output_dim() const noexcept { return weights_.empty() ? 0 : static_cast<std::size_t>(weights_.back().rows()); }
  std::size_t n_layers() const noexcept { return weights_.size(); }
  std::vector<std::size_t> sizes() const;

  /// Throws std::invalid_argument on dimension mismatch and
  /// std::domain_error on non-finite input.
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Columns are samples.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;

  /// Gradient of a scalar loss L w.r.t. every parameter, given dL/d(output).
  Gradients backward(const Eigen::VectorXd& x, const Eigen::VectorXd& output_grad) const;

  /// One gradient-descent step on 0.5 * mean_i (out_i[head_i] - target_i)^2,
  /// touching only the selected output head of each sample. Columns of x are
  /// samples. Returns the loss before the step.
  double train_heads(const Eigen::MatrixXd& x, std::span<const std::uint32_t> heads, std::span<const double> targets,
                     double learning_rate);

  /// Mean loss of train_heads without updating.
  double head_loss(const Eigen::MatrixXd& x, std::span<const std::uint32_t> heads, std::span<const double> targets) const;

  void apply(const Gradients& g, double learning_rate);

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> p);
  std::size_t n_parameters() const noexcept;

  void write(BinaryWriter& w) const;
  static Mlp read(BinaryReader& r);

  const std::vector<Eigen::MatrixXd>& weights() const noexcept { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const noexcept { return biases_; }
  std::vector<Eigen::MatrixXd>& weights() noexcept { return weights_; }
  std::vector<Eigen::VectorXd>& biases() noexcept { return biases_; }

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

}  // namespace rsim
