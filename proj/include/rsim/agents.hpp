#pragma once

// Coupon-targeting policies behind one act/update contract. act() is const
// and safe to call concurrently; update() is single-writer.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rsim/binary_io.hpp"
#include "rsim/nn.hpp"
#include "rsim/rng.hpp"

namespace rsim {

enum class PolicyKind { Static, Random, LinTS, LinUCB, NeuralBoltzmann, Dqn };

std::string_view policy_kind_name(PolicyKind k) noexcept;
PolicyKind parse_policy_kind(std::string_view name);

struct PolicySpec {
  PolicyKind kind = PolicyKind::Random;
  std::size_t n_actions = 6;
  std::size_t feature_dim = 10;

  std::uint32_t static_action = 0;

  // Linear bandits.
  double alpha = 0.7387;
  double forgetting = 0.8119;
  bool intercept = true;

  // Neural agents.
  double learning_rate = 0.025;
  double temperature = 0.1665;
  std::vector<std::size_t> hidden_layers{8, 2};
  std::size_t units = 16;
  double epsilon = 0.1552;
  double discount = 0.8792;
  std::size_t target_sync = 100;
  std::size_t minibatch = 64;
  double reward_scale = 1.0;

  /// Tuned defaults for each kind.
  static PolicySpec defaults(PolicyKind kind, std::size_t n_actions, std::size_t feature_dim);

  void validate() const;
  bool trainable() const noexcept { return kind != PolicyKind::Static && kind != PolicyKind::Random; }

  friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

void to_json(nlohmann::json& j, const PolicySpec& s);
void from_json(const nlohmann::json& j, PolicySpec& s);

/// Rows of features are standardized feature vectors of length dim.
struct TransitionBatch {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> actions;
  std::vector<double> rewards;
  std::vector<double> next_features;  // empty unless the batch feeds a DQN
  std::vector<std::uint8_t> terminal;

  std::size_t size() const noexcept { return actions.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  std::span<const double> next_row(std::size_t i) const { return {next_features.data() + i * dim, dim}; }
  void validate(std::size_t n_actions, bool need_next) const;
};

class Policy {
 public:
  explicit Policy(PolicySpec spec) : spec_(std::move(spec)) {}
  virtual ~Policy() = default;

  const PolicySpec& spec() const noexcept { return spec_; }

  /// Chooses an action index for one standardized feature vector.
  virtual std::uint32_t act(std::span<const double> features, Rng& rng) const = 0;

  /// Consumes one batch of transitions and returns the training loss (0 for
  /// policies without a loss).
  virtual double update(const TransitionBatch& batch) = 0;

  virtual void write_parameters(BinaryWriter& w) const = 0;
  virtual void read_parameters(BinaryReader& r) = 0;

 protected:
  PolicySpec spec_;
};

class StaticPolicy final : public Policy {
 public:
  explicit StaticPolicy(PolicySpec spec);
  std::uint32_t act(std::span<const double>, Rng&) const override { return spec_.static_action; }
  double update(const TransitionBatch&) override { return 0.0; }
  void write_parameters(BinaryWriter&) const override {}
  void read_parameters(BinaryReader&) override {}
};

class RandomPolicy final : public Policy {
 public:
  explicit RandomPolicy(PolicySpec spec);
  std::uint32_t act(std::span<const double>, Rng& rng) const override {
    return static_cast<std::uint32_t>(rng.below(spec_.n_actions));
  }
  double update(const TransitionBatch&) override { return 0.0; }
  void write_parameters(BinaryWriter&) const override {}
  void read_parameters(BinaryReader&) override {}
};

/// Disjoint linear bandit. Per arm, the Gram matrix G and response b decay by
/// the forgetting factor once per update call; the ridge estimate solves
/// (I + G) theta = b.
class LinearBandit final : public Policy {
 public:
  explicit LinearBandit(PolicySpec spec);

  std::uint32_t act(std::span<const double> features, Rng& rng) const override;
  double update(const TransitionBatch& batch) override;
  void write_parameters(BinaryWriter& w) const override;
  void read_parameters(BinaryReader& r) override;

  std::size_t dim() const noexcept { return d_; }
  Eigen::VectorXd input(std::span<const double> features) const;
  Eigen::MatrixXd precision(std::size_t arm) const;
  const Eigen::VectorXd& response(std::size_t arm) const { return b_.at(arm); }
  const Eigen::VectorXd& theta(std::size_t arm) const { return theta_.at(arm); }
  const Eigen::MatrixXd& covariance(std::size_t arm) const { return cov_.at(arm); }
  /// Per-arm score used by act(); LinTS draws its posterior sample from rng.
  std::vector<double> scores(std::span<const double> features, Rng* rng) const;

 private:
  void refresh();

  std::size_t d_;
  std::vector<Eigen::MatrixXd> gram_;
  std::vector<Eigen::VectorXd> b_;
  std::vector<Eigen::VectorXd> theta_;
  std::vector<Eigen::MatrixXd> cov_;
  std::vector<Eigen::MatrixXd> cov_chol_;
};

class NeuralBoltzmann final : public Policy {
 public:
  NeuralBoltzmann(PolicySpec spec, std::uint64_t seed);

  std::uint32_t act(std::span<const double> features, Rng& rng) const override;
  double update(const TransitionBatch& batch) override;
  void write_parameters(BinaryWriter& w) const override;
  void read_parameters(BinaryReader& r) override;

  std::vector<double> action_probabilities(std::span<const double> features) const;
  const Mlp& network() const noexcept { return net_; }

 private:
  Mlp net_;
  Rng train_rng_;
};

class Dqn final : public Policy {
 public:
  Dqn(PolicySpec spec, std::uint64_t seed);

  std::uint32_t act(std::span<const double> features, Rng& rng) const override;
  double update(const TransitionBatch& batch) override;
  void write_parameters(BinaryWriter& w) const override;
  void read_parameters(BinaryReader& r) override;

  Eigen::VectorXd q_values(std::span<const double> features) const;
  const Mlp& network() const noexcept { return qnet_; }
  const Mlp& target_network() const noexcept { return target_; }
  std::uint64_t gradient_steps() const noexcept { return steps_; }

 private:
  Mlp qnet_;
  Mlp target_;
  Rng train_rng_;
  std::uint64_t steps_ = 0;
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::uint64_t seed);

/// Index of the largest value; ties go to the lowest index.
std::uint32_t argmax_lowest(std::span<const double> v);

class SchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  PolicySpec spec;
  std::uint64_t schema_hash = 0;
  std::uint64_t seed = 0;
  std::unique_ptr<Policy> policy;
};

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, std::uint64_t schema_hash,
                     std::uint64_t seed);

/// Throws SchemaMismatch when expected_schema_hash is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_schema_hash = std::nullopt);

}  // namespace rsim
