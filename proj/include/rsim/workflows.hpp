#pragma once

// Pipelines on top of the simulator: static-coupon sweeps, offline data
// collection under a random policy, agent training and evaluation from
// stored snapshots, metric aggregation, segment analysis and tuning.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsim/agents.hpp"
#include "rsim/catalog.hpp"
#include "rsim/config.hpp"
#include "rsim/env.hpp"
#include "rsim/features.hpp"

namespace rsim {

struct World {
  std::shared_ptr<const SimConfig> cfg;
  std::shared_ptr<const Catalog> catalog;
  std::shared_ptr<const CustomerPopulation> customers;
};

/// Catalog and n customers drawn from streams of `seed`.
World make_world(const SimConfig& cfg, std::size_t n_customers, std::uint64_t seed);

/// Mean price coefficient of each customer across the catalog.
std::vector<double> mean_price_coefficients(const Catalog& catalog, const CustomerPopulation& pop);

// Welch two-sample test.

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

WelchResult welch_test(std::span<const double> a, std::span<const double> b);
double mean_of(std::span<const double> v);
/// Standard error of the mean (sample sd / sqrt(n)); 0 for n < 2.
double standard_error(std::span<const double> v);

// Static sweep.

struct SweepOptions {
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::size_t n_sims = 100;
  std::size_t n_customers = 100;
  std::size_t horizon = 70;
  std::size_t window = 20;  // metrics over the last `window` steps
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

struct SweepLevel {
  double level = 0.0;
  std::vector<double> revenue;    // per simulation, mean per customer
  std::vector<double> retention;  // per simulation
};

struct SweepResult {
  std::vector<SweepLevel> levels;
};

/// Every level reuses the same simulation seeds.
SweepResult static_sweep(const SimConfig& cfg, const SweepOptions& opt);
std::string sweep_csv(const SweepResult& r);

// Offline dataset.

struct CollectOptions {
  std::size_t batch_size = 100;
  std::size_t n_batches = 10;
  std::size_t horizon = 50;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

/// One batch of customers. Raw features H_0..H_T are stored row-major as
/// [t][customer][feature]; actions A_0..A_{T-1} and rewards R_1..R_T as
/// [t][customer]. The snapshot and summarizer state sit at t = T + 1.
struct BatchRecord {
  std::uint64_t customer_offset = 0;
  EnvSnapshot snapshot;
  SummarizerState summary;
  std::vector<double> features;
  std::vector<std::uint32_t> actions;
  std::vector<double> rewards;

  friend bool operator==(const BatchRecord&, const BatchRecord&) = default;
};

struct OfflineDataset {
  static constexpr std::uint32_t kVersion = 1;

  SimConfig config;
  CollectOptions options;
  FeatureSchema schema;
  std::vector<BatchRecord> batches;

  std::size_t batch_size() const noexcept { return options.batch_size; }
  std::size_t horizon() const noexcept { return options.horizon; }
  std::size_t n_customers() const noexcept { return options.batch_size * batches.size(); }
  std::size_t n_tuples() const noexcept { return n_customers() * options.horizon; }
  std::size_t n_actions() const noexcept { return config.coupon_grid.size(); }

  /// Raw H_t for global customer u.
  std::span<const double> raw_features(std::size_t u, std::size_t t) const;
  std::uint32_t action(std::size_t u, std::size_t t) const;
  double reward(std::size_t u, std::size_t t) const;
};

OfflineDataset collect_offline(const SimConfig& cfg, const CollectOptions& opt);
World dataset_world(const OfflineDataset& ds);
void save_dataset(const std::filesystem::path& path, const OfflineDataset& ds);
OfflineDataset load_dataset(const std::filesystem::path& path);

/// Standardized transitions of the listed customers, all T tuples each.
TransitionBatch make_transitions(const OfflineDataset& ds, std::span<const std::size_t> customers, bool with_next);

// Training.

struct TrainOptions {
  std::size_t max_epochs = 1000;
  std::size_t patience = 15;
  std::size_t customers_per_epoch = 100;
  std::size_t linear_updates = 2;
};

struct TrainLog {
  std::vector<double> losses;
  std::size_t epochs = 0;
  bool early_stopped = false;
};

/// Trains on the dataset, or on `subset` of its customers when non-empty.
/// Neural agents see rewards divided by the schema's reward scale.
std::unique_ptr<Policy> train_policy(const PolicySpec& spec, const OfflineDataset& ds, const TrainOptions& opt,
                                     std::uint64_t seed, TrainLog* log = nullptr,
                                     std::span<const std::size_t> subset = {});

// Evaluation.

inline constexpr std::size_t kMetricCount = 5;
const std::array<std::string, kMetricCount>& metric_names();

/// Per-customer means over one evaluation episode.
struct EpisodeMetrics {
  double revenue = 0.0;      // accumulated over the window
  double demand = 0.0;       // accumulated units
  double retention = 0.0;    // share with at least one visit
  double penetration = 0.0;  // distinct categories purchased
  double discount = 0.0;     // mean redeemed coupon over purchase periods

  std::array<double, kMetricCount> values() const noexcept { return {revenue, demand, retention, penetration, discount}; }
  friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

struct EvalOptions {
  std::size_t n_eval = 10;
  std::size_t t_eval = 20;
  std::size_t jobs = 1;
};

struct EvalRun {
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t n_actions = 0;
  std::vector<EpisodeMetrics> episodes;
  std::vector<double> customer_revenue;         // per customer, summed over episodes
  std::vector<std::uint32_t> action_counts;     // [customer][action]
  double total_reward = 0.0;                    // sum of every step reward

  EpisodeMetrics mean() const;
  friend bool operator==(const EvalRun&, const EvalRun&) = default;
};

/// Restores every batch snapshot and runs n_eval episodes of t_eval steps.
/// Episode e of batch b draws from derive_seed(seed, e, b), so policies
/// evaluated with the same seed face the same randomness.
EvalRun evaluate_policy(const Policy& policy, const OfflineDataset& ds, const World& world, const EvalOptions& opt,
                        std::uint64_t seed, std::span<const std::size_t> batches = {});

struct AgentRun {
  std::uint64_t train_seed = 0;
  TrainLog train;
  EvalRun eval;
};

/// n_agent independent policies; agent r trains from derive_seed(seed,
/// Training, r) and is evaluated with derive_seed(seed, Evaluation, r).
std::vector<AgentRun> train_and_eval(const PolicySpec& spec, const OfflineDataset& ds, const World& world,
                                     const TrainOptions& train, const EvalOptions& eval, std::size_t n_agent,
                                     std::uint64_t seed, std::span<const std::size_t> subset = {},
                                     std::size_t jobs = 1);

// Metrics.

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;
  double normalized = 0.0;
  double normalized_se = 0.0;
};

struct MetricsReport {
  std::string policy;
  std::size_t n_runs = 0;
  std::array<MetricSummary, kMetricCount> metrics{};
  double revenue_p_value = 1.0;  // Welch vs random
  bool degenerate = false;       // some random-policy mean is zero

  const MetricSummary& revenue() const noexcept { return metrics[0]; }
  const MetricSummary& retention() const noexcept { return metrics[2]; }
};

MetricsReport compute_metrics(const std::string& policy, std::span<const EvalRun> runs,
                              std::span<const EvalRun> random_runs);
std::string metrics_csv(std::span<const MetricsReport> reports);
void to_json(nlohmann::json& j, const MetricsReport& r);
void to_json(nlohmann::json& j, const EvalRun& r);
void from_json(const nlohmann::json& j, EvalRun& r);

// Segments.

struct SegmentStats {
  std::size_t n_customers = 0;
  double mean_revenue = 0.0;
  double mean_coupon = 0.0;
  std::vector<double> action_frequency;
  std::vector<double> offline_reward;  // mean dataset reward per offer
};

struct SegmentReport {
  std::string policy;
  double median_coefficient = 0.0;
  bool degenerate = false;
  SegmentStats sensitive;
  SegmentStats insensitive;
};

/// Median split on mean price coefficient; ties go to the sensitive side.
std::vector<std::uint8_t> price_sensitive_mask(std::span<const double> coefficients, double* median = nullptr,
                                               bool* degenerate = nullptr);

SegmentReport segment_analysis(const std::string& policy, const World& world, std::span<const EvalRun> runs,
                               const OfflineDataset& ds);
std::string segment_csv(std::span<const SegmentReport> reports, std::span<const double> grid);
void to_json(nlohmann::json& j, const SegmentReport& r);

// Sensitivity to dataset size.

struct SizeReport {
  std::size_t n_customers = 0;
  MetricsReport metrics;
};

std::vector<SizeReport> sensitivity_sweep(const PolicySpec& spec, const OfflineDataset& ds, const World& world,
                                          std::span<const std::size_t> sizes, const TrainOptions& train,
                                          const EvalOptions& eval, std::size_t n_agent, std::uint64_t seed,
                                          std::size_t jobs = 1);

// Tuning.

struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<nlohmann::json> choices;  // categorical when non-empty
};

struct HyperParamSpace {
  PolicyKind kind = PolicyKind::LinUCB;
  std::vector<ParamRange> params;

  static HyperParamSpace for_kind(PolicyKind kind);
  bool contains(const PolicySpec& spec) const;
};

using ParamSampler = std::function<nlohmann::json(const HyperParamSpace&, Rng&)>;
nlohmann::json uniform_sampler(const HyperParamSpace& space, Rng& rng);
PolicySpec apply_params(PolicySpec base, const nlohmann::json& params);

struct Trial {
  std::size_t index = 0;
  nlohmann::json params;
  double objective = 0.0;
};

struct TuneResult {
  PolicySpec best;
  std::size_t best_trial = 0;
  std::vector<Trial> trials;
};

using Objective = std::function<double(const PolicySpec&, std::size_t trial)>;

/// Scores n_tune sampled configurations; ties keep the earliest trial.
TuneResult tune(const PolicySpec& base, const HyperParamSpace& space, std::size_t n_tune, const Objective& objective,
                std::uint64_t seed, const ParamSampler& sampler = uniform_sampler);

/// Objective: mean accumulated revenue over n_agent train-and-eval runs.
Objective revenue_objective(const OfflineDataset& ds, const World& world, const TrainOptions& train,
                            const EvalOptions& eval, std::size_t n_agent, std::uint64_t seed, std::size_t jobs = 1);

std::string trials_jsonl(const TuneResult& r);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view s);
std::string format_double(double v);

}  // namespace rsim
