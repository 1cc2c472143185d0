#pragma once

// Engineered history features fed to agents, plus a k-nearest-neighbour
// mutual-information ranking of those features against reward.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rsim/binary_io.hpp"
#include "rsim/catalog.hpp"
#include "rsim/env.hpp"

namespace rsim {

inline constexpr std::size_t kFeatureCount = 10;
using FeatureVector = std::array<double, kFeatureCount>;

enum class Feature : std::size_t {
  AvgPurchasePrice = 0,
  AvgRedeemedDiscount,
  TimeSinceLastVisit,
  VisitFrequency,
  AvgBasketRevenue,
  DistinctCategories,
  LastCoupon,
  ShelfPriceIndex,
  StoreMarketing,
  CumulativeQuantity,
};

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept;

/// Running sufficient statistics for one customer. A "visit" here is a
/// period with at least one purchase, the only visits an agent can observe.
struct SummaryAccumulator {
  std::uint64_t steps = 0;
  std::uint64_t purchase_steps = 0;
  std::uint64_t last_purchase_step = 0;
  double total_revenue = 0.0;
  double total_quantity = 0.0;
  double total_discount = 0.0;
  std::vector<std::uint64_t> categories_seen;  // bitset over categories
  std::uint32_t distinct_categories = 0;
  double last_coupon = 0.0;
  double shelf_index = 0.0;
  double store_marketing = 0.0;

  FeatureVector features() const noexcept;
  friend bool operator==(const SummaryAccumulator&, const SummaryAccumulator&) = default;
};

/// Batch-level inputs shared by every customer's update.
struct SummaryContext {
  const Catalog* catalog = nullptr;
  std::span<const double> prev_shelf_price;  // empty for the first observation
  double shelf_index = 0.0;                  // of the current observation
};

/// Mean of shelf / base over the catalog.
double shelf_price_index(const Catalog& catalog, std::span<const double> shelf_price);

/// Folds observation O_t into the accumulator. prev_coupon is A_{t-1} and is
/// ignored for the first observation.
void update_summary(SummaryAccumulator& acc, const Observation& obs, double prev_coupon, const SummaryContext& ctx);

/// Per-batch summarizer state: one accumulator per customer plus the shelf
/// prices of the last observation (needed to price the next Q_{t-1}).
struct SummarizerState {
  std::vector<SummaryAccumulator> customers;
  std::vector<double> last_shelf_price;
  bool started = false;

  friend bool operator==(const SummarizerState&, const SummarizerState&) = default;
};

class BatchSummarizer {
 public:
  explicit BatchSummarizer(const Catalog& catalog, std::size_t n_customers);
  BatchSummarizer(const Catalog& catalog, SummarizerState state);

  /// Consumes the current observations of env. prev_actions are the coupon
  /// indices applied in the previous step (ignored on the first call).
  void observe(const Env& env, std::span<const std::uint32_t> prev_actions);

  FeatureVector features(std::size_t customer) const { return state_.customers.at(customer).features(); }
  const SummarizerState& state() const noexcept { return state_; }

 private:
  const Catalog* catalog_;
  SummarizerState state_;
};

void write_summarizer(BinaryWriter& w, const SummarizerState& s);
SummarizerState read_summarizer(BinaryReader& r);

/// Names, order and z-score statistics of the agent-facing features.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
  double reward_scale = 1.0;  // reward standard deviation in the training data

  static FeatureSchema identity();
  /// Fits means and standard deviations over rows of a row-major matrix.
  static FeatureSchema fit(std::span<const double> rows, std::span<const double> rewards);

  void standardize(std::span<const double> raw, std::span<double> out) const;
  std::vector<double> standardize(std::span<const double> raw) const;
  std::size_t dim() const noexcept { return names.size(); }
  std::uint64_t hash() const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

void to_json(nlohmann::json& j, const FeatureSchema& s);
void from_json(const nlohmann::json& j, FeatureSchema& s);
void write_schema(BinaryWriter& w, const FeatureSchema& s);
FeatureSchema read_schema(BinaryReader& r);

/// Kraskov-Stoegbauer-Grassberger estimator (first variant) with the max
/// norm, in nats, clipped at zero. Inputs are standardized and jittered by
/// 1e-10 to break ties. Constant input yields 0.
double mutual_information(std::span<const double> x, std::span<const double> y, std::size_t k = 3,
                          std::uint64_t seed = 0);

struct FeatureScore {
  std::string name;
  double score = 0.0;
};
using FeatureRanking = std::vector<FeatureScore>;

/// Scores each column of a row-major (n x names.size()) matrix against the
/// rewards and sorts descending, ties by name.
FeatureRanking rank_features(std::span<const double> rows, std::span<const double> rewards,
                             std::span<const std::string> names, std::size_t k = 3, std::uint64_t seed = 0);

std::string ranking_csv(const FeatureRanking& ranking);

}  // namespace rsim
