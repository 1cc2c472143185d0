#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "rsim/binary_io.hpp"
#include "rsim/catalog.hpp"
#include "rsim/choice.hpp"
#include "rsim/config.hpp"

namespace rsim {

/// What one customer sees at the start of period t: last period's purchases,
/// current shelf prices and the marketing it is exposed to. Spans point into
/// the environment and stay valid until the next step, reset or restore.
struct Observation {
  std::span<const PurchaseLine> last_purchases;
  std::span<const double> shelf_price;
  double store_marketing = 0.0;
  std::span<const double> product_marketing;

  std::vector<std::uint32_t> dense_quantities(std::size_t n_products) const;
};

/// (1 - D * redeemed) * shelf.
double effective_price(double shelf_price, double coupon, bool redeemed);

/// Complete resumable world state. Randomness is counter based, so the
/// stream position is (stream_key, t).
struct EnvSnapshot {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t stream_key = 0;
  std::uint64_t customer_id_offset = 0;
  std::uint64_t t = 1;
  PricingState pricing;
  std::vector<double> product_marketing;
  std::vector<double> store_marketing;
  std::vector<CustomerState> customers;

  friend bool operator==(const EnvSnapshot&, const EnvSnapshot&) = default;
};

void write_snapshot(BinaryWriter& w, const EnvSnapshot& s);
EnvSnapshot read_snapshot(BinaryReader& r);
void save_snapshot(const std::filesystem::path& path, const EnvSnapshot& s);
EnvSnapshot load_snapshot(const std::filesystem::path& path);
void to_json(nlohmann::json& j, const EnvSnapshot& s);
void from_json(const nlohmann::json& j, EnvSnapshot& s);

struct StepResult {
  std::vector<double> rewards;
  std::vector<PurchaseOutcome> outcomes;
};

class HorizonError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One batch of customers shopping the same catalog under shared shelf
/// pricing. Period numbering starts at t = 1.
class Env {
 public:
  Env(std::shared_ptr<const SimConfig> cfg, std::shared_ptr<const Catalog> catalog,
      std::shared_ptr<const CustomerPopulation> customers, std::uint64_t customer_id_offset = 0);

  /// Back to t = 1 with fresh pricing and marketing drawn from `seed`.
  void reset(std::uint64_t seed);

  /// Simulates period t for every customer with the given coupon indices and
  /// advances to t + 1. `jobs` bounds worker threads; the result does not
  /// depend on it.
  StepResult step(std::span<const std::uint32_t> actions, std::size_t jobs = 1);

  EnvSnapshot snapshot() const;
  void restore(const EnvSnapshot& s);

  /// Switches future draws to a new stream without touching the state.
  void reseed(std::uint64_t stream_key) noexcept { stream_key_ = stream_key; }

  Observation observation(std::size_t customer) const;

  std::uint64_t t() const noexcept { return t_; }
  std::size_t n_customers() const noexcept { return customers_->size(); }
  std::size_t n_actions() const noexcept { return cfg_->coupon_grid.size(); }
  double coupon(std::uint32_t action) const;
  const PricingState& pricing() const noexcept { return pricing_; }
  const CustomerState& customer_state(std::size_t u) const { return states_.at(u); }
  const Catalog& catalog() const noexcept { return *catalog_; }
  const CustomerPopulation& customers() const noexcept { return *customers_; }
  const SimConfig& config() const noexcept { return *cfg_; }

 private:
  void draw_marketing();
  void rebuild_terms();

  std::shared_ptr<const SimConfig> cfg_;
  std::shared_ptr<const Catalog> catalog_;
  std::shared_ptr<const CustomerPopulation> customers_;
  std::uint64_t customer_id_offset_ = 0;
  std::uint64_t stream_key_ = 0;
  std::uint64_t t_ = 1;
  PricingState pricing_;
  std::vector<double> product_marketing_;
  std::vector<double> store_marketing_;
  std::vector<CustomerState> states_;
  ProductTerms terms_;
};

}  // namespace rsim
