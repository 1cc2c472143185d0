#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "rsim/config.hpp"
#include "rsim/rng.hpp"

namespace rsim {

/// Immutable product-side parameters. Products are stored grouped by
/// category, so category j owns the contiguous index range
/// [category_offsets[j], category_offsets[j+1]).
struct Catalog {
  std::vector<std::uint32_t> category;          // per product
  std::vector<std::uint32_t> category_offsets;  // n_categories + 1
  std::vector<double> base_price;
  std::vector<double> unobserved;          // Z_i
  std::vector<double> price_factor;        // beta_i^w
  std::vector<double> quantity_intercept;  // gamma_0i^prod
  std::vector<double> category_intercept;  // gamma_0j^cate
  std::vector<double> category_slope;      // gamma_1j^cate

  std::size_t n_products() const noexcept { return base_price.size(); }
  std::size_t n_categories() const noexcept { return category_intercept.size(); }
  std::span<const double> base_prices() const noexcept { return base_price; }

  double mean_price_factor() const noexcept;

  /// Throws std::invalid_argument when structural invariants fail.
  void validate() const;

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

/// Per-customer coefficient draws (structure of arrays).
struct CustomerPopulation {
  std::vector<double> price_coef;          // beta_u^w <= 0
  std::vector<double> feature_coef;        // beta_u^x
  std::vector<double> unobserved_loading;  // beta_u^z
  std::vector<double> store_intercept;     // gamma_0,u^store
  std::vector<double> browse_carryover;    // gamma_1,u^store
  std::vector<double> marketing_coef;      // gamma_2,u^store
  std::vector<double> inertia;             // theta_u
  std::vector<double> quantity_slope;      // gamma_u^prod

  std::size_t size() const noexcept { return price_coef.size(); }
  void validate() const;

  /// Rows [first, first + count) as a new population.
  CustomerPopulation slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const CustomerPopulation&, const CustomerPopulation&) = default;
};

/// One customer's coefficients, gathered from the population arrays.
struct CustomerParams {
  double price_coef = 0.0;
  double feature_coef = 0.0;
  double unobserved_loading = 0.0;
  double store_intercept = 0.0;
  double browse_carryover = 0.0;
  double marketing_coef = 0.0;
  double inertia = 0.0;
  double quantity_slope = 0.0;

  static CustomerParams of(const CustomerPopulation& pop, std::size_t u) noexcept {
    return {pop.price_coef[u],       pop.feature_coef[u], pop.unobserved_loading[u], pop.store_intercept[u],
            pop.browse_carryover[u], pop.marketing_coef[u], pop.inertia[u],          pop.quantity_slope[u]};
  }
};

enum class PriceRegime : std::uint8_t { Regular = 0, Discount = 1 };

struct PricingState {
  std::vector<PriceRegime> regime;
  std::vector<double> depth;  // 0 when regular
  std::vector<double> shelf_price;

  std::size_t size() const noexcept { return shelf_price.size(); }
  friend bool operator==(const PricingState&, const PricingState&) = default;
};

Catalog generate_catalog(const SimConfig& cfg, std::uint64_t seed);
Catalog generate_catalog(const SimConfig& cfg);

/// Draws n customers from stream `seed`. Customer u's coefficients come from
/// derive_seed(seed, u), so any prefix of a larger draw is identical.
CustomerPopulation generate_customers(const SimConfig& cfg, std::size_t n, std::uint64_t seed);

/// Discount depth from the truncated normal configured in cfg.pricing.
double draw_discount_depth(const PriceProcessConfig& cfg, Rng& rng);

/// Long-run probability of the discount regime.
double stationary_discount_probability(const PriceProcessConfig& cfg) noexcept;

/// Initial regimes drawn from the stationary distribution.
PricingState initial_pricing(const Catalog& catalog, const PriceProcessConfig& cfg, Rng& rng);

/// Advances every product's two-state chain one step. A fresh depth is drawn
/// whenever a product enters the discount regime.
PricingState step_shelf_prices(const PricingState& state, const Catalog& catalog, const PriceProcessConfig& cfg,
                               Rng& rng);

void to_json(nlohmann::json& j, const Catalog& c);
void from_json(const nlohmann::json& j, Catalog& c);
void to_json(nlohmann::json& j, const CustomerPopulation& p);
void from_json(const nlohmann::json& j, CustomerPopulation& p);
void to_json(nlohmann::json& j, const PricingState& s);
void from_json(const nlohmann::json& j, PricingState& s);

/// Versioned JSON world file holding a catalog and a population.
void save_world(const std::filesystem::path& path, const Catalog& catalog, const CustomerPopulation& pop,
                std::uint64_t config_hash);
std::pair<Catalog, CustomerPopulation> load_world(const std::filesystem::path& path);

}  // namespace rsim
