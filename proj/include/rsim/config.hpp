#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rsim {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two-state high-low shelf pricing chain.
struct PriceProcessConfig {
  double stay_regular = 0.85;
  double stay_discount = 0.5;
  double depth_mean = 0.30;
  double depth_sd = 0.10;
  double depth_min = 0.05;
  double depth_max = 0.60;
};

/// Priors for product-level coefficients. Base prices are log-normal and
/// loaded on the unobserved factor so that Z moves both price and demand.
struct CatalogPriors {
  double log_price_mean = 0.6;
  double log_price_sd = 0.5;
  double price_on_unobserved = 0.15;
  double unobserved_sd = 1.0;
  double price_factor_min = 0.8;
  double price_factor_max = 1.2;
  double quantity_intercept_mean = -1.2;
  double quantity_intercept_sd = 0.3;
  double category_intercept_mean = -5.0;
  double category_intercept_sd = 0.4;
  double category_slope_mean = 0.6;
  double category_slope_sd = 0.1;
};

/// Priors for customer-level coefficients.
struct CustomerPriors {
  // |beta_u^w| is log-normal; the stored coefficient is its negative.
  double log_price_sensitivity_mean = -0.2;
  double log_price_sensitivity_sd = 0.6;
  double feature_coef_mean = 0.5;
  double feature_coef_sd = 0.2;
  double unobserved_loading_mean = 0.3;
  double unobserved_loading_sd = 0.1;
  double store_intercept_location = -2.0;
  double store_intercept_scale = 0.1;
  double browse_carryover_mean = 0.45;
  double browse_carryover_sd = 0.0;
  double marketing_min = 0.004;
  double marketing_max = 0.006;
  double inertia_min = 0.2;
  double inertia_max = 0.8;
  double quantity_slope_min = 0.1;
  double quantity_slope_max = 0.3;
};

/// Marketing intensities are i.i.d. Uniform[0, max] per step.
struct MarketingConfig {
  double product_max = 1.0;
  double store_max = 1.0;
};

struct SimConfig {
  std::size_t n_customers = 100;
  std::size_t n_products = 2514;
  std::size_t n_categories = 100;
  std::size_t horizon = 50;
  std::size_t max_steps = 1000;
  std::uint64_t seed = 1;
  double max_lambda = 1000.0;
  std::uint32_t quantity_cap = 0;  // 0: untruncated
  PriceProcessConfig pricing;
  CatalogPriors catalog;
  CustomerPriors customers;
  MarketingConfig marketing;
  std::vector<double> coupon_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// FNV-1a over the canonical JSON encoding.
  std::uint64_t hash() const;
};

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

/// Reads a JSON config. Missing keys keep their defaults; unknown keys are
/// rejected. The seed may be overridden by the RSIM_SEED environment variable.
SimConfig load_config(const std::filesystem::path& path);
SimConfig parse_config(const std::string& text);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace rsim
