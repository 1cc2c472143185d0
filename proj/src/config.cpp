#include "rsim/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace rsim {
namespace {

using nlohmann::json;

// Reads j[key] into out when present and records the key as consumed.
template <typename T>
void read(const json& j, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (!seen.contains(k)) throw ConfigError("unknown config key '" + where + k + "'");
}

json pricing_json(const PriceProcessConfig& p) {
  return {{"stay_regular", p.stay_regular}, {"stay_discount", p.stay_discount},
          {"depth_mean", p.depth_mean},     {"depth_sd", p.depth_sd},
          {"depth_min", p.depth_min},       {"depth_max", p.depth_max}};
}

void pricing_from(const json& j, PriceProcessConfig& p) {
  std::set<std::string> seen;
  read(j, "stay_regular", p.stay_regular, seen);
  read(j, "stay_discount", p.stay_discount, seen);
  read(j, "depth_mean", p.depth_mean, seen);
  read(j, "depth_sd", p.depth_sd, seen);
  read(j, "depth_min", p.depth_min, seen);
  read(j, "depth_max", p.depth_max, seen);
  reject_unknown(j, seen, "pricing.");
}

json catalog_json(const CatalogPriors& c) {
  return {{"log_price_mean", c.log_price_mean},
          {"log_price_sd", c.log_price_sd},
          {"price_on_unobserved", c.price_on_unobserved},
          {"unobserved_sd", c.unobserved_sd},
          {"price_factor_min", c.price_factor_min},
          {"price_factor_max", c.price_factor_max},
          {"quantity_intercept_mean", c.quantity_intercept_mean},
          {"quantity_intercept_sd", c.quantity_intercept_sd},
          {"category_intercept_mean", c.category_intercept_mean},
          {"category_intercept_sd", c.category_intercept_sd},
          {"category_slope_mean", c.category_slope_mean},
          {"category_slope_sd", c.category_slope_sd}};
}

void catalog_from(const json& j, CatalogPriors& c) {
  std::set<std::string> seen;
  read(j, "log_price_mean", c.log_price_mean, seen);
  read(j, "log_price_sd", c.log_price_sd, seen);
  read(j, "price_on_unobserved", c.price_on_unobserved, seen);
  read(j, "unobserved_sd", c.unobserved_sd, seen);
  read(j, "price_factor_min", c.price_factor_min, seen);
  read(j, "price_factor_max", c.price_factor_max, seen);
  read(j, "quantity_intercept_mean", c.quantity_intercept_mean, seen);
  read(j, "quantity_intercept_sd", c.quantity_intercept_sd, seen);
  read(j, "category_intercept_mean", c.category_intercept_mean, seen);
  read(j, "category_intercept_sd", c.category_intercept_sd, seen);
  read(j, "category_slope_mean", c.category_slope_mean, seen);
  read(j, "category_slope_sd", c.category_slope_sd, seen);
  reject_unknown(j, seen, "catalog.");
}

json customers_json(const CustomerPriors& c) {
  return {{"log_price_sensitivity_mean", c.log_price_sensitivity_mean},
          {"log_price_sensitivity_sd", c.log_price_sensitivity_sd},
          {"feature_coef_mean", c.feature_coef_mean},
          {"feature_coef_sd", c.feature_coef_sd},
          {"unobserved_loading_mean", c.unobserved_loading_mean},
          {"unobserved_loading_sd", c.unobserved_loading_sd},
          {"store_intercept_location", c.store_intercept_location},
          {"store_intercept_scale", c.store_intercept_scale},
          {"browse_carryover_mean", c.browse_carryover_mean},
          {"browse_carryover_sd", c.browse_carryover_sd},
          {"marketing_min", c.marketing_min},
          {"marketing_max", c.marketing_max},
          {"inertia_min", c.inertia_min},
          {"inertia_max", c.inertia_max},
          {"quantity_slope_min", c.quantity_slope_min},
          {"quantity_slope_max", c.quantity_slope_max}};
}

void customers_from(const json& j, CustomerPriors& c) {
  std::set<std::string> seen;
  read(j, "log_price_sensitivity_mean", c.log_price_sensitivity_mean, seen);
  read(j, "log_price_sensitivity_sd", c.log_price_sensitivity_sd, seen);
  read(j, "feature_coef_mean", c.feature_coef_mean, seen);
  read(j, "feature_coef_sd", c.feature_coef_sd, seen);
  read(j, "unobserved_loading_mean", c.unobserved_loading_mean, seen);
  read(j, "unobserved_loading_sd", c.unobserved_loading_sd, seen);
  read(j, "store_intercept_location", c.store_intercept_location, seen);
  read(j, "store_intercept_scale", c.store_intercept_scale, seen);
  read(j, "browse_carryover_mean", c.browse_carryover_mean, seen);
  read(j, "browse_carryover_sd", c.browse_carryover_sd, seen);
  read(j, "marketing_min", c.marketing_min, seen);
  read(j, "marketing_max", c.marketing_max, seen);
  read(j, "inertia_min", c.inertia_min, seen);
  read(j, "inertia_max", c.inertia_max, seen);
  read(j, "quantity_slope_min", c.quantity_slope_min, seen);
  read(j, "quantity_slope_max", c.quantity_slope_max, seen);
  reject_unknown(j, seen, "customers.");
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void SimConfig::validate() const {
  require(n_categories >= 1, "n_categories must be >= 1");
  require(n_products >= n_categories, "n_categories must not exceed n_products");
  require(n_customers >= 1, "n_customers must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(max_steps >= horizon, "max_steps must be >= horizon");
  require(max_lambda > 0.0, "max_lambda must be positive");
  require(!coupon_grid.empty(), "coupon_grid must not be empty");
  for (double d : coupon_grid) require(d >= 0.0 && d < 1.0, "coupon fractions must lie in [0,1)");
  require(is_prob(pricing.stay_regular) && is_prob(pricing.stay_discount),
          "pricing transition probabilities must lie in [0,1]");
  require(pricing.depth_min >= 0.0 && pricing.depth_min <= pricing.depth_max && pricing.depth_max < 1.0,
          "discount depth bounds must satisfy 0 <= min <= max < 1");
  require(pricing.depth_sd >= 0.0, "depth_sd must be non-negative");
  require(catalog.price_factor_min >= 0.0 && catalog.price_factor_min <= catalog.price_factor_max,
          "price factor bounds");
  require(catalog.log_price_sd >= 0.0 && catalog.unobserved_sd >= 0.0, "catalog spreads must be >= 0");
  require(customers.inertia_min >= 0.0 && customers.inertia_max <= 1.0 &&
              customers.inertia_min <= customers.inertia_max,
          "inertia bounds must lie in [0,1]");
  require(customers.marketing_min <= customers.marketing_max, "marketing bounds");
  require(customers.store_intercept_scale > 0.0, "store_intercept_scale must be positive");
  require(customers.quantity_slope_min <= customers.quantity_slope_max, "quantity slope bounds");
  require(marketing.product_max >= 0.0 && marketing.store_max >= 0.0, "marketing maxima must be >= 0");
}

std::uint64_t SimConfig::hash() const {
  const nlohmann::json j = *this;
  return fnv1a64(j.dump());
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"n_customers", c.n_customers},
       {"n_products", c.n_products},
       {"n_categories", c.n_categories},
       {"horizon", c.horizon},
       {"max_steps", c.max_steps},
       {"seed", c.seed},
       {"max_lambda", c.max_lambda},
       {"quantity_cap", c.quantity_cap},
       {"coupon_grid", c.coupon_grid},
       {"pricing", pricing_json(c.pricing)},
       {"catalog", catalog_json(c.catalog)},
       {"customers", customers_json(c.customers)},
       {"marketing", {{"product_max", c.marketing.product_max}, {"store_max", c.marketing.store_max}}}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  std::set<std::string> seen;
  read(j, "n_customers", c.n_customers, seen);
  read(j, "n_products", c.n_products, seen);
  read(j, "n_categories", c.n_categories, seen);
  read(j, "horizon", c.horizon, seen);
  read(j, "max_steps", c.max_steps, seen);
  read(j, "seed", c.seed, seen);
  read(j, "max_lambda", c.max_lambda, seen);
  read(j, "quantity_cap", c.quantity_cap, seen);
  read(j, "coupon_grid", c.coupon_grid, seen);
  seen.insert({"pricing", "catalog", "customers", "marketing"});
  if (auto it = j.find("pricing"); it != j.end()) pricing_from(*it, c.pricing);
  if (auto it = j.find("catalog"); it != j.end()) catalog_from(*it, c.catalog);
  if (auto it = j.find("customers"); it != j.end()) customers_from(*it, c.customers);
  if (auto it = j.find("marketing"); it != j.end()) {
    std::set<std::string> ms;
    read(*it, "product_max", c.marketing.product_max, ms);
    read(*it, "store_max", c.marketing.store_max, ms);
    reject_unknown(*it, ms, "marketing.");
  }
  reject_unknown(j, seen, "");
}

SimConfig parse_config(const std::string& text) {
  SimConfig cfg;
  try {
    from_json(nlohmann::json::parse(text), cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  SimConfig cfg = parse_config(ss.str());
  if (const char* s = std::getenv("RSIM_SEED"); s != nullptr && *s != '\0') {
    try {
      cfg.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("RSIM_SEED is not an unsigned integer: ") + s);
    }
  }
  return cfg;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace rsim
