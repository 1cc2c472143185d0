#include "rsim/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "rsim/binary_io.hpp"

namespace rsim {

double Catalog::mean_price_factor() const noexcept {
  if (price_factor.empty()) return 0.0;
  return std::accumulate(price_factor.begin(), price_factor.end(), 0.0) / static_cast<double>(price_factor.size());
}

void Catalog::validate() const {
  const std::size_t n = n_products();
  const std::size_t m = n_categories();
  if (n == 0 || m == 0) throw std::invalid_argument("catalog must have products and categories");
  if (category.size() != n || unobserved.size() != n || price_factor.size() != n || quantity_intercept.size() != n)
    throw std::invalid_argument("catalog product arrays disagree in length");
  if (category_slope.size() != m || category_offsets.size() != m + 1)
    throw std::invalid_argument("catalog category arrays disagree in length");
  if (category_offsets.front() != 0 || category_offsets.back() != n)
    throw std::invalid_argument("category offsets must span all products");
  for (std::size_t j = 0; j < m; ++j) {
    if (category_offsets[j + 1] <= category_offsets[j]) throw std::invalid_argument("empty category");
    for (auto i = category_offsets[j]; i < category_offsets[j + 1]; ++i)
      if (category[i] != j) throw std::invalid_argument("product category disagrees with offsets");
  }
  for (double p : base_price)
    if (!(p > 0.0) || !std::isfinite(p)) throw std::invalid_argument("base prices must be positive");
}

void CustomerPopulation::validate() const {
  const std::size_t n = size();
  for (const auto* v : {&feature_coef, &unobserved_loading, &store_intercept, &browse_carryover, &marketing_coef,
                        &inertia, &quantity_slope})
    if (v->size() != n) throw std::invalid_argument("population arrays disagree in length");
  for (std::size_t u = 0; u < n; ++u) {
    if (!(inertia[u] >= 0.0 && inertia[u] <= 1.0)) throw std::invalid_argument("inertia outside [0,1]");
    if (price_coef[u] > 0.0) throw std::invalid_argument("customer price coefficient must be <= 0");
  }
}

CustomerPopulation CustomerPopulation::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw std::out_of_range("population slice out of range");
  auto cut = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(first),
                               v.begin() + static_cast<std::ptrdiff_t>(first + count));
  };
  return {cut(price_coef),       cut(feature_coef),   cut(unobserved_loading), cut(store_intercept),
          cut(browse_carryover), cut(marketing_coef), cut(inertia),            cut(quantity_slope)};
}

Catalog generate_catalog(const SimConfig& cfg) { return generate_catalog(cfg, derive_seed(cfg.seed, Stream::Catalog)); }

Catalog generate_catalog(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.n_products;
  const std::size_t m = cfg.n_categories;
  const auto& pri = cfg.catalog;
  Rng rng(seed);

  Catalog c;
  c.category.resize(n);
  c.category_offsets.resize(m + 1);
  const std::size_t per = n / m;
  const std::size_t extra = n % m;
  std::uint32_t at = 0;
  for (std::size_t j = 0; j < m; ++j) {
    c.category_offsets[j] = at;
    const std::size_t size = per + (j < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) c.category[at + k] = static_cast<std::uint32_t>(j);
    at += static_cast<std::uint32_t>(size);
  }
  c.category_offsets[m] = at;

  c.base_price.resize(n);
  c.unobserved.resize(n);
  c.price_factor.resize(n);
  c.quantity_intercept.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = pri.unobserved_sd * rng.normal();
    c.unobserved[i] = z;
    c.base_price[i] = std::exp(pri.log_price_mean + pri.price_on_unobserved * z + pri.log_price_sd * rng.normal());
    c.price_factor[i] = rng.uniform(pri.price_factor_min, pri.price_factor_max);
    c.quantity_intercept[i] = rng.normal(pri.quantity_intercept_mean, pri.quantity_intercept_sd);
  }
  c.category_intercept.resize(m);
  c.category_slope.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    c.category_intercept[j] = rng.normal(pri.category_intercept_mean, pri.category_intercept_sd);
    c.category_slope[j] = rng.normal(pri.category_slope_mean, pri.category_slope_sd);
  }
  return c;
}

CustomerPopulation generate_customers(const SimConfig& cfg, std::size_t n, std::uint64_t seed) {
  cfg.validate();
  const auto& pri = cfg.customers;
  CustomerPopulation p;
  for (auto* v : {&p.price_coef, &p.feature_coef, &p.unobserved_loading, &p.store_intercept, &p.browse_carryover,
                  &p.marketing_coef, &p.inertia, &p.quantity_slope})
    v->resize(n);
  for (std::size_t u = 0; u < n; ++u) {
    Rng rng(derive_seed(seed, Stream::Customers, u));
    p.price_coef[u] = -std::exp(rng.normal(pri.log_price_sensitivity_mean, pri.log_price_sensitivity_sd));
    p.feature_coef[u] = rng.normal(pri.feature_coef_mean, pri.feature_coef_sd);
    p.unobserved_loading[u] = rng.normal(pri.unobserved_loading_mean, pri.unobserved_loading_sd);
    p.store_intercept[u] = rng.gumbel(pri.store_intercept_location, pri.store_intercept_scale);
    p.browse_carryover[u] = rng.normal(pri.browse_carryover_mean, pri.browse_carryover_sd);
    p.marketing_coef[u] = rng.uniform(pri.marketing_min, pri.marketing_max);
    p.inertia[u] = rng.uniform(pri.inertia_min, pri.inertia_max);
    p.quantity_slope[u] = rng.uniform(pri.quantity_slope_min, pri.quantity_slope_max);
  }
  return p;
}

double draw_discount_depth(const PriceProcessConfig& cfg, Rng& rng) {
  if (cfg.depth_sd <= 0.0) return std::clamp(cfg.depth_mean, cfg.depth_min, cfg.depth_max);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double d = rng.normal(cfg.depth_mean, cfg.depth_sd);
    if (d >= cfg.depth_min && d <= cfg.depth_max) return d;
  }
  return std::clamp(cfg.depth_mean, cfg.depth_min, cfg.depth_max);
}

double stationary_discount_probability(const PriceProcessConfig& cfg) noexcept {
  const double leave_regular = 1.0 - cfg.stay_regular;
  const double leave_discount = 1.0 - cfg.stay_discount;
  const double total = leave_regular + leave_discount;
  return total > 0.0 ? leave_regular / total : 0.0;
}

PricingState initial_pricing(const Catalog& catalog, const PriceProcessConfig& cfg, Rng& rng) {
  const std::size_t n = catalog.n_products();
  const double pd = stationary_discount_probability(cfg);
  PricingState s{std::vector<PriceRegime>(n, PriceRegime::Regular), std::vector<double>(n, 0.0),
                 catalog.base_price};
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(pd)) {
      s.regime[i] = PriceRegime::Discount;
      s.depth[i] = draw_discount_depth(cfg, rng);
      s.shelf_price[i] = (1.0 - s.depth[i]) * catalog.base_price[i];
    }
  }
  return s;
}

PricingState step_shelf_prices(const PricingState& state, const Catalog& catalog, const PriceProcessConfig& cfg,
                               Rng& rng) {
  const std::size_t n = catalog.n_products();
  if (state.size() != n) throw std::invalid_argument("pricing state does not match catalog");
  PricingState next = state;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (state.regime[i] == PriceRegime::Regular) {
      if (u >= cfg.stay_regular) {
        next.regime[i] = PriceRegime::Discount;
        next.depth[i] = draw_discount_depth(cfg, rng);
      }
    } else if (u >= cfg.stay_discount) {
      next.regime[i] = PriceRegime::Regular;
      next.depth[i] = 0.0;
    }
    next.shelf_price[i] = next.regime[i] == PriceRegime::Regular ? catalog.base_price[i]
                                                                 : (1.0 - next.depth[i]) * catalog.base_price[i];
  }
  return next;
}

void to_json(nlohmann::json& j, const Catalog& c) {
  j = {{"category", c.category},
       {"category_offsets", c.category_offsets},
       {"base_price", c.base_price},
       {"unobserved", c.unobserved},
       {"price_factor", c.price_factor},
       {"quantity_intercept", c.quantity_intercept},
       {"category_intercept", c.category_intercept},
       {"category_slope", c.category_slope}};
}

void from_json(const nlohmann::json& j, Catalog& c) {
  j.at("category").get_to(c.category);
  j.at("category_offsets").get_to(c.category_offsets);
  j.at("base_price").get_to(c.base_price);
  j.at("unobserved").get_to(c.unobserved);
  j.at("price_factor").get_to(c.price_factor);
  j.at("quantity_intercept").get_to(c.quantity_intercept);
  j.at("category_intercept").get_to(c.category_intercept);
  j.at("category_slope").get_to(c.category_slope);
  c.validate();
}

void to_json(nlohmann::json& j, const CustomerPopulation& p) {
  j = {{"price_coef", p.price_coef},
       {"feature_coef", p.feature_coef},
       {"unobserved_loading", p.unobserved_loading},
       {"store_intercept", p.store_intercept},
       {"browse_carryover", p.browse_carryover},
       {"marketing_coef", p.marketing_coef},
       {"inertia", p.inertia},
       {"quantity_slope", p.quantity_slope}};
}

void from_json(const nlohmann::json& j, CustomerPopulation& p) {
  j.at("price_coef").get_to(p.price_coef);
  j.at("feature_coef").get_to(p.feature_coef);
  j.at("unobserved_loading").get_to(p.unobserved_loading);
  j.at("store_intercept").get_to(p.store_intercept);
  j.at("browse_carryover").get_to(p.browse_carryover);
  j.at("marketing_coef").get_to(p.marketing_coef);
  j.at("inertia").get_to(p.inertia);
  j.at("quantity_slope").get_to(p.quantity_slope);
  p.validate();
}

void to_json(nlohmann::json& j, const PricingState& s) {
  std::vector<int> regime(s.regime.size());
  std::transform(s.regime.begin(), s.regime.end(), regime.begin(), [](PriceRegime r) { return static_cast<int>(r); });
  j = {{"regime", regime}, {"depth", s.depth}, {"shelf_price", s.shelf_price}};
}

void from_json(const nlohmann::json& j, PricingState& s) {
  const auto regime = j.at("regime").get<std::vector<int>>();
  s.regime.resize(regime.size());
  std::transform(regime.begin(), regime.end(), s.regime.begin(),
                 [](int r) { return r == 0 ? PriceRegime::Regular : PriceRegime::Discount; });
  j.at("depth").get_to(s.depth);
  j.at("shelf_price").get_to(s.shelf_price);
}

namespace {
constexpr int kWorldVersion = 1;
}

void save_world(const std::filesystem::path& path, const Catalog& catalog, const CustomerPopulation& pop,
                std::uint64_t config_hash) {
  const nlohmann::json j = {{"format", "rsim-world"},
                            {"version", kWorldVersion},
                            {"config_hash", hex64(config_hash)},
                            {"catalog", catalog},
                            {"customers", pop}};
  write_file_atomic(path, j.dump());
}

std::pair<Catalog, CustomerPopulation> load_world(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
  if (j.value("format", "") != "rsim-world") throw FormatError(path.string() + " is not a world file");
  if (j.value("version", 0) != kWorldVersion) throw FormatError("unsupported world file version");
  return {j.at("catalog").get<Catalog>(), j.at("customers").get<CustomerPopulation>()};
}

}  // namespace rsim
