#include "rsim/choice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "rsim/kernels.hpp"

namespace rsim {

namespace {

void warn_lambda_capped(double lambda, double cap) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::cerr << "warning: quantity rate " << lambda << " capped at " << cap << " (further warnings suppressed)\n";
}

}  // namespace

std::uint64_t PurchaseOutcome::total_quantity() const noexcept {
  std::uint64_t q = 0;
  for (const auto& l : lines) q += l.quantity;
  return q;
}

ProductTerms ProductTerms::build(const Catalog& catalog, std::span<const double> shelf_price,
                                 std::span<const double> marketing) {
  const std::size_t n = catalog.n_products();
  if (shelf_price.size() != n || marketing.size() != n)
    throw std::invalid_argument("product terms do not match catalog size");
  ProductTerms t;
  t.marketing.assign(marketing.begin(), marketing.end());
  t.shelf_price.assign(shelf_price.begin(), shelf_price.end());
  t.weighted_log_price.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(shelf_price[i] > 0.0)) throw std::domain_error("shelf prices must be positive");
    t.weighted_log_price[i] = catalog.price_factor[i] * std::log(shelf_price[i]);
  }
  return t;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double product_utility(const CustomerParams& customer, const Catalog& catalog, std::size_t product,
                       double marketing, double effective_price) {
  if (!(effective_price > 0.0)) throw std::domain_error("effective price must be positive");
  return customer.feature_coef * marketing + customer.unobserved_loading * catalog.unobserved[product] +
         customer.price_coef * catalog.price_factor[product] * std::log(effective_price);
}

double category_score(std::span<const double> utilities) {
  if (utilities.empty()) throw std::invalid_argument("category score of an empty category");
  return kernels::logsumexp(utilities);
}

double store_score(std::span<const double> category_scores) {
  if (category_scores.empty()) throw std::invalid_argument("store score needs at least one category");
  return kernels::logsumexp(category_scores);
}

double store_visit_prob(bool visited_prev, double visit_prob_prev, double store_score_prev, double intercept,
                        double carryover, double marketing_coef, double inertia, double store_marketing,
                        std::size_t t) {
  if (!(inertia >= 0.0 && inertia <= 1.0)) throw std::domain_error("inertia must lie in [0,1]");
  if (t == 0) throw std::domain_error("time steps start at 1");
  if (t == 1) return 1.0;
  const double mu = intercept + (visited_prev ? carryover * store_score_prev : 0.0) + marketing_coef * store_marketing;
  const double p = (1.0 - inertia) * sigmoid(mu) + inertia * visit_prob_prev;
  return std::clamp(p, 0.0, 1.0);
}

double store_visit_prob(const CustomerState& state, const CustomerParams& customer, double store_marketing,
                        std::size_t t) {
  return store_visit_prob(state.visited_prev, state.visit_prob_prev, state.store_score_prev, customer.store_intercept,
                          customer.browse_carryover, customer.marketing_coef, customer.inertia, store_marketing, t);
}

double category_purchase_prob(double intercept, double slope, double category_score) noexcept {
  return sigmoid(intercept + slope * category_score);
}

void product_choice_probs(std::span<const double> utilities, std::span<double> out) {
  if (utilities.empty()) throw std::invalid_argument("product choice over an empty category");
  kernels::softmax(utilities, out);
}

std::vector<double> product_choice_probs(std::span<const double> utilities) {
  std::vector<double> out(utilities.size());
  product_choice_probs(utilities, out);
  return out;
}

double quantity_rate(double intercept, double slope, double utility, double max_lambda) noexcept {
  const double lambda = std::exp(intercept + slope * utility);
  if (!(lambda <= max_lambda)) {
    warn_lambda_capped(lambda, max_lambda);
    return max_lambda;
  }
  return lambda;
}

std::uint32_t sample_quantity(double intercept, double slope, double utility, Rng& rng,
                              const ChoiceOptions& options) {
  const double lambda = quantity_rate(intercept, slope, utility, options.max_lambda);
  auto q = static_cast<std::uint32_t>(1 + rng.poisson(lambda));
  if (options.quantity_cap > 0 && q > options.quantity_cap) q = options.quantity_cap;
  return q;
}

CustomerStepResult simulate_customer_step(const Catalog& catalog, const ProductTerms& terms,
                                          const CustomerParams& customer, const CustomerState& state,
                                          double coupon, double store_marketing, std::size_t t,
                                          const ChoiceOptions& options, Rng& rng, ChoiceWorkspace& ws) {
  if (!(coupon >= 0.0 && coupon < 1.0)) throw std::domain_error("coupon fraction must lie in [0,1)");
  const std::size_t n = catalog.n_products();
  const std::size_t m = catalog.n_categories();

  CustomerStepResult r;
  r.outcome.visit_prob = store_visit_prob(state, customer, store_marketing, t);
  r.outcome.visited = rng.uniform() < r.outcome.visit_prob;
  r.next.visit_prob_prev = r.outcome.visit_prob;
  r.next.visited_prev = r.outcome.visited;
  if (!r.outcome.visited) return r;

  ws.utilities.resize(n);
  ws.category_scores.resize(m);
  const double log_coupon = std::log1p(-coupon);
  kernels::utilities(terms.marketing, catalog.unobserved, terms.weighted_log_price, catalog.price_factor,
                     customer.feature_coef, customer.unobserved_loading, customer.price_coef, log_coupon,
                     ws.utilities);
  kernels::segment_logsumexp(ws.utilities, catalog.category_offsets, ws.category_scores);
  r.next.store_score_prev = kernels::logsumexp(ws.category_scores);

  const double price_scale = 1.0 - coupon;
  for (std::size_t j = 0; j < m; ++j) {
    const double cv = ws.category_scores[j];
    if (!(rng.uniform() < category_purchase_prob(catalog.category_intercept[j], catalog.category_slope[j], cv)))
      continue;
    const std::uint32_t first = catalog.category_offsets[j];
    const std::uint32_t last = catalog.category_offsets[j + 1];
    const double u = rng.uniform();
    double cum = 0.0;
    std::uint32_t chosen = last - 1;
    for (std::uint32_t i = first; i < last; ++i) {
      cum += std::exp(ws.utilities[i] - cv);
      if (u < cum) {
        chosen = i;
        break;
      }
    }
    const std::uint32_t q = sample_quantity(catalog.quantity_intercept[chosen], customer.quantity_slope,
                                            ws.utilities[chosen], rng, options);
    const double price = price_scale * terms.shelf_price[chosen];
    r.outcome.lines.push_back({chosen, static_cast<std::uint32_t>(j), q, price});
    r.outcome.revenue += price * q;
    r.next.last_purchases.push_back({chosen, q});
  }
  if (!r.outcome.lines.empty()) r.outcome.redeemed_discount = coupon;
  return r;
}

}  // namespace rsim
