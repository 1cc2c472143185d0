#pragma once

// Four-stage customer decision model: store visit, category purchase,
// product choice within a category, and purchase quantity.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rsim/catalog.hpp"
#include "rsim/rng.hpp"

namespace rsim {

struct PurchaseLine {
  std::uint32_t product = 0;
  std::uint32_t quantity = 0;
  friend bool operator==(const PurchaseLine&, const PurchaseLine&) = default;
};

/// Lagged per-customer state carried between steps.
struct CustomerState {
  bool visited_prev = false;
  double visit_prob_prev = 1.0;
  double store_score_prev = 0.0;
  std::vector<PurchaseLine> last_purchases;  // Q_{t-1}, sparse

  friend bool operator==(const CustomerState&, const CustomerState&) = default;
};

struct OutcomeLine {
  std::uint32_t product = 0;
  std::uint32_t category = 0;
  std::uint32_t quantity = 0;
  double unit_price = 0.0;
  friend bool operator==(const OutcomeLine&, const OutcomeLine&) = default;
};

struct PurchaseOutcome {
  bool visited = false;
  double visit_prob = 0.0;
  std::vector<OutcomeLine> lines;  // one per purchased category, category order
  double revenue = 0.0;
  double redeemed_discount = 0.0;  // coupon fraction when anything was bought

  std::uint64_t total_quantity() const noexcept;
  friend bool operator==(const PurchaseOutcome&, const PurchaseOutcome&) = default;
};

/// Product-side terms shared by every customer within one step.
struct ProductTerms {
  std::vector<double> marketing;           // X_it
  std::vector<double> shelf_price;         // P_it^shelf
  std::vector<double> weighted_log_price;  // beta_i^w * log(P_it^shelf)

  static ProductTerms build(const Catalog& catalog, std::span<const double> shelf_price,
                            std::span<const double> marketing);
};

struct ChoiceOptions {
  double max_lambda = 1000.0;
  std::uint32_t quantity_cap = 0;  // 0: no truncation
};

/// Scratch buffers reused across calls by one worker.
struct ChoiceWorkspace {
  std::vector<double> utilities;
  std::vector<double> category_scores;
};

double sigmoid(double x) noexcept;

/// beta_u^x * X + beta_u^z * Z_i + beta_u^w * beta_i^w * log(price).
/// Throws std::domain_error for a non-positive price.
double product_utility(const CustomerParams& customer, const Catalog& catalog, std::size_t product,
                       double marketing, double effective_price);

/// log-sum-exp of the utilities in one category. Throws on empty input.
double category_score(std::span<const double> utilities);

/// log-sum-exp of the category scores. Throws on empty input.
double store_score(std::span<const double> category_scores);

/// Autoregressive visit probability. Returns exactly 1 at t = 1.
/// Throws std::domain_error when inertia is outside [0,1] or t == 0.
double store_visit_prob(bool visited_prev, double visit_prob_prev, double store_score_prev, double intercept,
                        double carryover, double marketing_coef, double inertia, double store_marketing,
                        std::size_t t);

double store_visit_prob(const CustomerState& state, const CustomerParams& customer, double store_marketing,
                        std::size_t t);

double category_purchase_prob(double intercept, double slope, double category_score) noexcept;

/// Multinomial-logit probabilities within a category.
void product_choice_probs(std::span<const double> utilities, std::span<double> out);
std::vector<double> product_choice_probs(std::span<const double> utilities);

/// Poisson mean of the quantity model, capped at max_lambda.
double quantity_rate(double intercept, double slope, double utility, double max_lambda) noexcept;

/// 1 + Poisson(lambda), truncated at cap when cap > 0.
std::uint32_t sample_quantity(double intercept, double slope, double utility, Rng& rng,
                              const ChoiceOptions& options = {});

struct CustomerStepResult {
  PurchaseOutcome outcome;
  CustomerState next;
};

/// Samples visit, then each category, then the product, then the quantity.
/// The coupon is always redeemed and lowers every effective price.
CustomerStepResult simulate_customer_step(const Catalog& catalog, const ProductTerms& terms,
                                          const CustomerParams& customer, const CustomerState& state,
                                          double coupon, double store_marketing, std::size_t t,
                                          const ChoiceOptions& options, Rng& rng, ChoiceWorkspace& ws);

}  // namespace rsim
