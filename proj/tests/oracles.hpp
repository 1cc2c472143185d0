#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the kernels under test.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "rsim/catalog.hpp"
#include "rsim/choice.hpp"

namespace oracle {

/// Two categories with two products each.
inline rsim::Catalog tiny_catalog() {
  rsim::Catalog c;
  c.category = {0, 0, 1, 1};
  c.category_offsets = {0, 2, 4};
  c.base_price = {2.0, 3.0, 1.5, 4.0};
  c.unobserved = {0.3, -0.2, 0.5, 0.1};
  c.price_factor = {1.0, 0.9, 1.1, 1.2};
  c.quantity_intercept = {-0.2, 0.1, 0.3, -0.5};
  c.category_intercept = {-0.5, 0.2};
  c.category_slope = {0.6, 0.4};
  return c;
}

inline rsim::CustomerParams tiny_customer() {
  rsim::CustomerParams p;
  p.price_coef = -0.8;
  p.feature_coef = 0.5;
  p.unobserved_loading = 0.4;
  p.store_intercept = -0.3;
  p.browse_carryover = 0.2;
  p.marketing_coef = 0.5;
  p.inertia = 0.4;
  p.quantity_slope = 0.25;
  return p;
}

inline constexpr std::uint32_t kTinyCap = 3;

/// 0 = no visit; otherwise 1 + sum_j code_j * 7^j with code 0 for no purchase
/// in category j and 1 + local_product * 3 + (quantity - 1) otherwise.
inline int outcome_key(const rsim::PurchaseOutcome& o, const rsim::Catalog& c) {
  if (!o.visited) return 0;
  int key = 0;
  int base = 1;
  std::array<int, 2> code{0, 0};
  for (const auto& l : o.lines) {
    const int local = static_cast<int>(l.product - c.category_offsets[l.category]);
    code[l.category] = 1 + local * 3 + static_cast<int>(l.quantity) - 1;
  }
  for (int j = 0; j < 2; ++j) {
    key += code[j] * base;
    base *= 7;
  }
  return 1 + key;
}

/// Exact law of one step for a customer whose lagged state is fixed.
inline std::map<int, double> enumerate_tiny(const rsim::Catalog& c, const rsim::CustomerParams& cu,
                                            const rsim::CustomerState& state, std::span<const double> shelf,
                                            std::span<const double> marketing, double coupon, double store_marketing,
                                            std::size_t t) {
  const auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double p_visit = 1.0;
  if (t > 1) {
    const double mu = cu.store_intercept + (state.visited_prev ? cu.browse_carryover * state.store_score_prev : 0.0) +
                      cu.marketing_coef * store_marketing;
    p_visit = (1.0 - cu.inertia) * sig(mu) + cu.inertia * state.visit_prob_prev;
  }
  std::array<double, 4> util{};
  for (int i = 0; i < 4; ++i) {
    const double price = (1.0 - coupon) * shelf[i];
    util[i] = cu.feature_coef * marketing[i] + cu.unobserved_loading * c.unobserved[i] +
              cu.price_coef * c.price_factor[i] * std::log(price);
  }
  // Per category: probability of each code 0..6.
  std::array<std::array<double, 7>, 2> cat{};
  for (int j = 0; j < 2; ++j) {
    const double a = util[2 * j], b = util[2 * j + 1];
    const double cv = std::log(std::exp(a) + std::exp(b));
    const double buy = sig(c.category_intercept[j] + c.category_slope[j] * cv);
    cat[j][0] = 1.0 - buy;
    for (int k = 0; k < 2; ++k) {
      const int i = 2 * j + k;
      const double choose = std::exp(util[i] - cv);
      const double lambda = std::exp(c.quantity_intercept[i] + cu.quantity_slope * util[i]);
      const double q1 = std::exp(-lambda);
      const double q2 = lambda * std::exp(-lambda);
      const double q3 = 1.0 - q1 - q2;
      cat[j][1 + k * 3 + 0] = buy * choose * q1;
      cat[j][1 + k * 3 + 1] = buy * choose * q2;
      cat[j][1 + k * 3 + 2] = buy * choose * q3;
    }
  }
  std::map<int, double> law;
  law[0] = 1.0 - p_visit;
  for (int a = 0; a < 7; ++a)
    for (int b = 0; b < 7; ++b) law[1 + a + 7 * b] += p_visit * cat[0][a] * cat[1][b];
  return law;
}

/// Two-state deterministic chain: action a moves to state a.
struct Chain {
  std::array<std::array<double, 2>, 2> reward{{{0.0, 1.0}, {2.0, 0.5}}};
  double discount = 0.5;
};

inline std::array<std::array<double, 2>, 2> value_iteration(const Chain& m, int iterations = 2000) {
  std::array<std::array<double, 2>, 2> q{};
  for (int it = 0; it < iterations; ++it) {
    auto next = q;
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) next[s][a] = m.reward[s][a] + m.discount * std::max(q[a][0], q[a][1]);
    q = next;
  }
  return q;
}

/// (I + X^T X)^{-1} X^T y with explicit inversion.
inline Eigen::VectorXd ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto d = x.cols();
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) + x.transpose() * x;
  return a.inverse() * (x.transpose() * y);
}

}  // namespace oracle
