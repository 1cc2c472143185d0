#include "rsim/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

namespace rsim {

const std::array<std::string_view, kFeatureCount>& feature_names() noexcept {
  static const std::array<std::string_view, kFeatureCount> names{
      "avg_purchase_price", "avg_redeemed_discount", "time_since_last_visit", "visit_frequency",
      "avg_basket_revenue", "distinct_categories",   "last_coupon",           "shelf_price_index",
      "store_marketing",    "cumulative_quantity"};
  return names;
}

FeatureVector SummaryAccumulator::features() const noexcept {
  FeatureVector f{};
  const auto at = [&f](Feature k) -> double& { return f[static_cast<std::size_t>(k)]; };
  at(Feature::AvgPurchasePrice) = total_quantity > 0.0 ? total_revenue / total_quantity : 0.0;
  at(Feature::AvgRedeemedDiscount) = purchase_steps > 0 ? total_discount / static_cast<double>(purchase_steps) : 0.0;
  at(Feature::TimeSinceLastVisit) = static_cast<double>(steps - last_purchase_step);
  at(Feature::VisitFrequency) = steps > 0 ? static_cast<double>(purchase_steps) / static_cast<double>(steps) : 0.0;
  at(Feature::AvgBasketRevenue) = purchase_steps > 0 ? total_revenue / static_cast<double>(purchase_steps) : 0.0;
  at(Feature::DistinctCategories) = distinct_categories;
  at(Feature::LastCoupon) = last_coupon;
  at(Feature::ShelfPriceIndex) = shelf_index;
  at(Feature::StoreMarketing) = store_marketing;
  at(Feature::CumulativeQuantity) = total_quantity;
  return f;
}

double shelf_price_index(const Catalog& catalog, std::span<const double> shelf_price) {
  if (shelf_price.size() != catalog.n_products()) throw std::invalid_argument("shelf prices do not match catalog");
  double s = 0.0;
  for (std::size_t i = 0; i < shelf_price.size(); ++i) s += shelf_price[i] / catalog.base_price[i];
  return s / static_cast<double>(shelf_price.size());
}

void update_summary(SummaryAccumulator& acc, const Observation& obs, double prev_coupon, const SummaryContext& ctx) {
  const Catalog& catalog = *ctx.catalog;
  const std::size_t words = (catalog.n_categories() + 63) / 64;
  if (acc.categories_seen.size() != words) acc.categories_seen.assign(words, 0);

  if (!ctx.prev_shelf_price.empty()) {
    ++acc.steps;
    acc.last_coupon = prev_coupon;
    if (!obs.last_purchases.empty()) {
      ++acc.purchase_steps;
      acc.last_purchase_step = acc.steps;
      acc.total_discount += prev_coupon;
      for (const auto& line : obs.last_purchases) {
        acc.total_revenue += (1.0 - prev_coupon) * ctx.prev_shelf_price[line.product] * line.quantity;
        acc.total_quantity += line.quantity;
        const std::uint32_t j = catalog.category[line.product];
        const std::uint64_t bit = std::uint64_t{1} << (j % 64);
        if ((acc.categories_seen[j / 64] & bit) == 0) {
          acc.categories_seen[j / 64] |= bit;
          ++acc.distinct_categories;
        }
      }
    }
  }
  acc.shelf_index = ctx.shelf_index;
  acc.store_marketing = obs.store_marketing;
}

BatchSummarizer::BatchSummarizer(const Catalog& catalog, std::size_t n_customers) : catalog_(&catalog) {
  state_.customers.resize(n_customers);
}

BatchSummarizer::BatchSummarizer(const Catalog& catalog, SummarizerState state)
    : catalog_(&catalog), state_(std::move(state)) {}

void BatchSummarizer::observe(const Env& env, std::span<const std::uint32_t> prev_actions) {
  const std::size_t n = state_.customers.size();
  if (env.n_customers() != n) throw std::invalid_argument("summarizer and env disagree on batch size");
  if (state_.started && prev_actions.size() != n) throw std::invalid_argument("need one previous action per customer");
  const auto shelf = env.pricing().shelf_price;
  SummaryContext ctx{catalog_, {}, shelf_price_index(*catalog_, shelf)};
  if (state_.started) ctx.prev_shelf_price = state_.last_shelf_price;
  for (std::size_t u = 0; u < n; ++u) {
    const double coupon = state_.started ? env.coupon(prev_actions[u]) : 0.0;
    update_summary(state_.customers[u], env.observation(u), coupon, ctx);
  }
  state_.last_shelf_price = shelf;
  state_.started = true;
}

void write_summarizer(BinaryWriter& w, const SummarizerState& s) {
  w.put<std::uint8_t>(s.started ? 1 : 0);
  w.put_vector(s.last_shelf_price);
  w.put<std::uint64_t>(s.customers.size());
  for (const auto& a : s.customers) {
    w.put(a.steps);
    w.put(a.purchase_steps);
    w.put(a.last_purchase_step);
    w.put(a.total_revenue);
    w.put(a.total_quantity);
    w.put(a.total_discount);
    w.put_vector(a.categories_seen);
    w.put(a.distinct_categories);
    w.put(a.last_coupon);
    w.put(a.shelf_index);
    w.put(a.store_marketing);
  }
}

SummarizerState read_summarizer(BinaryReader& r) {
  SummarizerState s;
  s.started = r.get<std::uint8_t>() != 0;
  s.last_shelf_price = r.get_vector<double>();
  s.customers.resize(r.get<std::uint64_t>());
  for (auto& a : s.customers) {
    a.steps = r.get<std::uint64_t>();
    a.purchase_steps = r.get<std::uint64_t>();
    a.last_purchase_step = r.get<std::uint64_t>();
    a.total_revenue = r.get<double>();
    a.total_quantity = r.get<double>();
    a.total_discount = r.get<double>();
    a.categories_seen = r.get_vector<std::uint64_t>();
    a.distinct_categories = r.get<std::uint32_t>();
    a.last_coupon = r.get<double>();
    a.shelf_index = r.get<double>();
    a.store_marketing = r.get<double>();
  }
  return s;
}

FeatureSchema FeatureSchema::identity() {
  FeatureSchema s;
  for (auto n : feature_names()) s.names.emplace_back(n);
  s.mean.assign(kFeatureCount, 0.0);
  s.sd.assign(kFeatureCount, 1.0);
  return s;
}

FeatureSchema FeatureSchema::fit(std::span<const double> rows, std::span<const double> rewards) {
  FeatureSchema s = identity();
  const std::size_t d = kFeatureCount;
  if (rows.size() % d != 0) throw std::invalid_argument("feature matrix is not a whole number of rows");
  const std::size_t n = rows.size() / d;
  if (n == 0) return s;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) sum[c] += rows[r * d + c];
  for (std::size_t c = 0; c < d; ++c) s.mean[c] = sum[c] / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double e = rows[r * d + c] - s.mean[c];
      sq[c] += e * e;
    }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(sq[c] / static_cast<double>(n));
    s.sd[c] = sd > 1e-12 ? sd : 1.0;
  }
  if (!rewards.empty()) {
    const double m = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    double v = 0.0;
    for (double x : rewards) v += (x - m) * (x - m);
    const double sd = std::sqrt(v / static_cast<double>(rewards.size()));
    s.reward_scale = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

void FeatureSchema::standardize(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != dim() || out.size() != dim()) throw std::invalid_argument("feature dimension mismatch");
  for (std::size_t c = 0; c < dim(); ++c) {
    if (!std::isfinite(raw[c])) throw std::domain_error("non-finite feature value");
    out[c] = (raw[c] - mean[c]) / sd[c];
  }
}

std::vector<double> FeatureSchema::standardize(std::span<const double> raw) const {
  std::vector<double> out(dim());
  standardize(raw, out);
  return out;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = fnv1a64("rsim-feature-schema");
  for (const auto& n : names) h = fnv1a64(n, fnv1a64("|", h));
  auto mix_doubles = [&h](const std::vector<double>& v) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)), h);
  };
  mix_doubles(mean);
  mix_doubles(sd);
  h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&reward_scale), sizeof reward_scale), h);
  return h;
}

void to_json(nlohmann::json& j, const FeatureSchema& s) {
  j = {{"names", s.names}, {"mean", s.mean}, {"sd", s.sd}, {"reward_scale", s.reward_scale},
       {"hash", hex64(s.hash())}};
}

void from_json(const nlohmann::json& j, FeatureSchema& s) {
  j.at("names").get_to(s.names);
  j.at("mean").get_to(s.mean);
  j.at("sd").get_to(s.sd);
  j.at("reward_scale").get_to(s.reward_scale);
}

void write_schema(BinaryWriter& w, const FeatureSchema& s) {
  w.put<std::uint64_t>(s.names.size());
  for (const auto& n : s.names) w.put_string(n);
  w.put_vector(s.mean);
  w.put_vector(s.sd);
  w.put(s.reward_scale);
}

FeatureSchema read_schema(BinaryReader& r) {
  FeatureSchema s;
  s.names.resize(r.get<std::uint64_t>());
  for (auto& n : s.names) n = r.get_string();
  s.mean = r.get_vector<double>();
  s.sd = r.get_vector<double>();
  s.reward_scale = r.get<double>();
  return s;
}

namespace {

// Standardized copy plus tiny seeded jitter; empty when the input is constant.
std::vector<double> prepare(std::span<const double> v, std::uint64_t seed) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) return {};
  Rng rng(seed);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd + 1e-10 * rng.normal();
  return out;
}

std::size_t count_within(const std::vector<double>& sorted, double centre, double radius) {
  const auto lo = std::upper_bound(sorted.begin(), sorted.end(), centre - radius);
  const auto hi = std::lower_bound(sorted.begin(), sorted.end(), centre + radius);
  return hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
}

}  // namespace

double mutual_information(std::span<const double> x, std::span<const double> y, std::size_t k, std::uint64_t seed) {
  if (x.size() != y.size()) throw std::invalid_argument("mutual information needs paired samples");
  if (k < 1) throw std::invalid_argument("neighbour count must be >= 1");
  const std::size_t n = x.size();
  if (n < k + 2) throw std::invalid_argument("mutual information needs at least k + 2 samples");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::domain_error("non-finite sample");

  const auto xs = prepare(x, derive_seed(seed, Stream::Jitter, 0));
  const auto ys = prepare(y, derive_seed(seed, Stream::Jitter, 1));
  if (xs.empty() || ys.empty()) return 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> x_sorted(n), y_sorted(ys);
  for (std::size_t p = 0; p < n; ++p) x_sorted[p] = xs[order[p]];
  std::sort(y_sorted.begin(), y_sorted.end());

  double acc = 0.0;
  std::priority_queue<double> nearest;
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = order[p];
    nearest = {};
    std::size_t left = p, right = p + 1;
    while (true) {
      const double dl = left > 0 ? xs[i] - x_sorted[left - 1] : INFINITY;
      const double dr = right < n ? x_sorted[right] - xs[i] : INFINITY;
      const bool go_left = dl <= dr;
      const double dx = go_left ? dl : dr;
      if (!std::isfinite(dx)) break;
      if (nearest.size() == k && dx >= nearest.top()) break;
      const std::size_t j = go_left ? order[--left] : order[right++];
      const double d = std::max(dx, std::abs(ys[j] - ys[i]));
      if (nearest.size() < k) {
        nearest.push(d);
      } else if (d < nearest.top()) {
        nearest.pop();
        nearest.push(d);
      }
    }
    const double eps = nearest.top();
    const std::size_t nx = count_within(x_sorted, xs[i], eps) - 1;
    const std::size_t ny = count_within(y_sorted, ys[i], eps) - 1;
    acc += boost::math::digamma(static_cast<double>(nx + 1)) + boost::math::digamma(static_cast<double>(ny + 1));
  }
  const double mi = boost::math::digamma(static_cast<double>(k)) + boost::math::digamma(static_cast<double>(n)) -
                    acc / static_cast<double>(n);
  return std::max(0.0, mi);
}

FeatureRanking rank_features(std::span<const double> rows, std::span<const double> rewards,
                             std::span<const std::string> names, std::size_t k, std::uint64_t seed) {
  const std::size_t d = names.size();
  if (d == 0 || rows.size() != rewards.size() * d) throw std::invalid_argument("feature matrix shape mismatch");
  if (rewards.empty()) throw std::invalid_argument("cannot rank features of an empty dataset");
  const std::size_t n = rewards.size();
  FeatureRanking ranking;
  std::vector<double> column(n);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) column[r] = rows[r * d + c];
    ranking.push_back({names[c], mutual_information(column, rewards, k, seed)});
  }
  std::sort(ranking.begin(), ranking.end(), [](const FeatureScore& a, const FeatureScore& b) {
    return a.score != b.score ? a.score > b.score : a.name < b.name;
  });
  return ranking;
}

std::string ranking_csv(const FeatureRanking& ranking) {
  std::ostringstream out;
  out.precision(17);
  out << "feature,score\n";
  for (const auto& f : ranking) out << f.name << ',' << f.score << '\n';
  return out.str();
}

}  // namespace rsim
