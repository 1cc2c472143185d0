#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "rsim/workflows.hpp"

namespace rsim {

MetricsReport compute_metrics(const std::string& policy, std::span<const EvalRun> runs,
                              std::span<const EvalRun> random_runs) {
  if (runs.empty() || random_runs.empty()) throw std::invalid_argument("metrics need evaluation runs");
  MetricsReport rep;
  rep.policy = policy;
  rep.n_runs = runs.size();
  std::array<std::vector<double>, kMetricCount> values, baseline;
  for (const auto& r : runs) {
    const auto v = r.mean().values();
    for (std::size_t k = 0; k < kMetricCount; ++k) values[k].push_back(v[k]);
  }
  for (const auto& r : random_runs) {
    const auto v = r.mean().values();
    for (std::size_t k = 0; k < kMetricCount; ++k) baseline[k].push_back(v[k]);
  }
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    auto& m = rep.metrics[k];
    m.mean = mean_of(values[k]);
    m.se = standard_error(values[k]);
    const double base = mean_of(baseline[k]);
    if (base == 0.0) {
      rep.degenerate = true;
      m.normalized = m.mean;
      m.normalized_se = m.se;
    } else {
      m.normalized = m.mean / base;
      m.normalized_se = m.se / std::abs(base);
    }
  }
  if (values[0].size() >= 2 && baseline[0].size() >= 2) rep.revenue_p_value = welch_test(values[0], baseline[0]).p_value;
  return rep;
}

std::string metrics_csv(std::span<const MetricsReport> reports) {
  std::ostringstream os;
  os << "policy,metric,mean,se,normalized,normalized_se,n_runs,revenue_p_value,degenerate\n";
  for (const auto& r : reports)
    for (std::size_t k = 0; k < kMetricCount; ++k) {
      const auto& m = r.metrics[k];
      os << csv_field(r.policy) << ',' << metric_names()[k] << ',' << format_double(m.mean) << ','
         << format_double(m.se) << ',' << format_double(m.normalized) << ',' << format_double(m.normalized_se) << ','
         << r.n_runs << ',' << format_double(r.revenue_p_value) << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
  return os.str();
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json{{"policy", r.policy},
                     {"n_runs", r.n_runs},
                     {"revenue_p_value", r.revenue_p_value},
                     {"degenerate", r.degenerate}};
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    const auto& m = r.metrics[k];
    j["metrics"][metric_names()[k]] = {
        {"mean", m.mean}, {"se", m.se}, {"normalized", m.normalized}, {"normalized_se", m.normalized_se}};
  }
}

void to_json(nlohmann::json& j, const EvalRun& r) {
  j = nlohmann::json{{"policy", r.policy},
                     {"seed", r.seed},
                     {"n_actions", r.n_actions},
                     {"total_reward", r.total_reward},
                     {"customer_revenue", r.customer_revenue},
                     {"action_counts", r.action_counts}};
  auto& eps = j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    nlohmann::json x;
    const auto v = e.values();
    for (std::size_t k = 0; k < kMetricCount; ++k) x[metric_names()[k]] = v[k];
    eps.push_back(std::move(x));
  }
}

void from_json(const nlohmann::json& j, EvalRun& r) {
  r.policy = j.at("policy").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.n_actions = j.at("n_actions").get<std::size_t>();
  r.total_reward = j.at("total_reward").get<double>();
  r.customer_revenue = j.at("customer_revenue").get<std::vector<double>>();
  r.action_counts = j.at("action_counts").get<std::vector<std::uint32_t>>();
  r.episodes.clear();
  for (const auto& x : j.at("episodes")) {
    EpisodeMetrics e;
    e.revenue = x.at("revenue").get<double>();
    e.demand = x.at("demand").get<double>();
    e.retention = x.at("retention").get<double>();
    e.penetration = x.at("penetration").get<double>();
    e.discount = x.at("discount").get<double>();
    r.episodes.push_back(e);
  }
}

std::vector<std::uint8_t> price_sensitive_mask(std::span<const double> c, double* median, bool* degenerate) {
  if (c.empty()) throw std::invalid_argument("segmentation of an empty population");
  std::vector<double> sorted(c.begin(), c.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double med = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (median != nullptr) *median = med;
  if (degenerate != nullptr) *degenerate = sorted.front() == sorted.back();
  std::vector<std::uint8_t> mask(n);
  for (std::size_t u = 0; u < n; ++u) mask[u] = c[u] <= med ? 1 : 0;
  return mask;
}

SegmentReport segment_analysis(const std::string& policy, const World& world, std::span<const EvalRun> runs,
                               const OfflineDataset& ds) {
  if (runs.empty()) throw std::invalid_argument("segment analysis needs evaluation runs");
  const std::size_t n = ds.n_customers();
  const std::size_t n_actions = ds.n_actions();
  if (world.customers->size() < n) throw std::invalid_argument("population smaller than dataset");
  const auto coef = mean_price_coefficients(*world.catalog, world.customers->slice(0, n));

  SegmentReport rep;
  rep.policy = policy;
  const auto mask = price_sensitive_mask(coef, &rep.median_coefficient, &rep.degenerate);

  std::array<SegmentStats*, 2> seg{&rep.insensitive, &rep.sensitive};
  std::array<double, 2> revenue{}, episodes{};
  std::array<std::vector<double>, 2> counts, reward_sum, reward_n;
  for (std::size_t s = 0; s < 2; ++s) {
    counts[s].assign(n_actions, 0.0);
    reward_sum[s].assign(n_actions, 0.0);
    reward_n[s].assign(n_actions, 0.0);
  }
  for (std::size_t u = 0; u < n; ++u) ++seg[mask[u]]->n_customers;
  for (const auto& run : runs) {
    if (run.customer_revenue.size() != n || run.action_counts.size() != n * n_actions)
      throw std::invalid_argument("evaluation run does not match the dataset");
    for (std::size_t u = 0; u < n; ++u) {
      const auto s = mask[u];
      revenue[s] += run.customer_revenue[u];
      episodes[s] += static_cast<double>(run.episodes.size());
      for (std::size_t a = 0; a < n_actions; ++a) counts[s][a] += run.action_counts[u * n_actions + a];
    }
  }
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t t = 0; t < ds.horizon(); ++t) {
      const auto a = ds.action(u, t);
      reward_sum[mask[u]][a] += ds.reward(u, t);
      reward_n[mask[u]][a] += 1.0;
    }
  for (std::size_t s = 0; s < 2; ++s) {
    SegmentStats& st = *seg[s];
    st.mean_revenue = episodes[s] > 0.0 ? revenue[s] / episodes[s] : 0.0;
    double total = 0.0;
    for (double c : counts[s]) total += c;
    st.action_frequency.resize(n_actions);
    st.offline_reward.resize(n_actions);
    st.mean_coupon = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      st.action_frequency[a] = total > 0.0 ? counts[s][a] / total : 0.0;
      st.mean_coupon += st.action_frequency[a] * ds.config.coupon_grid[a];
      st.offline_reward[a] = reward_n[s][a] > 0.0 ? reward_sum[s][a] / reward_n[s][a] : 0.0;
    }
  }
  return rep;
}

std::string segment_csv(std::span<const SegmentReport> reports, std::span<const double> grid) {
  std::ostringstream os;
  os << "policy,segment,n_customers,mean_revenue,mean_coupon,offer,action_frequency,offline_reward\n";
  for (const auto& r : reports) {
    for (const auto* s : {&r.sensitive, &r.insensitive}) {
      const char* name = s == &r.sensitive ? "price_sensitive" : "price_insensitive";
      for (std::size_t a = 0; a < s->action_frequency.size(); ++a)
        os << csv_field(r.policy) << ',' << name << ',' << s->n_customers << ',' << format_double(s->mean_revenue)
           << ',' << format_double(s->mean_coupon) << ',' << format_double(a < grid.size() ? grid[a] : 0.0) << ','
           << format_double(s->action_frequency[a]) << ',' << format_double(s->offline_reward[a]) << '\n';
    }
  }
  return os.str();
}

void to_json(nlohmann::json& j, const SegmentReport& r) {
  const auto seg = [](const SegmentStats& s) {
    return nlohmann::json{{"n_customers", s.n_customers},
                          {"mean_revenue", s.mean_revenue},
                          {"mean_coupon", s.mean_coupon},
                          {"action_frequency", s.action_frequency},
                          {"offline_reward", s.offline_reward}};
  };
  j = nlohmann::json{{"policy", r.policy},
                     {"median_coefficient", r.median_coefficient},
                     {"degenerate", r.degenerate},
                     {"price_sensitive", seg(r.sensitive)},
                     {"price_insensitive", seg(r.insensitive)}};
}

}  // namespace rsim
