#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rsim/parallel.hpp"
#include "rsim/workflows.hpp"

namespace rsim {

namespace {

bool is_neural(PolicyKind k) { return k == PolicyKind::NeuralBoltzmann || k == PolicyKind::Dqn; }
bool is_linear(PolicyKind k) { return k == PolicyKind::LinTS || k == PolicyKind::LinUCB; }

// Per-customer accumulators for one evaluation episode.
struct CustomerTally {
  double revenue = 0.0;
  double demand = 0.0;
  bool visited = false;
  std::uint32_t categories = 0;
  double discount = 0.0;
  std::uint32_t purchase_periods = 0;
};

struct EpisodeSums {
  double revenue = 0.0, demand = 0.0, retention = 0.0, penetration = 0.0, discount = 0.0, reward = 0.0;
};

}  // namespace

const std::array<std::string, kMetricCount>& metric_names() {
  static const std::array<std::string, kMetricCount> names{"revenue", "demand", "retention", "penetration", "discount"};
  return names;
}

EpisodeMetrics EvalRun::mean() const {
  EpisodeMetrics m;
  if (episodes.empty()) return m;
  for (const auto& e : episodes) {
    m.revenue += e.revenue;
    m.demand += e.demand;
    m.retention += e.retention;
    m.penetration += e.penetration;
    m.discount += e.discount;
  }
  const double n = static_cast<double>(episodes.size());
  m.revenue /= n;
  m.demand /= n;
  m.retention /= n;
  m.penetration /= n;
  m.discount /= n;
  return m;
}

std::unique_ptr<Policy> train_policy(const PolicySpec& spec_in, const OfflineDataset& ds, const TrainOptions& opt,
                                     std::uint64_t seed, TrainLog* log, std::span<const std::size_t> subset) {
  PolicySpec spec = spec_in;
  spec.feature_dim = ds.schema.dim();
  spec.n_actions = ds.n_actions();
  if (is_neural(spec.kind)) spec.reward_scale = ds.schema.reward_scale;
  auto policy = make_policy(spec, derive_seed(seed, Stream::Training));
  TrainLog local;
  TrainLog& out = log != nullptr ? *log : local;
  out = {};
  if (!spec.trainable()) return policy;

  std::vector<std::size_t> pool;
  if (subset.empty()) {
    pool.resize(ds.n_customers());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  } else {
    pool.assign(subset.begin(), subset.end());
    for (auto u : pool)
      if (u >= ds.n_customers()) throw std::out_of_range("training subset names an unknown customer");
  }
  if (pool.empty()) throw std::invalid_argument("empty training pool");
  Rng rng(derive_seed(seed, Stream::Subsample));

  if (is_linear(spec.kind)) {
    for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
    const std::size_t parts = std::clamp<std::size_t>(opt.linear_updates, 1, pool.size());
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t begin = pool.size() * p / parts;
      const std::size_t end = pool.size() * (p + 1) / parts;
      const auto batch = make_transitions(ds, std::span(pool).subspan(begin, end - begin), false);
      out.losses.push_back(policy->update(batch));
      ++out.epochs;
    }
    return policy;
  }

  const bool with_next = spec.kind == PolicyKind::Dqn;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> picks(std::max<std::size_t>(1, opt.customers_per_epoch));
  for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
    for (auto& u : picks) u = pool[rng.below(pool.size())];
    const double loss = policy->update(make_transitions(ds, picks, with_next));
    out.losses.push_back(loss);
    ++out.epochs;
    if (loss < best) {
      best = loss;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      out.early_stopped = true;
      break;
    }
  }
  return policy;
}

EvalRun evaluate_policy(const Policy& policy, const OfflineDataset& ds, const World& world, const EvalOptions& opt,
                        std::uint64_t seed, std::span<const std::size_t> batches_in) {
  if (policy.spec().n_actions != ds.n_actions()) throw std::invalid_argument("policy and dataset action grids differ");
  if (policy.spec().trainable() && policy.spec().feature_dim != ds.schema.dim())
    throw SchemaMismatch("policy feature dimension differs from the dataset schema");
  if (opt.n_eval == 0 || opt.t_eval == 0) throw std::invalid_argument("evaluation needs episodes and steps");
  const std::size_t B = ds.batch_size();
  const std::size_t T = ds.horizon();
  const std::size_t n_actions = ds.n_actions();
  if (T + 1 + opt.t_eval > world.cfg->max_steps + 1)
    throw HorizonError("evaluation would run past the configured max_steps");

  std::vector<std::size_t> batches(batches_in.begin(), batches_in.end());
  if (batches.empty()) {
    batches.resize(ds.batches.size());
    std::iota(batches.begin(), batches.end(), std::size_t{0});
  }

  EvalRun run;
  run.policy = std::string(policy_kind_name(policy.spec().kind));
  run.seed = seed;
  run.n_actions = n_actions;
  run.customer_revenue.assign(ds.n_customers(), 0.0);
  run.action_counts.assign(ds.n_customers() * n_actions, 0);

  std::vector<EpisodeSums> sums(batches.size() * opt.n_eval);
  const std::size_t words = (world.catalog->n_categories() + 63) / 64;

  parallel_for(batches.size(), opt.jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> raw(kFeatureCount), x(ds.schema.dim());
    std::vector<std::uint32_t> actions(B);
    std::vector<CustomerTally> tally(B);
    std::vector<std::uint64_t> seen(B * words);
    for (std::size_t bi = begin; bi < end; ++bi) {
      const std::size_t b = batches[bi];
      const BatchRecord& rec = ds.batches.at(b);
      const std::size_t offset = rec.customer_offset;
      const auto pop = std::make_shared<const CustomerPopulation>(world.customers->slice(offset, B));
      Env env(world.cfg, world.catalog, pop, offset);
      for (std::size_t e = 0; e < opt.n_eval; ++e) {
        env.restore(rec.snapshot);
        if (env.t() != T + 1) throw std::logic_error("restored snapshot does not sit at step T + 1");
        env.reseed(derive_seed(seed, Stream::Evaluation, e, b));
        BatchSummarizer summary(*world.catalog, rec.summary);
        std::fill(tally.begin(), tally.end(), CustomerTally{});
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t k = 0; k < opt.t_eval; ++k) {
          for (std::size_t u = 0; u < B; ++u) {
            const auto f = summary.features(u);
            ds.schema.standardize(f, x);
            Rng rng(derive_seed(seed, Stream::Policy, e, offset + u, k));
            const auto a = policy.act(x, rng);
            if (a >= n_actions) throw std::logic_error("policy chose an action outside the grid");
            actions[u] = a;
            ++run.action_counts[(offset + u) * n_actions + a];
          }
          const auto res = env.step(actions);
          for (std::size_t u = 0; u < B; ++u) {
            const auto& o = res.outcomes[u];
            auto& c = tally[u];
            c.revenue += res.rewards[u];
            c.visited = c.visited || o.visited;
            if (!o.lines.empty()) {
              ++c.purchase_periods;
              c.discount += o.redeemed_discount;
            }
            for (const auto& line : o.lines) {
              c.demand += line.quantity;
              const std::uint64_t bit = std::uint64_t{1} << (line.category % 64);
              auto& word = seen[u * words + line.category / 64];
              if ((word & bit) == 0) {
                word |= bit;
                ++c.categories;
              }
            }
          }
          summary.observe(env, actions);
        }
        EpisodeSums& s = sums[bi * opt.n_eval + e];
        for (std::size_t u = 0; u < B; ++u) {
          const auto& c = tally[u];
          s.revenue += c.revenue;
          s.demand += c.demand;
          s.retention += c.visited ? 1.0 : 0.0;
          s.penetration += c.categories;
          s.discount += c.purchase_periods > 0 ? c.discount / c.purchase_periods : 0.0;
          s.reward += c.revenue;
          run.customer_revenue[offset + u] += c.revenue;
        }
      }
    }
  });

  const double n_cust = static_cast<double>(batches.size() * B);
  run.episodes.resize(opt.n_eval);
  for (std::size_t e = 0; e < opt.n_eval; ++e) {
    EpisodeSums tot;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& s = sums[bi * opt.n_eval + e];
      tot.revenue += s.revenue;
      tot.demand += s.demand;
      tot.retention += s.retention;
      tot.penetration += s.penetration;
      tot.discount += s.discount;
      run.total_reward += s.reward;
    }
    run.episodes[e] = {tot.revenue / n_cust, tot.demand / n_cust, tot.retention / n_cust, tot.penetration / n_cust,
                       tot.discount / n_cust};
  }
  return run;
}

std::vector<AgentRun> train_and_eval(const PolicySpec& spec, const OfflineDataset& ds, const World& world,
                                     const TrainOptions& train, const EvalOptions& eval, std::size_t n_agent,
                                     std::uint64_t seed, std::span<const std::size_t> subset, std::size_t jobs) {
  if (n_agent == 0) throw std::invalid_argument("need at least one agent");
  std::vector<AgentRun> runs(n_agent);
  EvalOptions inner = eval;
  inner.jobs = jobs > n_agent ? jobs / n_agent : 1;
  parallel_for(n_agent, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      runs[r].train_seed = derive_seed(seed, Stream::Training, r);
      const auto policy = train_policy(spec, ds, train, runs[r].train_seed, &runs[r].train, subset);
      runs[r].eval = evaluate_policy(*policy, ds, world, inner, derive_seed(seed, Stream::Evaluation, r));
    }
  });
  return runs;
}

std::vector<SizeReport> sensitivity_sweep(const PolicySpec& spec, const OfflineDataset& ds, const World& world,
                                          std::span<const std::size_t> sizes, const TrainOptions& train,
                                          const EvalOptions& eval, std::size_t n_agent, std::uint64_t seed,
                                          std::size_t jobs) {
  const std::size_t n = ds.n_customers();
  for (auto s : sizes)
    if (s == 0 || s > n) throw std::invalid_argument("subsample size must lie in [1, dataset customers]");
  PolicySpec random_spec = PolicySpec::defaults(PolicyKind::Random, ds.n_actions(), ds.schema.dim());
  const auto random_runs = train_and_eval(random_spec, ds, world, train, eval, n_agent, seed, {}, jobs);
  std::vector<EvalRun> random_evals;
  for (const auto& r : random_runs) random_evals.push_back(r.eval);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(seed, Stream::Subsample));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<SizeReport> out;
  for (auto s : sizes) {
    std::vector<std::size_t> subset;
    if (s < n) {
      subset.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(s));
      std::sort(subset.begin(), subset.end());
    }
    const auto runs = train_and_eval(spec, ds, world, train, eval, n_agent, seed, subset, jobs);
    std::vector<EvalRun> evals;
    for (const auto& r : runs) evals.push_back(r.eval);
    out.push_back({s, compute_metrics(std::string(policy_kind_name(spec.kind)), evals, random_evals)});
  }
  return out;
}

}  // namespace rsim
