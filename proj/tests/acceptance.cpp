// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rsim/agents.hpp"
#include "rsim/env.hpp"
#include "rsim/kernels.hpp"
#include "rsim/nn.hpp"
#include "rsim/parallel.hpp"
#include "rsim/workflows.hpp"

using namespace rsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Static coupon trade-off.
Outcome static_tradeoff() {
  SweepOptions opt;
  opt.levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  opt.n_sims = 100;
  opt.n_customers = 100;
  opt.horizon = 70;
  opt.window = 20;
  opt.seed = 2024;
  opt.jobs = default_jobs();
  const auto r = static_sweep(SimConfig{}, opt);
  const auto& lo = r.levels.front();
  const auto& hi = r.levels.back();
  const auto rev = welch_test(lo.revenue, hi.revenue);
  const auto ret = welch_test(hi.retention, lo.retention);
  const bool rev_ok = mean_of(lo.revenue) > mean_of(hi.revenue) && rev.p_value < 0.05;
  const bool ret_ok = mean_of(hi.retention) > mean_of(lo.retention) && ret.p_value < 0.05;
  int inversions = 0;
  bool small = true;
  for (std::size_t l = 0; l + 1 < r.levels.size(); ++l) {
    const double a = mean_of(r.levels[l].retention), b = mean_of(r.levels[l + 1].retention);
    if (b < a) {
      ++inversions;
      const double se = std::hypot(standard_error(r.levels[l].retention), standard_error(r.levels[l + 1].retention));
      small = small && (a - b) <= se;
    }
  }
  const bool mono_ok = inversions <= 1 && small;
  std::string retention;
  for (const auto& lv : r.levels) retention += fmt("%.4f ", mean_of(lv.retention));
  return {rev_ok && ret_ok && mono_ok,
          fmt("revenue 0%%=%.2f 50%%=%.2f p=%.2g; retention 0%%=%.4f 50%%=%.4f p=%.2g; by level [%s] inversions=%d",
              mean_of(lo.revenue), mean_of(hi.revenue), rev.p_value, mean_of(lo.retention), mean_of(hi.retention),
              ret.p_value, retention.c_str(), inversions)};
}

// 2 and 3 share one experiment.
struct LearnedExperiment {
  std::map<std::string, MetricsReport> reports;
  std::map<std::string, std::vector<EvalRun>> runs;
  std::vector<std::string> statics;
  OfflineDataset ds;
  World world;
};

LearnedExperiment run_learned() {
  LearnedExperiment x;
  SimConfig cfg;
  CollectOptions co;
  co.batch_size = 100;
  co.n_batches = 100;
  co.horizon = 50;
  co.seed = 31;
  co.jobs = default_jobs();
  x.ds = collect_offline(cfg, co);
  x.world = dataset_world(x.ds);
  TrainOptions tr;
  EvalOptions ev;
  ev.n_eval = 5;
  ev.t_eval = 20;
  const std::size_t n_agent = 10;
  const std::uint64_t seed = 77;
  const std::size_t n_actions = x.ds.n_actions(), dim = x.ds.schema.dim();

  const auto collect = [&](const std::string& name, const PolicySpec& spec) {
    const auto runs = train_and_eval(spec, x.ds, x.world, tr, ev, n_agent, seed, {}, default_jobs());
    for (const auto& r : runs) x.runs[name].push_back(r.eval);
  };
  collect("random", PolicySpec::defaults(PolicyKind::Random, n_actions, dim));
  for (std::uint32_t a = 0; a < n_actions; ++a) {
    auto s = PolicySpec::defaults(PolicyKind::Static, n_actions, dim);
    s.static_action = a;
    const auto name = fmt("static-%.0f%%", 100.0 * cfg.coupon_grid[a]);
    x.statics.push_back(name);
    collect(name, s);
  }
  for (auto k : {PolicyKind::LinTS, PolicyKind::LinUCB, PolicyKind::NeuralBoltzmann, PolicyKind::Dqn})
    collect(std::string(policy_kind_name(k)), PolicySpec::defaults(k, n_actions, dim));
  for (const auto& [name, runs] : x.runs) x.reports[name] = compute_metrics(name, runs, x.runs["random"]);
  return x;
}

Outcome learned_vs_baseline(const LearnedExperiment& x) {
  const auto& zero = x.reports.at(x.statics.front());
  double worst_static = 1e300;
  for (const auto& s : x.statics) worst_static = std::min(worst_static, x.reports.at(s).revenue().normalized);
  bool ok = true;
  std::string detail;
  for (const std::string name : {"lin-ts", "lin-ucb"}) {
    const auto& m = x.reports.at(name);
    const bool pass = m.revenue().normalized > 1.0 && m.revenue_p_value < 0.05 &&
                      m.revenue().normalized > zero.revenue().normalized;
    ok = ok && pass;
    detail += fmt("%s %.3f±%.3f (p=%.2g); ", name.c_str(), m.revenue().normalized, m.revenue().normalized_se,
                  m.revenue_p_value);
  }
  const auto& dqn = x.reports.at("dqn");
  ok = ok && dqn.revenue().normalized > worst_static;
  const auto& nb = x.reports.at("neural-boltzmann");
  detail += fmt("dqn %.3f±%.3f; nb %.3f; static-0%% %.3f; worst static %.3f", dqn.revenue().normalized,
                dqn.revenue().normalized_se, nb.revenue().normalized, zero.revenue().normalized, worst_static);
  return {ok, detail};
}

Outcome segmentation(const LearnedExperiment& x) {
  std::string best;
  for (const std::string name : {"lin-ts", "lin-ucb", "neural-boltzmann", "dqn"})
    if (best.empty() || x.reports.at(name).revenue().mean > x.reports.at(best).revenue().mean) best = name;
  const auto seg = segment_analysis(best, x.world, x.runs.at(best), x.ds);
  const bool ok = seg.sensitive.mean_coupon > seg.insensitive.mean_coupon &&
                  seg.insensitive.mean_revenue > seg.sensitive.mean_revenue;
  return {ok, fmt("best=%s; mean coupon sensitive %.3f vs insensitive %.3f; revenue sensitive %.2f vs insensitive %.2f",
                  best.c_str(), seg.sensitive.mean_coupon, seg.insensitive.mean_coupon, seg.sensitive.mean_revenue,
                  seg.insensitive.mean_revenue)};
}

// 4. Choice model against enumeration.
Outcome choice_oracle() {
  const Catalog c = oracle::tiny_catalog();
  const auto cu = oracle::tiny_customer();
  const std::vector<double> shelf{1.8, 3.0, 1.5, 3.2};
  const std::vector<double> marketing{0.2, 0.7, 0.1, 0.5};
  const auto terms = ProductTerms::build(c, shelf, marketing);
  CustomerState state;
  state.visited_prev = true;
  state.visit_prob_prev = 0.5;
  state.store_score_prev = 1.1;
  const double coupon = 0.2, store_mkt = 0.4;
  const auto law = oracle::enumerate_tiny(c, cu, state, shelf, marketing, coupon, store_mkt, 3);
  const ChoiceOptions opt{1000.0, oracle::kTinyCap};
  ChoiceWorkspace ws;
  std::map<int, double> freq;
  const int n = 1000000;
  for (int s = 0; s < n; ++s) {
    Rng rng(derive_seed(2718, s));
    const auto r = simulate_customer_step(c, terms, cu, state, coupon, store_mkt, 3, opt, rng, ws);
    freq[oracle::outcome_key(r.outcome, c)] += 1.0;
  }
  double tv = 0.0;
  for (const auto& [k, p] : law) tv += std::fabs(p - freq[k] / n);
  for (const auto& [k, f] : freq)
    if (!law.count(k)) tv += f / n;
  tv *= 0.5;
  return {tv <= 0.01, fmt("TV distance %.5f over %zu outcomes, %d steps", tv, law.size(), n)};
}

// 5. Numerical suites.
Outcome numerical() {
  std::string detail;
  bool ok = true;

  double worst_grad = 0.0;
  for (int s = 0; s < 4; ++s) {
    Rng r(derive_seed(5, s));
    const std::vector<std::size_t> sizes{6, 16, 8, 4};
    Mlp m(sizes, r);
    Eigen::VectorXd x(6), y(4);
    for (auto& v : x) v = r.normal();
    for (auto& v : y) v = r.normal();
    const auto g = m.backward(x, m.forward(x) - y);
    std::vector<double> analytic;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      analytic.insert(analytic.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
      analytic.insert(analytic.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
    }
    auto p = m.flat_parameters();
    const double eps = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + eps;
      m.set_flat_parameters(p);
      const double up = 0.5 * (m.forward(x) - y).squaredNorm();
      p[i] = keep - eps;
      m.set_flat_parameters(p);
      const double down = 0.5 * (m.forward(x) - y).squaredNorm();
      p[i] = keep;
      m.set_flat_parameters(p);
      const double numeric = (up - down) / (2 * eps);
      worst_grad = std::max(worst_grad, std::fabs(numeric - analytic[i]) /
                                            std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-6}));
    }
  }
  ok = ok && worst_grad < 1e-4;
  detail += fmt("grad rel err %.2e; ", worst_grad);

  auto spec = PolicySpec::defaults(PolicyKind::LinUCB, 2, 5);
  spec.forgetting = 1.0;
  spec.intercept = false;
  LinearBandit bandit(spec);
  Rng r(8);
  Eigen::MatrixXd rows(200, 5);
  Eigen::VectorXd y(200);
  TransitionBatch batch;
  batch.dim = 5;
  for (int i = 0; i < 200; ++i) {
    for (int k = 0; k < 5; ++k) batch.features.push_back(rows(i, k) = r.normal());
    batch.actions.push_back(1);
    batch.rewards.push_back(y(i) = r.normal(2.0, 1.0));
  }
  bandit.update(batch);
  const double ridge_err = (bandit.theta(1) - oracle::ridge(rows, y)).cwiseAbs().maxCoeff();
  ok = ok && ridge_err < 1e-8;
  detail += fmt("ridge err %.2e; ", ridge_err);

  std::vector<double> v(333), w(333), p1(333), p2(333);
  for (auto& e : v) e = 3.0 * r.normal();
  double shift_err = 0.0;
  for (double c : {-50.0, 7.5, 200.0}) {
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] + c;
    shift_err = std::max(shift_err, std::fabs(kernels::logsumexp(w) - c - kernels::logsumexp(v)) / std::max(1.0, std::fabs(c)));
    kernels::softmax(v, p1);
    kernels::softmax(w, p2);
    for (std::size_t i = 0; i < v.size(); ++i) shift_err = std::max(shift_err, std::fabs(p1[i] - p2[i]));
  }
  ok = ok && shift_err < 1e-12;
  detail += fmt("shift err %.2e; ", shift_err);

  const double lambda = 2.5;
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  Rng pr(13);
  for (int i = 0; i < n; ++i) {
    const double q = static_cast<double>(sample_quantity(std::log(lambda), 0.0, 0.0, pr));
    s += q;
    ss += q * q;
  }
  const double mean = s / n, se = std::sqrt((ss / n - mean * mean) / n);
  const bool pois_ok = std::fabs(mean - (1 + lambda)) < 3 * se;
  ok = ok && pois_ok;
  detail += fmt("poisson mean %.4f vs %.4f (3se %.4f); ", mean, 1 + lambda, 3 * se);

  const double rho = 0.8;
  std::vector<double> gx(10000), gy(10000);
  Rng gr(21);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    gx[i] = gr.normal();
    gy[i] = rho * gx[i] + std::sqrt(1 - rho * rho) * gr.normal();
  }
  const double mi = mutual_information(gx, gy);
  const double truth = -0.5 * std::log(1 - rho * rho);
  ok = ok && std::fabs(mi - truth) <= 0.1;
  detail += fmt("MI %.4f vs %.4f", mi, truth);
  return {ok, detail};
}

// 6. Determinism and resumption.
std::string pipeline_reports(const std::filesystem::path& dir, std::size_t jobs) {
  std::filesystem::create_directories(dir);
  SimConfig cfg;
  cfg.n_products = 400;
  cfg.n_categories = 20;
  CollectOptions co;
  co.batch_size = 50;
  co.n_batches = 4;
  co.horizon = 20;
  co.seed = 3;
  co.jobs = jobs;
  const auto ds = collect_offline(cfg, co);
  save_dataset(dir / "dataset.bin", ds);
  const auto world = dataset_world(ds);
  EvalOptions ev;
  ev.n_eval = 2;
  ev.t_eval = 6;
  TrainOptions tr;
  tr.max_epochs = 30;
  std::vector<MetricsReport> reports;
  std::vector<SegmentReport> segs;
  std::vector<EvalRun> random_runs;
  for (auto k : {PolicyKind::Random, PolicyKind::LinUCB, PolicyKind::Dqn}) {
    const auto runs =
        train_and_eval(PolicySpec::defaults(k, ds.n_actions(), ds.schema.dim()), ds, world, tr, ev, 2, 9, {}, jobs);
    std::vector<EvalRun> evals;
    for (const auto& r : runs) evals.push_back(r.eval);
    if (k == PolicyKind::Random) random_runs = evals;
    reports.push_back(compute_metrics(std::string(policy_kind_name(k)), evals, random_runs));
    segs.push_back(segment_analysis(reports.back().policy, world, evals, ds));
  }
  std::ofstream(dir / "metrics.csv", std::ios::binary) << metrics_csv(reports);
  std::ofstream(dir / "segments.csv", std::ios::binary) << segment_csv(segs, ds.config.coupon_grid);
  std::ofstream(dir / "metrics.json", std::ios::binary) << nlohmann::json(reports).dump(2);
  std::string all;
  for (const char* f : {"dataset.bin", "metrics.csv", "segments.csv", "metrics.json"}) {
    std::ifstream in(dir / f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    all += ss.str();
  }
  return all;
}

Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "rsim_acceptance";
  std::filesystem::remove_all(root);
  const auto a = pipeline_reports(root / "a", 1);
  const auto b = pipeline_reports(root / "b", 1);
  const auto c = pipeline_reports(root / "c", 4);
  std::filesystem::remove_all(root);
  const bool rerun = a == b;
  const bool parallel = a == c;

  SimConfig cfg;
  cfg.n_products = 500;
  cfg.n_categories = 25;
  const auto scfg = std::make_shared<const SimConfig>(cfg);
  const auto cat = std::make_shared<const Catalog>(generate_catalog(cfg));
  const auto pop = std::make_shared<const CustomerPopulation>(generate_customers(cfg, 64, 4));
  Env e1(scfg, cat, pop), e2(scfg, cat, pop);
  e1.reset(10);
  std::vector<std::uint32_t> act(64);
  const auto actions = [&](std::uint64_t t) {
    for (std::size_t u = 0; u < act.size(); ++u) act[u] = static_cast<std::uint32_t>((u * 7 + t) % 6);
    return act;
  };
  for (std::uint64_t t = 1; t <= 15; ++t) e1.step(actions(t));
  const auto path = std::filesystem::temp_directory_path() / "rsim_acceptance_snapshot.bin";
  save_snapshot(path, e1.snapshot());
  e2.reset(999);
  e2.restore(load_snapshot(path));
  std::filesystem::remove(path);
  bool resume = e2.t() == 16;
  for (std::uint64_t t = 16; t <= 40; ++t) {
    const auto r1 = e1.step(actions(t), 1);
    const auto r2 = e2.step(actions(t), 4);
    resume = resume && r1.rewards == r2.rewards && r1.outcomes == r2.outcomes;
  }
  return {rerun && parallel && resume, fmt("rerun identical=%d, parallel==serial=%d, snapshot continuation exact=%d",
                                           rerun, parallel, resume)};
}

// 7. DQN on the two-state chain.
Outcome dqn_chain() {
  oracle::Chain chain;
  const auto qstar = oracle::value_iteration(chain);
  auto spec = PolicySpec::defaults(PolicyKind::Dqn, 2, 2);
  spec.discount = chain.discount;
  spec.learning_rate = 0.05;
  spec.minibatch = 4;
  spec.target_sync = 100;
  Dqn q(spec, 11);
  TransitionBatch b;
  b.dim = 2;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) {
      b.features.insert(b.features.end(), {s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0});
      b.next_features.insert(b.next_features.end(), {a == 0 ? 1.0 : 0.0, a == 1 ? 1.0 : 0.0});
      b.actions.push_back(static_cast<std::uint32_t>(a));
      b.rewards.push_back(chain.reward[s][a]);
      b.terminal.push_back(0);
    }
  for (int i = 0; i < 10000; ++i) q.update(b);
  double worst = 0.0;
  for (int s = 0; s < 2; ++s) {
    const std::vector<double> x{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0};
    const auto v = q.q_values(x);
    for (int a = 0; a < 2; ++a) worst = std::max(worst, std::fabs(v(a) - qstar[s][a]));
  }
  return {worst < 1e-2, fmt("max |Q - Q*| = %.2e after %llu updates", worst,
                            static_cast<unsigned long long>(q.gradient_steps()))};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "static-policy trade-off", static_tradeoff);
  std::optional<LearnedExperiment> learned;
  std::string learned_error;
  report(2, "learned vs baseline", [&] {
    learned = run_learned();
    return learned_vs_baseline(*learned);
  });
  report(3, "segmentation direction", [&] {
    if (!learned) throw std::runtime_error("learned experiment unavailable");
    return segmentation(*learned);
  });
  report(4, "choice-model oracle", choice_oracle);
  report(5, "numerical suites", numerical);
  report(6, "determinism and resumption", determinism);
  report(7, "DQN chain", dqn_chain);
  std::printf("%d of 7 criteria passed\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
