#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "rsim/agents.hpp"

using namespace rsim;

namespace {

TransitionBatch make_batch(std::size_t dim) {
  TransitionBatch b;
  b.dim = dim;
  return b;
}

void push(TransitionBatch& b, std::span<const double> x, std::uint32_t a, double r) {
  b.features.insert(b.features.end(), x.begin(), x.end());
  b.actions.push_back(a);
  b.rewards.push_back(r);
}

}  // namespace

TEST_CASE("static and random policies") {
  auto spec = PolicySpec::defaults(PolicyKind::Static, 6, 3);
  spec.static_action = 0;
  StaticPolicy s(spec);
  Rng rng(1);
  const std::vector<double> x{0.1, 0.2, 0.3};
  for (int i = 0; i < 100; ++i) CHECK(s.act(x, rng) == 0);
  spec.static_action = 6;
  CHECK_THROWS(StaticPolicy(spec));

  RandomPolicy rp(PolicySpec::defaults(PolicyKind::Random, 6, 3));
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rp.act(x, rng)];
  for (int c : counts) CHECK(std::fabs(c / double(n) - 1.0 / 6.0) < 0.01);
}

TEST_CASE("linear bandit with no forgetting equals closed-form ridge") {
  auto spec = PolicySpec::defaults(PolicyKind::LinUCB, 3, 4);
  spec.forgetting = 1.0;
  spec.intercept = false;
  LinearBandit bandit(spec);

  // n identical observations.
  const std::vector<double> x{0.5, -1.0, 0.25, 2.0};
  const double reward = 3.0;
  const int n = 7;
  auto batch = make_batch(4);
  for (int i = 0; i < n; ++i) push(batch, x, 1, reward);
  bandit.update(batch);
  const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), 4);
  const Eigen::VectorXd expect =
      (Eigen::MatrixXd::Identity(4, 4) + n * xv * xv.transpose()).inverse() * (n * reward * xv);
  CHECK((bandit.theta(1) - expect).cwiseAbs().maxCoeff() < 1e-8);

  // Arbitrary data split across two update calls.
  LinearBandit b2(spec);
  Rng r(4);
  Eigen::MatrixXd rows(60, 4);
  Eigen::VectorXd y(60);
  auto first = make_batch(4), second = make_batch(4);
  for (int i = 0; i < 60; ++i) {
    std::vector<double> xi(4);
    for (int k = 0; k < 4; ++k) rows(i, k) = xi[k] = r.normal();
    y(i) = r.normal(1.0, 2.0);
    push(i < 25 ? first : second, xi, 2, y(i));
  }
  b2.update(first);
  b2.update(second);
  CHECK((b2.theta(2) - oracle::ridge(rows, y)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(b2.theta(0).isZero());

  const Eigen::MatrixXd a = b2.precision(2);
  CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(a).info() == Eigen::Success);

  const auto before = b2.theta(2);
  b2.update(make_batch(4));
  CHECK(b2.theta(2) == before);
}

TEST_CASE("forgetting discounts older batches") {
  auto spec = PolicySpec::defaults(PolicyKind::LinUCB, 2, 1);
  spec.forgetting = 0.5;
  spec.intercept = false;
  LinearBandit bandit(spec);
  auto b1 = make_batch(1), b2 = make_batch(1);
  const std::vector<double> one{1.0};
  push(b1, one, 0, 4.0);
  push(b2, one, 0, 1.0);
  bandit.update(b1);
  bandit.update(b2);
  // G = 0.5 + 1, b = 0.5 * 4 + 1.
  CHECK(bandit.theta(0)(0) == doctest::Approx(3.0 / 2.5));
}

TEST_CASE("untrained LinUCB scores alpha everywhere and picks arm 0") {
  auto spec = PolicySpec::defaults(PolicyKind::LinUCB, 4, 3);
  spec.intercept = false;
  spec.alpha = 0.6;
  LinearBandit bandit(spec);
  const std::vector<double> x{0.6, 0.0, 0.8};
  Rng rng(1);
  for (double s : bandit.scores(x, nullptr)) CHECK(s == doctest::Approx(0.6));
  CHECK(bandit.act(x, rng) == 0);
}

TEST_CASE("zero exploration reduces both bandits to greedy ridge") {
  Rng r(9);
  auto ucb = PolicySpec::defaults(PolicyKind::LinUCB, 3, 2);
  auto ts = PolicySpec::defaults(PolicyKind::LinTS, 3, 2);
  ucb.alpha = ts.alpha = 0.0;
  ucb.forgetting = ts.forgetting = 1.0;
  LinearBandit a(ucb), b(ts);
  auto batch = make_batch(2);
  for (int i = 0; i < 300; ++i) {
    const std::vector<double> x{r.normal(), r.normal()};
    const auto arm = static_cast<std::uint32_t>(r.below(3));
    push(batch, x, arm, arm * x[0] - x[1] + r.normal(0.0, 0.1));
  }
  a.update(batch);
  b.update(batch);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x{r.normal(), r.normal()};
    std::vector<double> greedy(3);
    const auto in = a.input(x);
    for (std::size_t k = 0; k < 3; ++k) greedy[k] = a.theta(k).dot(in);
    Rng r1(i), r2(i);
    CHECK(a.act(x, r1) == argmax_lowest(greedy));
    CHECK(b.act(x, r2) == argmax_lowest(greedy));
  }
}

TEST_CASE("LinUCB learns a synthetic linear bandit online") {
  const std::size_t d = 3, arms = 4;
  Rng world(12);
  std::vector<Eigen::VectorXd> theta(arms, Eigen::VectorXd(d));
  for (auto& t : theta)
    for (auto& v : t) v = world.normal();
  auto spec = PolicySpec::defaults(PolicyKind::LinUCB, arms, d);
  spec.forgetting = 1.0;
  spec.alpha = 0.5;
  spec.intercept = false;
  LinearBandit bandit(spec);
  Rng rng(3);
  double late_regret = 0.0, late_gap = 0.0;
  const int steps = 10000;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.normal();
    const Eigen::VectorXd xv = Eigen::Map<Eigen::VectorXd>(x.data(), d);
    std::vector<double> mean(arms);
    for (std::size_t k = 0; k < arms; ++k) mean[k] = theta[k].dot(xv);
    const auto a = bandit.act(x, rng);
    auto batch = make_batch(d);
    push(batch, x, a, mean[a] + rng.normal(0.0, 0.1));
    bandit.update(batch);
    if (t >= steps - 1000) {
      auto sorted = mean;
      std::sort(sorted.rbegin(), sorted.rend());
      late_regret += sorted[0] - mean[a];
      late_gap += sorted[0] - sorted[1];
    }
  }
  CHECK(late_regret < 0.1 * late_gap);
}

TEST_CASE("Boltzmann action limits") {
  auto spec = PolicySpec::defaults(PolicyKind::NeuralBoltzmann, 6, 2);
  spec.temperature = 1000.0;
  NeuralBoltzmann nb(spec, 1);
  const std::vector<double> x{0.5, -0.5};
  std::array<int, 6> counts{};
  Rng rng(2);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[nb.act(x, rng)];
  const auto p = nb.action_probabilities(x);
  CHECK(*std::max_element(p.begin(), p.end()) - *std::min_element(p.begin(), p.end()) < 0.01);
  for (int c : counts) CHECK(std::fabs(c / double(n) - 1.0 / 6.0) < 0.02);
}

TEST_CASE("Boltzmann agent finds the best arm of a deterministic bandit") {
  auto spec = PolicySpec::defaults(PolicyKind::NeuralBoltzmann, 4, 2);
  spec.temperature = 0.1;
  spec.learning_rate = 0.05;
  spec.minibatch = 32;
  NeuralBoltzmann nb(spec, 5);
  Rng rng(8);
  // 2,000 steps of experience, a batch of 32 per update.
  for (int step = 0; step < 2000; step += 32) {
    auto batch = make_batch(2);
    for (int i = 0; i < 32; ++i) {
      const std::vector<double> x{rng.normal(), rng.normal()};
      const auto a = static_cast<std::uint32_t>(rng.below(4));
      push(batch, x, a, static_cast<double>(a));
    }
    for (int rep = 0; rep < 20; ++rep) nb.update(batch);
  }
  int best = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal()};
    best += nb.act(x, rng) == 3 ? 1 : 0;
  }
  CHECK(best >= 0.8 * n);
}

TEST_CASE("epsilon one makes DQN uniform") {
  auto spec = PolicySpec::defaults(PolicyKind::Dqn, 5, 2);
  spec.epsilon = 1.0;
  Dqn q(spec, 3);
  std::array<int, 5> counts{};
  Rng rng(4);
  const std::vector<double> x{1.0, 0.0};
  for (int i = 0; i < 50000; ++i) ++counts[q.act(x, rng)];
  for (int c : counts) CHECK(std::fabs(c / 50000.0 - 0.2) < 0.01);
}

namespace {

TransitionBatch chain_batch() {
  auto b = make_batch(2);
  oracle::Chain chain;
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < 2; ++a) {
      const std::vector<double> x{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0};
      const std::vector<double> nx{a == 0 ? 1.0 : 0.0, a == 1 ? 1.0 : 0.0};
      push(b, x, static_cast<std::uint32_t>(a), chain.reward[s][a]);
      b.next_features.insert(b.next_features.end(), nx.begin(), nx.end());
      b.terminal.push_back(0);
    }
  return b;
}

}  // namespace

TEST_CASE("DQN recovers the value-iteration fixed point on a two-state chain") {
  oracle::Chain chain;
  const auto qstar = oracle::value_iteration(chain);
  auto spec = PolicySpec::defaults(PolicyKind::Dqn, 2, 2);
  spec.discount = chain.discount;
  spec.learning_rate = 0.05;
  spec.minibatch = 4;
  spec.target_sync = 100;
  Dqn q(spec, 11);
  const auto batch = chain_batch();
  for (int i = 0; i < 10000; ++i) q.update(batch);
  CHECK(q.gradient_steps() == 10000);
  for (int s = 0; s < 2; ++s) {
    const std::vector<double> x{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0};
    const auto v = q.q_values(x);
    for (int a = 0; a < 2; ++a) CHECK(std::fabs(v(a) - qstar[s][a]) < 1e-2);
  }
}

TEST_CASE("zero discount turns DQN into reward regression") {
  auto spec = PolicySpec::defaults(PolicyKind::Dqn, 2, 2);
  spec.discount = 0.0;
  spec.learning_rate = 0.05;
  spec.minibatch = 4;
  Dqn q(spec, 2);
  const auto batch = chain_batch();
  for (int i = 0; i < 5000; ++i) q.update(batch);
  oracle::Chain chain;
  for (int s = 0; s < 2; ++s) {
    const std::vector<double> x{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0};
    const auto v = q.q_values(x);
    for (int a = 0; a < 2; ++a) CHECK(std::fabs(v(a) - chain.reward[s][a]) < 1e-2);
  }
}

TEST_CASE("checkpoints round trip and guard the schema") {
  const auto dir = std::filesystem::temp_directory_path();
  Rng r(6);
  for (auto kind : {PolicyKind::Static, PolicyKind::Random, PolicyKind::LinTS, PolicyKind::LinUCB,
                    PolicyKind::NeuralBoltzmann, PolicyKind::Dqn}) {
    auto spec = PolicySpec::defaults(kind, 6, 3);
    auto policy = make_policy(spec, 9);
    if (spec.trainable()) {
      auto batch = make_batch(3);
      for (int i = 0; i < 40; ++i) {
        const std::vector<double> x{r.normal(), r.normal(), r.normal()};
        push(batch, x, static_cast<std::uint32_t>(r.below(6)), r.normal());
        const std::vector<double> nx{r.normal(), r.normal(), r.normal()};
        batch.next_features.insert(batch.next_features.end(), nx.begin(), nx.end());
        batch.terminal.push_back(0);
      }
      policy->update(batch);
    }
    const auto path = dir / "rsim_policy_test.bin";
    save_checkpoint(path, *policy, 0xabc, 9);
    const auto loaded = load_checkpoint(path, 0xabc);
    CHECK(loaded.spec == policy->spec());
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> x{r.normal(), r.normal(), r.normal()};
      Rng r1(i), r2(i);
      CHECK(loaded.policy->act(x, r1) == policy->act(x, r2));
    }
    CHECK_THROWS_AS(load_checkpoint(path, 0xabd), SchemaMismatch);
    std::filesystem::remove(path);
  }
}

TEST_CASE("policy spec json and validation") {
  auto spec = PolicySpec::defaults(PolicyKind::LinTS, 6, 10);
  CHECK(nlohmann::json(spec).get<PolicySpec>() == spec);
  CHECK(spec.alpha == doctest::Approx(0.7387));
  spec.forgetting = 0.0;
  CHECK_THROWS(spec.validate());
  CHECK_THROWS(parse_policy_kind("ppo"));
  CHECK_THROWS(nlohmann::json::parse(R"({"kind":"dqn","colour":1})").get<PolicySpec>());
}
