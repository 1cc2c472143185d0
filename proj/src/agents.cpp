#include "rsim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rsim/config.hpp"
#include "rsim/kernels.hpp"

namespace rsim {

namespace {

constexpr std::string_view kCheckpointMagic = "RPOL";
constexpr std::uint32_t kCheckpointVersion = 1;

Eigen::MatrixXd rows_to_columns(const TransitionBatch& batch, std::span<const std::size_t> idx, bool next) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.dim), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c) {
    const auto row = next ? batch.next_row(idx[c]) : batch.row(idx[c]);
    for (std::size_t r = 0; r < batch.dim; ++r) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[r];
  }
  return x;
}

Eigen::VectorXd to_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_features(std::span<const double> f, std::size_t dim) {
  if (f.size() != dim) throw std::invalid_argument("feature vector dimension mismatch");
  for (double v : f)
    if (!std::isfinite(v)) throw std::domain_error("non-finite feature");
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<std::size_t> network_sizes(std::size_t in, std::span<const std::size_t> hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

void write_matrix(BinaryWriter& w, const Eigen::MatrixXd& m) {
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  w.put_vector(std::vector<double>(m.data(), m.data() + m.size()));
}

Eigen::MatrixXd read_matrix(BinaryReader& r, Eigen::Index rows, Eigen::Index cols) {
  const auto nr = r.get<std::uint64_t>();
  const auto nc = r.get<std::uint64_t>();
  if (nr != static_cast<std::uint64_t>(rows) || nc != static_cast<std::uint64_t>(cols))
    throw FormatError("checkpoint matrix shape mismatch");
  const auto data = r.get_vector<double>();
  if (data.size() != static_cast<std::size_t>(rows * cols)) throw FormatError("checkpoint matrix size mismatch");
  return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

}  // namespace

std::string_view policy_kind_name(PolicyKind k) noexcept {
  switch (k) {
    case PolicyKind::Static: return "static";
    case PolicyKind::Random: return "random";
    case PolicyKind::LinTS: return "lin-ts";
    case PolicyKind::LinUCB: return "lin-ucb";
    case PolicyKind::NeuralBoltzmann: return "neural-boltzmann";
    case PolicyKind::Dqn: return "dqn";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::Static, PolicyKind::Random, PolicyKind::LinTS, PolicyKind::LinUCB,
                 PolicyKind::NeuralBoltzmann, PolicyKind::Dqn})
    if (policy_kind_name(k) == name) return k;
  throw std::invalid_argument("unknown policy kind: " + std::string(name));
}

PolicySpec PolicySpec::defaults(PolicyKind kind, std::size_t n_actions, std::size_t feature_dim) {
  PolicySpec s;
  s.kind = kind;
  s.n_actions = n_actions;
  s.feature_dim = feature_dim;
  switch (kind) {
    case PolicyKind::LinTS:
      s.alpha = 0.7387;
      s.forgetting = 0.8119;
      break;
    case PolicyKind::LinUCB:
      s.alpha = 0.8483;
      s.forgetting = 0.1088;
      break;
    case PolicyKind::NeuralBoltzmann:
      s.learning_rate = 0.025;
      s.temperature = 0.1665;
      s.hidden_layers = {8, 2};
      break;
    case PolicyKind::Dqn:
      s.learning_rate = 0.005;
      s.discount = 0.8792;
      s.epsilon = 0.1552;
      s.units = 16;
      break;
    default: break;
  }
  return s;
}

void PolicySpec::validate() const {
  if (n_actions == 0) throw std::invalid_argument("policy needs at least one action");
  if (feature_dim == 0) throw std::invalid_argument("feature dimension must be positive");
  if (kind == PolicyKind::Static && static_action >= n_actions) throw std::invalid_argument("static action out of grid");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be non-negative");
  if (!(forgetting > 0.0 && forgetting <= 1.0)) throw std::invalid_argument("forgetting factor must lie in (0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must lie in [0, 1]");
  if (units == 0 || target_sync == 0 || minibatch == 0) throw std::invalid_argument("sizes must be positive");
  for (auto h : hidden_layers)
    if (h == 0) throw std::invalid_argument("hidden layer sizes must be positive");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) throw std::invalid_argument("reward scale must be positive");
}

void to_json(nlohmann::json& j, const PolicySpec& s) {
  j = nlohmann::json{{"kind", policy_kind_name(s.kind)},
                     {"n_actions", s.n_actions},
                     {"feature_dim", s.feature_dim},
                     {"static_action", s.static_action},
                     {"alpha", s.alpha},
                     {"forgetting", s.forgetting},
                     {"intercept", s.intercept},
                     {"learning_rate", s.learning_rate},
                     {"temperature", s.temperature},
                     {"hidden_layers", s.hidden_layers},
                     {"units", s.units},
                     {"epsilon", s.epsilon},
                     {"discount", s.discount},
                     {"target_sync", s.target_sync},
                     {"minibatch", s.minibatch},
                     {"reward_scale", s.reward_scale}};
}

void from_json(const nlohmann::json& j, PolicySpec& s) {
  PolicySpec base = PolicySpec::defaults(parse_policy_kind(j.at("kind").get<std::string>()),
                                         j.value("n_actions", std::size_t{6}), j.value("feature_dim", std::size_t{10}));
  for (const auto& [key, value] : j.items()) {
    if (key == "kind" || key == "n_actions" || key == "feature_dim") continue;
    else if (key == "static_action") base.static_action = value.get<std::uint32_t>();
    else if (key == "alpha") base.alpha = value.get<double>();
    else if (key == "forgetting") base.forgetting = value.get<double>();
    else if (key == "intercept") base.intercept = value.get<bool>();
    else if (key == "learning_rate") base.learning_rate = value.get<double>();
    else if (key == "temperature") base.temperature = value.get<double>();
    else if (key == "hidden_layers") base.hidden_layers = value.get<std::vector<std::size_t>>();
    else if (key == "units") base.units = value.get<std::size_t>();
    else if (key == "epsilon") base.epsilon = value.get<double>();
    else if (key == "discount") base.discount = value.get<double>();
    else if (key == "target_sync") base.target_sync = value.get<std::size_t>();
    else if (key == "minibatch") base.minibatch = value.get<std::size_t>();
    else if (key == "reward_scale") base.reward_scale = value.get<double>();
    else throw std::invalid_argument("unknown policy key: " + key);
  }
  s = std::move(base);
}

void TransitionBatch::validate(std::size_t n_actions, bool need_next) const {
  const auto n = actions.size();
  if (features.size() != n * dim || rewards.size() != n) throw std::invalid_argument("inconsistent transition batch");
  if (need_next && (next_features.size() != n * dim || terminal.size() != n))
    throw std::invalid_argument("transition batch lacks next-state features");
  for (auto a : actions)
    if (a >= n_actions) throw std::out_of_range("transition action out of grid");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::domain_error("non-finite reward");
  for (double f : features)
    if (!std::isfinite(f)) throw std::domain_error("non-finite feature");
  if (need_next)
    for (double f : next_features)
      if (!std::isfinite(f)) throw std::domain_error("non-finite feature");
}

std::uint32_t argmax_lowest(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<std::uint32_t>(best);
}

StaticPolicy::StaticPolicy(PolicySpec spec) : Policy(std::move(spec)) {
  spec_.kind = PolicyKind::Static;
  spec_.validate();
}

RandomPolicy::RandomPolicy(PolicySpec spec) : Policy(std::move(spec)) {
  spec_.kind = PolicyKind::Random;
  spec_.validate();
}

// Linear bandits.

LinearBandit::LinearBandit(PolicySpec spec) : Policy(std::move(spec)) {
  if (spec_.kind != PolicyKind::LinTS && spec_.kind != PolicyKind::LinUCB)
    throw std::invalid_argument("linear bandit needs kind lin-ts or lin-ucb");
  spec_.validate();
  d_ = spec_.feature_dim + (spec_.intercept ? 1 : 0);
  const auto d = static_cast<Eigen::Index>(d_);
  gram_.assign(spec_.n_actions, Eigen::MatrixXd::Zero(d, d));
  b_.assign(spec_.n_actions, Eigen::VectorXd::Zero(d));
  refresh();
}

Eigen::VectorXd LinearBandit::input(std::span<const double> features) const {
  check_features(features, spec_.feature_dim);
  Eigen::VectorXd x(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < features.size(); ++i) x(static_cast<Eigen::Index>(i)) = features[i];
  if (spec_.intercept) x(static_cast<Eigen::Index>(d_ - 1)) = 1.0;
  return x;
}

Eigen::MatrixXd LinearBandit::precision(std::size_t arm) const {
  return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d_), static_cast<Eigen::Index>(d_)) + gram_.at(arm);
}

void LinearBandit::refresh() {
  const auto n = spec_.n_actions;
  theta_.resize(n);
  cov_.resize(n);
  cov_chol_.resize(n);
  const auto eye = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d_), static_cast<Eigen::Index>(d_));
  for (std::size_t a = 0; a < n; ++a) {
    Eigen::MatrixXd p = precision(a);
    p = 0.5 * (p + p.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(p);
    if (llt.info() != Eigen::Success) throw std::runtime_error("bandit precision matrix lost positive definiteness");
    theta_[a] = llt.solve(b_[a]);
    Eigen::MatrixXd cov = llt.solve(eye);
    cov = 0.5 * (cov + cov.transpose());
    cov_[a] = cov;
    Eigen::LLT<Eigen::MatrixXd> cl(cov);
    cov_chol_[a] = cl.matrixL();
  }
}

double LinearBandit::update(const TransitionBatch& batch) {
  if (batch.dim != spec_.feature_dim) throw std::invalid_argument("transition batch dimension mismatch");
  batch.validate(spec_.n_actions, false);
  if (spec_.forgetting != 1.0) {
    for (std::size_t a = 0; a < spec_.n_actions; ++a) {
      gram_[a] *= spec_.forgetting;
      b_[a] *= spec_.forgetting;
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd x = input(batch.row(i));
    const auto a = batch.actions[i];
    gram_[a].selfadjointView<Eigen::Lower>().rankUpdate(x);
    b_[a] += batch.rewards[i] * x;
  }
  for (auto& g : gram_) g = g.selfadjointView<Eigen::Lower>();
  refresh();
  return 0.0;
}

std::vector<double> LinearBandit::scores(std::span<const double> features, Rng* rng) const {
  const Eigen::VectorXd x = input(features);
  std::vector<double> s(spec_.n_actions);
  for (std::size_t a = 0; a < spec_.n_actions; ++a) {
    if (spec_.kind == PolicyKind::LinUCB) {
      const double width = std::sqrt(std::max(0.0, x.dot(cov_[a] * x)));
      s[a] = theta_[a].dot(x) + spec_.alpha * width;
    } else {
      double v = theta_[a].dot(x);
      if (rng != nullptr && spec_.alpha > 0.0) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(d_));
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng->normal();
        v += spec_.alpha * x.dot(cov_chol_[a] * z);
      }
      s[a] = v;
    }
  }
  return s;
}

std::uint32_t LinearBandit::act(std::span<const double> features, Rng& rng) const {
  return argmax_lowest(scores(features, &rng));
}

void LinearBandit::write_parameters(BinaryWriter& w) const {
  for (std::size_t a = 0; a < spec_.n_actions; ++a) {
    write_matrix(w, gram_[a]);
    write_matrix(w, b_[a]);
  }
}

void LinearBandit::read_parameters(BinaryReader& r) {
  const auto d = static_cast<Eigen::Index>(d_);
  for (std::size_t a = 0; a < spec_.n_actions; ++a) {
    gram_[a] = read_matrix(r, d, d);
    b_[a] = read_matrix(r, d, 1);
  }
  refresh();
}

// Neural Boltzmann.

NeuralBoltzmann::NeuralBoltzmann(PolicySpec spec, std::uint64_t seed)
    : Policy(std::move(spec)), train_rng_(derive_seed(seed, Stream::Training, 1)) {
  spec_.kind = PolicyKind::NeuralBoltzmann;
  spec_.validate();
  Rng init(derive_seed(seed, Stream::Training, 0));
  const auto sizes = network_sizes(spec_.feature_dim, spec_.hidden_layers, spec_.n_actions);
  net_ = Mlp(sizes, init);
}

std::vector<double> NeuralBoltzmann::action_probabilities(std::span<const double> features) const {
  check_features(features, spec_.feature_dim);
  const Eigen::VectorXd out = net_.forward(to_vector(features));
  std::vector<double> logits(spec_.n_actions);
  for (std::size_t a = 0; a < logits.size(); ++a) logits[a] = out(static_cast<Eigen::Index>(a)) / spec_.temperature;
  std::vector<double> p(logits.size());
  kernels::softmax(logits, p);
  return p;
}

std::uint32_t NeuralBoltzmann::act(std::span<const double> features, Rng& rng) const {
  const auto p = action_probabilities(features);
  double u = rng.uniform();
  for (std::size_t a = 0; a + 1 < p.size(); ++a) {
    if (u < p[a]) return static_cast<std::uint32_t>(a);
    u -= p[a];
  }
  return static_cast<std::uint32_t>(p.size() - 1);
}

double NeuralBoltzmann::update(const TransitionBatch& batch) {
  if (batch.dim != spec_.feature_dim) throw std::invalid_argument("transition batch dimension mismatch");
  batch.validate(spec_.n_actions, false);
  const auto order = shuffled(batch.size(), train_rng_);
  double loss = 0.0;
  std::size_t n_steps = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += spec_.minibatch) {
    const auto end = std::min(order.size(), begin + spec_.minibatch);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    const Eigen::MatrixXd x = rows_to_columns(batch, idx, false);
    std::vector<std::uint32_t> heads(idx.size());
    std::vector<double> targets(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      heads[i] = batch.actions[idx[i]];
      targets[i] = batch.rewards[idx[i]] / spec_.reward_scale;
    }
    loss += net_.train_heads(x, heads, targets, spec_.learning_rate);
    ++n_steps;
  }
  return n_steps > 0 ? loss / static_cast<double>(n_steps) : 0.0;
}

void NeuralBoltzmann::write_parameters(BinaryWriter& w) const {
  net_.write(w);
  const auto s = train_rng_.state();
  for (auto v : s) w.put(v);
}

void NeuralBoltzmann::read_parameters(BinaryReader& r) {
  Mlp m = Mlp::read(r);
  if (m.sizes() != net_.sizes()) throw FormatError("checkpoint network shape mismatch");
  net_ = std::move(m);
  std::array<std::uint64_t, 4> s{};
  for (auto& v : s) v = r.get<std::uint64_t>();
  train_rng_ = Rng::from_state(s);
}

// DQN.

Dqn::Dqn(PolicySpec spec, std::uint64_t seed)
    : Policy(std::move(spec)), train_rng_(derive_seed(seed, Stream::Training, 1)) {
  spec_.kind = PolicyKind::Dqn;
  spec_.validate();
  Rng init(derive_seed(seed, Stream::Training, 0));
  const std::size_t hidden[] = {spec_.units};
  qnet_ = Mlp(network_sizes(spec_.feature_dim, hidden, spec_.n_actions), init);
  target_ = qnet_;
}

Eigen::VectorXd Dqn::q_values(std::span<const double> features) const {
  check_features(features, spec_.feature_dim);
  return qnet_.forward(to_vector(features));
}

std::uint32_t Dqn::act(std::span<const double> features, Rng& rng) const {
  const Eigen::VectorXd q = q_values(features);
  if (spec_.epsilon > 0.0 && rng.uniform() < spec_.epsilon)
    return static_cast<std::uint32_t>(rng.below(spec_.n_actions));
  return argmax_lowest(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

double Dqn::update(const TransitionBatch& batch) {
  if (batch.dim != spec_.feature_dim) throw std::invalid_argument("transition batch dimension mismatch");
  batch.validate(spec_.n_actions, true);
  const auto order = shuffled(batch.size(), train_rng_);
  double loss = 0.0;
  std::size_t n_steps = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += spec_.minibatch) {
    const auto end = std::min(order.size(), begin + spec_.minibatch);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    const Eigen::MatrixXd x = rows_to_columns(batch, idx, false);
    const Eigen::MatrixXd next_q = target_.forward_batch(rows_to_columns(batch, idx, true));
    std::vector<std::uint32_t> heads(idx.size());
    std::vector<double> targets(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto k = idx[i];
      heads[i] = batch.actions[k];
      double y = batch.rewards[k] / spec_.reward_scale;
      if (!batch.terminal[k]) y += spec_.discount * next_q.col(static_cast<Eigen::Index>(i)).maxCoeff();
      targets[i] = y;
    }
    loss += qnet_.train_heads(x, heads, targets, spec_.learning_rate);
    ++n_steps;
    if (++steps_ % spec_.target_sync == 0) target_ = qnet_;
  }
  return n_steps > 0 ? loss / static_cast<double>(n_steps) : 0.0;
}

void Dqn::write_parameters(BinaryWriter& w) const {
  qnet_.write(w);
  target_.write(w);
  w.put(steps_);
  for (auto v : train_rng_.state()) w.put(v);
}

void Dqn::read_parameters(BinaryReader& r) {
  Mlp q = Mlp::read(r);
  Mlp t = Mlp::read(r);
  if (q.sizes() != qnet_.sizes() || t.sizes() != qnet_.sizes()) throw FormatError("checkpoint network shape mismatch");
  qnet_ = std::move(q);
  target_ = std::move(t);
  steps_ = r.get<std::uint64_t>();
  std::array<std::uint64_t, 4> s{};
  for (auto& v : s) v = r.get<std::uint64_t>();
  train_rng_ = Rng::from_state(s);
}

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case PolicyKind::Static: return std::make_unique<StaticPolicy>(spec);
    case PolicyKind::Random: return std::make_unique<RandomPolicy>(spec);
    case PolicyKind::LinTS:
    case PolicyKind::LinUCB: return std::make_unique<LinearBandit>(spec);
    case PolicyKind::NeuralBoltzmann: return std::make_unique<NeuralBoltzmann>(spec, seed);
    case PolicyKind::Dqn: return std::make_unique<Dqn>(spec, seed);
  }
  throw std::invalid_argument("unknown policy kind");
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy, std::uint64_t schema_hash,
                     std::uint64_t seed) {
  BinaryWriter w(kCheckpointMagic, kCheckpointVersion);
  w.put_string(nlohmann::json(policy.spec()).dump());
  w.put(schema_hash);
  w.put(seed);
  policy.write_parameters(w);
  w.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_schema_hash) {
  auto r = BinaryReader::open(path, kCheckpointMagic, kCheckpointVersion);
  Checkpoint c;
  try {
    c.spec = nlohmann::json::parse(r.get_string()).get<PolicySpec>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what());
  }
  c.schema_hash = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  if (expected_schema_hash && *expected_schema_hash != c.schema_hash)
    throw SchemaMismatch("checkpoint " + path.string() + " was trained on feature schema " + hex64(c.schema_hash) +
                         " but the dataset uses " + hex64(*expected_schema_hash));
  c.policy = make_policy(c.spec, c.seed);
  c.policy->read_parameters(r);
  r.expect_end();
  return c;
}

}  // namespace rsim
