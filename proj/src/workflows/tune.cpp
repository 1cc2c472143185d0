#include <sstream>
#include <stdexcept>

#include "rsim/workflows.hpp"

namespace rsim {

HyperParamSpace HyperParamSpace::for_kind(PolicyKind kind) {
  HyperParamSpace s;
  s.kind = kind;
  const auto layers = [](std::initializer_list<std::vector<std::size_t>> v) {
    std::vector<nlohmann::json> out;
    for (const auto& x : v) out.emplace_back(x);
    return out;
  };
  switch (kind) {
    case PolicyKind::LinTS:
    case PolicyKind::LinUCB:
      s.params = {{"alpha", 0.1, 0.9, {}}, {"forgetting", 0.1, 0.9, {}}};
      break;
    case PolicyKind::NeuralBoltzmann:
      s.params = {{"learning_rate", 0.001, 0.05, {}},
                  {"temperature", 0.1, 0.9, {}},
                  {"hidden_layers", 0.0, 0.0, layers({{8, 2}, {16, 4}, {32, 8}})}};
      break;
    case PolicyKind::Dqn:
      s.params = {{"learning_rate", 0.001, 0.01, {}},
                  {"discount", 0.1, 0.9, {}},
                  {"epsilon", 0.1, 0.9, {}},
                  {"units", 0.0, 0.0, {nlohmann::json(16), nlohmann::json(32), nlohmann::json(64)}}};
      break;
    default: throw std::invalid_argument("no hyperparameters to tune for this policy kind");
  }
  return s;
}

bool HyperParamSpace::contains(const PolicySpec& spec) const {
  const nlohmann::json j = spec;
  for (const auto& p : params) {
    const auto& v = j.at(p.name);
    if (p.choices.empty()) {
      const double x = v.get<double>();
      if (x < p.lo || x > p.hi) return false;
    } else if (std::find(p.choices.begin(), p.choices.end(), v) == p.choices.end()) {
      return false;
    }
  }
  return true;
}

nlohmann::json uniform_sampler(const HyperParamSpace& space, Rng& rng) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : space.params) {
    if (p.choices.empty()) out[p.name] = rng.uniform(p.lo, p.hi);
    else out[p.name] = p.choices[rng.below(p.choices.size())];
  }
  return out;
}

PolicySpec apply_params(PolicySpec base, const nlohmann::json& params) {
  nlohmann::json j = base;
  for (const auto& [key, value] : params.items()) {
    if (!j.contains(key)) throw std::invalid_argument("unknown hyperparameter: " + key);
    j[key] = value;
  }
  PolicySpec out = j.get<PolicySpec>();
  out.validate();
  return out;
}

TuneResult tune(const PolicySpec& base, const HyperParamSpace& space, std::size_t n_tune, const Objective& objective,
                std::uint64_t seed, const ParamSampler& sampler) {
  if (space.params.empty()) throw std::invalid_argument("empty hyperparameter space");
  if (n_tune == 0) throw std::invalid_argument("need at least one trial");
  TuneResult res;
  Rng rng(derive_seed(seed, Stream::Tuning));
  for (std::size_t i = 0; i < n_tune; ++i) {
    Trial t;
    t.index = i;
    t.params = sampler(space, rng);
    const PolicySpec spec = apply_params(base, t.params);
    t.objective = objective(spec, i);
    if (i == 0 || t.objective > res.trials[res.best_trial].objective) {
      res.best_trial = i;
      res.best = spec;
    }
    res.trials.push_back(std::move(t));
  }
  return res;
}

Objective revenue_objective(const OfflineDataset& ds, const World& world, const TrainOptions& train,
                            const EvalOptions& eval, std::size_t n_agent, std::uint64_t seed, std::size_t jobs) {
  return [&ds, world, train, eval, n_agent, seed, jobs](const PolicySpec& spec, std::size_t trial) {
    const auto runs = train_and_eval(spec, ds, world, train, eval, n_agent, derive_seed(seed, Stream::Tuning, trial),
                                     {}, jobs);
    double total = 0.0;
    for (const auto& r : runs) total += r.eval.mean().revenue;
    return total / static_cast<double>(runs.size());
  };
}

std::string trials_jsonl(const TuneResult& r) {
  std::ostringstream os;
  for (const auto& t : r.trials)
    os << nlohmann::json{{"trial", t.index}, {"params", t.params}, {"objective", t.objective},
                         {"best", t.index == r.best_trial}}
              .dump()
       << '\n';
  return os.str();
}

}  // namespace rsim
