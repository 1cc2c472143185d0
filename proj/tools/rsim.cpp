// rsim: command-line front end for sweeps, offline collection, training,
// evaluation, tuning and analysis. Every successful run ends by writing a
// manifest that lists the artifacts it produced.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsim/agents.hpp"
#include "rsim/config.hpp"
#include "rsim/features.hpp"
#include "rsim/parallel.hpp"
#include "rsim/rng.hpp"
#include "rsim/workflows.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rsim;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kBadInput = 2, kMissingArtifact = 3, kSchemaMismatch = 4 };

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::size_t jobs = default_jobs();
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifact("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::is_regular_file(p)) throw MissingArtifact("missing " + p.string() + "; " + hint);
}

/// Writes to a temporary sibling and renames it into place.
void write_atomic(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, p);
}

class Run {
 public:
  Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g) {}

  /// Resolves the config: file, then RSIM_SEED, then --seed.
  SimConfig load_config() {
    SimConfig cfg;
    if (!g_.config.empty()) {
      require_file(g_.config, "pass an existing JSON file to --config");
      cfg = rsim::load_config(g_.config);
    } else if (const char* s = std::getenv("RSIM_SEED"); s != nullptr && *s != '\0') {
      cfg = parse_config(json{{"seed", std::stoull(s)}}.dump());
    }
    if (g_.seed) cfg.seed = *g_.seed;
    cfg.validate();
    return cfg;
  }

  /// Loads a dataset and checks it against --config when one is given.
  OfflineDataset load_dataset(const fs::path& p) {
    require_file(p, "run `rsim collect` first or pass --dataset");
    auto ds = rsim::load_dataset(p);
    if (!g_.config.empty()) {
      SimConfig cfg = rsim::load_config(g_.config);
      cfg.seed = ds.config.seed;
      if (cfg.hash() != ds.config.hash())
        throw std::invalid_argument("--config does not match the config stored in " + p.string());
    }
    inputs_.push_back(p.string());
    return ds;
  }

  /// --seed, then RSIM_SEED, then the config's seed.
  std::uint64_t seed(const SimConfig& cfg) const {
    if (g_.seed) return *g_.seed;
    if (const char* s = std::getenv("RSIM_SEED"); s != nullptr && *s != '\0') return std::stoull(s);
    return cfg.seed;
  }

  void bind(const SimConfig& cfg, std::uint64_t seed) {
    config_hash_ = cfg.hash();
    seed_ = seed;
    dir_ = fs::path(g_.out) / ("cfg-" + hex64(config_hash_));
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void emit(const std::string& name, const std::string& content) {
    const auto p = path(name);
    write_atomic(p, content);
    artifacts_.push_back({{"path", p.string()}, {"fnv1a64", hex64(fnv1a64(content))}, {"bytes", content.size()}});
    std::cout << p.string() << '\n';
  }

  /// Records a file the caller already wrote in place.
  void note_file(const fs::path& p) {
    const auto content = slurp(p);
    artifacts_.push_back({{"path", p.string()}, {"fnv1a64", hex64(fnv1a64(content))}, {"bytes", content.size()}});
    std::cout << p.string() << '\n';
  }

  void finish(const std::string& label) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m{{"command", command_},
           {"config_path", g_.config},
           {"config_hash", hex64(config_hash_)},
           {"seed", seed_},
           {"jobs", g_.jobs},
           {"inputs", inputs_},
           {"artifacts", artifacts_},
           {"wall_seconds", secs}};
    write_atomic(path("manifest-" + label + ".json"), m.dump(2) + "\n");
  }

 private:
  std::string command_;
  const Globals& g_;
  std::uint64_t config_hash_ = 0;
  std::uint64_t seed_ = 0;
  fs::path dir_;
  std::vector<std::string> inputs_;
  json artifacts_ = json::array();
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string policy_label(const PolicySpec& spec, std::span<const double> grid) {
  if (spec.kind == PolicyKind::Static)
    return "static-" + std::to_string(static_cast<int>(std::lround(100.0 * grid[spec.static_action])));
  return std::string(policy_kind_name(spec.kind));
}

/// Defaults for the kind, overlaid with an optional JSON file.
PolicySpec resolve_spec(const std::string& kind, const std::string& spec_file, std::optional<std::uint32_t> action,
                        const OfflineDataset& ds) {
  const auto k = parse_policy_kind(kind);
  json j = PolicySpec::defaults(k, ds.n_actions(), ds.schema.dim());
  if (!spec_file.empty()) {
    require_file(spec_file, "pass an existing JSON policy spec to --spec");
    const json over = json::parse(slurp(spec_file));
    if (!over.is_object()) throw std::invalid_argument("policy spec must be a JSON object");
    if (over.contains("kind") && over["kind"] != j["kind"])
      throw std::invalid_argument("--spec kind " + over["kind"].dump() + " disagrees with --policy " + kind);
    j.update(over);
  }
  if (action) j["static_action"] = *action;
  PolicySpec spec = j.get<PolicySpec>();
  if (spec.n_actions != ds.n_actions() || spec.feature_dim != ds.schema.dim())
    throw std::invalid_argument("policy spec dimensions do not match the dataset");
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retail coupon-targeting simulator and offline RL benchmark"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON simulation config; missing keys keep defaults");
  app.add_option("--seed", g.seed, "master seed; overrides RSIM_SEED and the config");
  auto* out_opt = app.add_option("--out", g.out, "output root; RSIM_OUT is used when omitted")->capture_default_str();
  app.add_option("--jobs", g.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "static-coupon sweep; writes sweep.csv");
  std::vector<double> levels;
  SweepOptions sw;
  sweep->add_option("--levels", levels, "coupon levels (default: the config grid)");
  sweep->add_option("--sims", sw.n_sims, "independent simulations")->capture_default_str();
  sweep->add_option("--customers", sw.n_customers, "customers per simulation")->capture_default_str();
  sweep->add_option("--horizon", sw.horizon, "steps per simulation")->capture_default_str();
  sweep->add_option("--window", sw.window, "final steps that enter the metrics")->capture_default_str();

  // collect
  auto* collect = app.add_subcommand("collect", "collect an offline dataset under a random policy");
  CollectOptions co;
  std::optional<std::size_t> collect_horizon;
  collect->add_option("--batch-size", co.batch_size, "customers per batch")->capture_default_str();
  collect->add_option("--batches", co.n_batches, "number of batches")->capture_default_str();
  collect->add_option("--horizon", collect_horizon, "steps per batch (default: config horizon)");

  // shared by train, eval, tune, analyze
  std::string dataset_path;
  std::string policy_kind, spec_file, name;
  std::optional<std::uint32_t> static_action;
  std::size_t n_agent = 1;
  TrainOptions tr;
  EvalOptions ev;
  std::vector<std::string> checkpoints, eval_files;

  auto* train = app.add_subcommand("train", "train agents on a dataset; writes checkpoints");
  train->add_option("--dataset", dataset_path, "dataset written by collect")->required();
  train->add_option("--policy", policy_kind, "static, random, lin-ts, lin-ucb, neural-boltzmann or dqn")->required();
  train->add_option("--spec", spec_file, "JSON overrides for the policy hyperparameters");
  train->add_option("--action", static_action, "coupon index for the static policy");
  train->add_option("--agents", n_agent, "independent agents")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--max-epochs", tr.max_epochs, "epoch cap for neural agents")->capture_default_str();
  train->add_option("--patience", tr.patience, "early-stopping patience")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints from the dataset snapshots");
  eval->add_option("--dataset", dataset_path, "dataset written by collect")->required();
  eval->add_option("--checkpoint", checkpoints, "checkpoints; the i-th uses evaluation stream i")->required();
  eval->add_option("--name", name, "policy label (default: derived from the checkpoint)");
  eval->add_option("--n-eval", ev.n_eval, "episodes per agent")->capture_default_str();
  eval->add_option("--t-eval", ev.t_eval, "steps per episode")->capture_default_str();

  auto* tune = app.add_subcommand("tune", "random search over the hyperparameter space");
  std::size_t n_trials = 10;
  tune->add_option("--dataset", dataset_path, "dataset written by collect")->required();
  tune->add_option("--policy", policy_kind, "lin-ts, lin-ucb, neural-boltzmann or dqn")->required();
  tune->add_option("--trials", n_trials, "sampled configurations")->capture_default_str();
  tune->add_option("--agents", n_agent, "agents per trial")->capture_default_str()->check(CLI::PositiveNumber);
  tune->add_option("--n-eval", ev.n_eval, "episodes per agent")->capture_default_str();
  tune->add_option("--t-eval", ev.t_eval, "steps per episode")->capture_default_str();

  auto* analyze = app.add_subcommand("analyze", "metrics, segments and feature ranking from eval outputs");
  std::string baseline = "random";
  std::size_t mi_samples = 10000;
  analyze->add_option("--dataset", dataset_path, "dataset written by collect")->required();
  analyze->add_option("--eval", eval_files, "eval JSON files, one per policy")->required();
  analyze->add_option("--baseline", baseline, "policy used for normalization")->capture_default_str();
  analyze->add_option("--mi-samples", mi_samples, "tuples used for the feature ranking")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (const char* o = std::getenv("RSIM_OUT"); out_opt->count() == 0 && o != nullptr && *o != '\0') g.out = o;

  try {
    auto* sub = app.get_subcommands().front();
    Run run(sub->get_name(), g);

    if (sub == sweep) {
      const SimConfig cfg = run.load_config();
      sw.levels = levels.empty() ? cfg.coupon_grid : levels;
      sw.seed = run.seed(cfg);
      sw.jobs = g.jobs;
      run.bind(cfg, sw.seed);
      run.emit("sweep.csv", sweep_csv(static_sweep(cfg, sw)));
      run.finish("sweep");
    } else if (sub == collect) {
      const SimConfig cfg = run.load_config();
      co.horizon = collect_horizon.value_or(cfg.horizon);
      co.seed = run.seed(cfg);
      co.jobs = g.jobs;
      run.bind(cfg, co.seed);
      const auto ds = collect_offline(cfg, co);
      const auto p = run.path("dataset.bin");
      fs::create_directories(p.parent_path());
      save_dataset(fs::path(p.string() + ".tmp"), ds);
      fs::rename(p.string() + ".tmp", p);
      run.note_file(p);
      run.emit("schema.json", json(ds.schema).dump(2) + "\n");
      run.finish("collect");
    } else if (sub == train) {
      const auto ds = run.load_dataset(dataset_path);
      const auto spec = resolve_spec(policy_kind, spec_file, static_action, ds);
      const std::uint64_t seed = run.seed(ds.config);
      run.bind(ds.config, seed);
      const auto label = policy_label(spec, ds.config.coupon_grid);
      json logs = json::array();
      for (std::size_t r = 0; r < n_agent; ++r) {
        const auto train_seed = derive_seed(seed, Stream::Training, r);
        TrainLog log;
        const auto policy = train_policy(spec, ds, tr, train_seed, &log);
        const auto p = run.path(label + "-agent" + std::to_string(r) + ".ckpt");
        fs::create_directories(p.parent_path());
        save_checkpoint(p.string() + ".tmp", *policy, ds.schema.hash(), train_seed);
        fs::rename(p.string() + ".tmp", p);
        run.note_file(p);
        logs.push_back({{"agent", r}, {"seed", train_seed}, {"epochs", log.epochs},
                        {"early_stopped", log.early_stopped}, {"losses", log.losses}});
      }
      run.emit(label + "-train.json", json{{"policy", label}, {"spec", spec}, {"agents", logs}}.dump(2) + "\n");
      run.finish("train-" + label);
    } else if (sub == eval) {
      const auto ds = run.load_dataset(dataset_path);
      const auto world = dataset_world(ds);
      const std::uint64_t seed = run.seed(ds.config);
      run.bind(ds.config, seed);
      ev.jobs = g.jobs;
      json runs = json::array();
      std::string label = name;
      for (std::size_t r = 0; r < checkpoints.size(); ++r) {
        require_file(checkpoints[r], "run `rsim train` first");
        const auto ck = load_checkpoint(checkpoints[r], ds.schema.hash());
        const auto l = policy_label(ck.spec, ds.config.coupon_grid);
        if (label.empty()) label = l;
        auto res = evaluate_policy(*ck.policy, ds, world, ev, derive_seed(seed, Stream::Evaluation, r));
        res.policy = label;
        runs.push_back(res);
      }
      run.emit("eval-" + label + ".json", json{{"policy", label},
                                               {"config_hash", hex64(ds.config.hash())},
                                               {"schema_hash", hex64(ds.schema.hash())},
                                               {"seed", seed},
                                               {"n_eval", ev.n_eval},
                                               {"t_eval", ev.t_eval},
                                               {"runs", runs}}
                                              .dump(2) +
                                              "\n");
      run.finish("eval-" + label);
    } else if (sub == tune) {
      const auto ds = run.load_dataset(dataset_path);
      const auto world = dataset_world(ds);
      const auto base = resolve_spec(policy_kind, "", std::nullopt, ds);
      const std::uint64_t seed = run.seed(ds.config);
      run.bind(ds.config, seed);
      const auto space = HyperParamSpace::for_kind(base.kind);
      const auto result = rsim::tune(base, space, n_trials, revenue_objective(ds, world, tr, ev, n_agent, seed, g.jobs), seed);
      const auto label = policy_label(base, ds.config.coupon_grid);
      run.emit("tune-" + label + ".jsonl", trials_jsonl(result));
      run.emit("tune-" + label + "-best.json", json(result.best).dump(2) + "\n");
      run.finish("tune-" + label);
    } else if (sub == analyze) {
      const auto ds = run.load_dataset(dataset_path);
      const auto world = dataset_world(ds);
      const std::uint64_t seed = run.seed(ds.config);
      run.bind(ds.config, seed);
      std::map<std::string, std::vector<EvalRun>> by_policy;
      std::vector<std::string> order;
      for (const auto& f : eval_files) {
        require_file(f, "run `rsim eval` first");
        const json j = json::parse(slurp(f));
        if (j.at("schema_hash").get<std::string>() != hex64(ds.schema.hash()))
          throw SchemaMismatch(f + " was produced from a different feature schema");
        const auto label = j.at("policy").get<std::string>();
        if (!by_policy.count(label)) order.push_back(label);
        for (const auto& r : j.at("runs")) by_policy[label].push_back(r.get<EvalRun>());
      }
      if (!by_policy.count(baseline))
        throw MissingArtifact("no eval file for baseline policy '" + baseline + "'; evaluate it and pass it to --eval");
      std::vector<MetricsReport> reports;
      std::vector<SegmentReport> segments;
      for (const auto& label : order) {
        reports.push_back(compute_metrics(label, by_policy[label], by_policy[baseline]));
        segments.push_back(segment_analysis(label, world, by_policy[label], ds));
      }
      run.emit("metrics.csv", metrics_csv(reports));
      run.emit("metrics.json", json(reports).dump(2) + "\n");
      run.emit("segments.csv", segment_csv(segments, ds.config.coupon_grid));
      run.emit("segments.json", json(segments).dump(2) + "\n");

      const std::size_t dim = ds.schema.dim(), total = ds.n_tuples();
      std::vector<std::size_t> pick(total);
      for (std::size_t i = 0; i < total; ++i) pick[i] = i;
      if (mi_samples > 0 && mi_samples < total) {
        Rng rng(derive_seed(seed, Stream::Subsample));
        for (std::size_t i = 0; i < mi_samples; ++i) std::swap(pick[i], pick[i + rng.below(total - i)]);
        pick.resize(mi_samples);
        std::sort(pick.begin(), pick.end());
      }
      std::vector<double> rows, rewards;
      rows.reserve(pick.size() * dim);
      for (auto i : pick) {
        const std::size_t u = i / ds.horizon(), t = i % ds.horizon();
        const auto h = ds.raw_features(u, t);
        rows.insert(rows.end(), h.begin(), h.end());
        rewards.push_back(ds.reward(u, t));
      }
      run.emit("features.csv", ranking_csv(rank_features(rows, rewards, ds.schema.names, 3, seed)));
      run.finish("analyze");
    }
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissingArtifact;
  } catch (const SchemaMismatch& e) {
    std::cerr << "error: schema mismatch: " << e.what() << '\n';
    return kSchemaMismatch;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
