#include <stdexcept>

#include "rsim/parallel.hpp"
#include "rsim/workflows.hpp"

namespace rsim {

namespace {

constexpr std::string_view kDatasetMagic = "RDAT";

BatchRecord collect_batch(const World& world, const CollectOptions& opt, std::size_t b) {
  const std::size_t n = opt.batch_size;
  const std::size_t offset = b * n;
  const auto pop = std::make_shared<const CustomerPopulation>(world.customers->slice(offset, n));
  Env env(world.cfg, world.catalog, pop, offset);
  env.reset(derive_seed(opt.seed, Stream::Batch, b));
  BatchSummarizer summary(*world.catalog, n);

  BatchRecord rec;
  rec.customer_offset = offset;
  rec.features.reserve((opt.horizon + 1) * n * kFeatureCount);
  rec.actions.reserve(opt.horizon * n);
  rec.rewards.reserve(opt.horizon * n);
  const auto push_features = [&] {
    for (std::size_t u = 0; u < n; ++u) {
      const auto f = summary.features(u);
      rec.features.insert(rec.features.end(), f.begin(), f.end());
    }
  };

  summary.observe(env, {});
  push_features();
  std::vector<std::uint32_t> actions(n);
  for (std::size_t t = 0; t < opt.horizon; ++t) {
    for (std::size_t u = 0; u < n; ++u) {
      Rng rng(derive_seed(opt.seed, Stream::Policy, offset + u, t));
      actions[u] = static_cast<std::uint32_t>(rng.below(env.n_actions()));
    }
    const auto res = env.step(actions);
    rec.actions.insert(rec.actions.end(), actions.begin(), actions.end());
    rec.rewards.insert(rec.rewards.end(), res.rewards.begin(), res.rewards.end());
    summary.observe(env, actions);
    push_features();
  }
  rec.snapshot = env.snapshot();
  rec.summary = summary.state();
  return rec;
}

}  // namespace

std::span<const double> OfflineDataset::raw_features(std::size_t u, std::size_t t) const {
  const std::size_t b = u / options.batch_size;
  const std::size_t k = u % options.batch_size;
  if (b >= batches.size() || t > options.horizon) throw std::out_of_range("dataset index out of range");
  return {batches[b].features.data() + (t * options.batch_size + k) * kFeatureCount, kFeatureCount};
}

std::uint32_t OfflineDataset::action(std::size_t u, std::size_t t) const {
  const std::size_t b = u / options.batch_size;
  return batches.at(b).actions.at(t * options.batch_size + u % options.batch_size);
}

double OfflineDataset::reward(std::size_t u, std::size_t t) const {
  const std::size_t b = u / options.batch_size;
  return batches.at(b).rewards.at(t * options.batch_size + u % options.batch_size);
}

OfflineDataset collect_offline(const SimConfig& cfg, const CollectOptions& opt) {
  if (opt.batch_size == 0 || opt.n_batches == 0 || opt.horizon == 0)
    throw std::invalid_argument("collection needs positive batch size, batch count and horizon");
  if (opt.horizon >= cfg.max_steps) throw std::invalid_argument("collection horizon must stay below max_steps");
  cfg.validate();
  const World world = make_world(cfg, opt.batch_size * opt.n_batches, opt.seed);

  OfflineDataset ds;
  ds.config = cfg;
  ds.options = opt;
  ds.batches.resize(opt.n_batches);
  parallel_for(opt.n_batches, opt.jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) ds.batches[b] = collect_batch(world, opt, b);
  });

  // Standardization statistics over the states that appear in tuples.
  std::vector<double> rows;
  std::vector<double> rewards;
  rows.reserve(ds.n_tuples() * kFeatureCount);
  rewards.reserve(ds.n_tuples());
  for (const auto& rec : ds.batches) {
    rows.insert(rows.end(), rec.features.begin(),
                rec.features.begin() + static_cast<std::ptrdiff_t>(opt.horizon * opt.batch_size * kFeatureCount));
    rewards.insert(rewards.end(), rec.rewards.begin(), rec.rewards.end());
  }
  ds.schema = FeatureSchema::fit(rows, rewards);
  return ds;
}

World dataset_world(const OfflineDataset& ds) {
  return make_world(ds.config, ds.options.batch_size * ds.options.n_batches, ds.options.seed);
}

void save_dataset(const std::filesystem::path& path, const OfflineDataset& ds) {
  BinaryWriter w(kDatasetMagic, OfflineDataset::kVersion);
  w.put_string(nlohmann::json(ds.config).dump());
  w.put<std::uint64_t>(ds.options.batch_size);
  w.put<std::uint64_t>(ds.options.n_batches);
  w.put<std::uint64_t>(ds.options.horizon);
  w.put<std::uint64_t>(ds.options.seed);
  write_schema(w, ds.schema);
  w.put<std::uint64_t>(ds.batches.size());
  for (const auto& rec : ds.batches) {
    w.put(rec.customer_offset);
    write_snapshot(w, rec.snapshot);
    write_summarizer(w, rec.summary);
    w.put_vector(rec.features);
    w.put_vector(rec.actions);
    w.put_vector(rec.rewards);
  }
  w.save(path);
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path, kDatasetMagic, OfflineDataset::kVersion);
  OfflineDataset ds;
  ds.config = parse_config(r.get_string());
  ds.options.batch_size = r.get<std::uint64_t>();
  ds.options.n_batches = r.get<std::uint64_t>();
  ds.options.horizon = r.get<std::uint64_t>();
  ds.options.seed = r.get<std::uint64_t>();
  ds.schema = read_schema(r);
  const auto n = r.get<std::uint64_t>();
  if (n != ds.options.n_batches) throw FormatError("dataset batch count mismatch");
  const std::size_t B = ds.options.batch_size, T = ds.options.horizon;
  ds.batches.resize(n);
  for (auto& rec : ds.batches) {
    rec.customer_offset = r.get<std::uint64_t>();
    rec.snapshot = read_snapshot(r);
    rec.summary = read_summarizer(r);
    rec.features = r.get_vector<double>();
    rec.actions = r.get_vector<std::uint32_t>();
    rec.rewards = r.get_vector<double>();
    if (rec.features.size() != (T + 1) * B * kFeatureCount || rec.actions.size() != T * B ||
        rec.rewards.size() != T * B || rec.summary.customers.size() != B)
      throw FormatError("dataset batch has inconsistent sizes");
  }
  r.expect_end();
  return ds;
}

TransitionBatch make_transitions(const OfflineDataset& ds, std::span<const std::size_t> customers, bool with_next) {
  TransitionBatch batch;
  batch.dim = ds.schema.dim();
  const std::size_t T = ds.horizon();
  const std::size_t n = customers.size() * T;
  batch.features.resize(n * batch.dim);
  batch.actions.resize(n);
  batch.rewards.resize(n);
  if (with_next) {
    batch.next_features.resize(n * batch.dim);
    batch.terminal.assign(n, 0);
  }
  std::size_t i = 0;
  for (auto u : customers) {
    for (std::size_t t = 0; t < T; ++t, ++i) {
      ds.schema.standardize(ds.raw_features(u, t), {batch.features.data() + i * batch.dim, batch.dim});
      if (with_next)
        ds.schema.standardize(ds.raw_features(u, t + 1), {batch.next_features.data() + i * batch.dim, batch.dim});
      batch.actions[i] = ds.action(u, t);
      batch.rewards[i] = ds.reward(u, t);
    }
  }
  return batch;
}

}  // namespace rsim
