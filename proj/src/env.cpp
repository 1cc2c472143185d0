#include "rsim/env.hpp"

#include <stdexcept>

#include "rsim/parallel.hpp"

namespace rsim {

std::vector<std::uint32_t> Observation::dense_quantities(std::size_t n_products) const {
  std::vector<std::uint32_t> q(n_products, 0);
  for (const auto& line : last_purchases) q.at(line.product) += line.quantity;
  return q;
}

double effective_price(double shelf_price, double coupon, bool redeemed) {
  if (!(shelf_price > 0.0)) throw std::domain_error("shelf price must be positive");
  if (!(coupon >= 0.0 && coupon < 1.0)) throw std::domain_error("coupon fraction must lie in [0,1)");
  return (1.0 - coupon * (redeemed ? 1.0 : 0.0)) * shelf_price;
}

Env::Env(std::shared_ptr<const SimConfig> cfg, std::shared_ptr<const Catalog> catalog,
         std::shared_ptr<const CustomerPopulation> customers, std::uint64_t customer_id_offset)
    : cfg_(std::move(cfg)),
      catalog_(std::move(catalog)),
      customers_(std::move(customers)),
      customer_id_offset_(customer_id_offset) {
  if (!cfg_ || !catalog_ || !customers_) throw std::invalid_argument("env requires config, catalog and customers");
  if (catalog_->n_products() != cfg_->n_products || catalog_->n_categories() != cfg_->n_categories)
    throw std::invalid_argument("catalog dimensions do not match the config");
  reset(cfg_->seed);
}

void Env::reset(std::uint64_t seed) {
  stream_key_ = seed;
  t_ = 1;
  Rng rng(derive_seed(stream_key_, Stream::Pricing, t_));
  pricing_ = initial_pricing(*catalog_, cfg_->pricing, rng);
  states_.assign(customers_->size(), CustomerState{});
  draw_marketing();
  rebuild_terms();
}

void Env::draw_marketing() {
  const std::size_t n = catalog_->n_products();
  product_marketing_.resize(n);
  Rng prod(derive_seed(stream_key_, Stream::ProductMarketing, t_));
  for (auto& x : product_marketing_) x = cfg_->marketing.product_max * prod.uniform();
  store_marketing_.resize(customers_->size());
  for (std::size_t u = 0; u < store_marketing_.size(); ++u) {
    Rng r(derive_seed(stream_key_, Stream::StoreMarketing, customer_id_offset_ + u, t_));
    store_marketing_[u] = cfg_->marketing.store_max * r.uniform();
  }
}

void Env::rebuild_terms() { terms_ = ProductTerms::build(*catalog_, pricing_.shelf_price, product_marketing_); }

double Env::coupon(std::uint32_t action) const {
  if (action >= cfg_->coupon_grid.size()) throw std::out_of_range("coupon action index outside the grid");
  return cfg_->coupon_grid[action];
}

StepResult Env::step(std::span<const std::uint32_t> actions, std::size_t jobs) {
  const std::size_t n = customers_->size();
  if (actions.size() != n) throw std::invalid_argument("step needs exactly one action per customer");
  if (t_ > cfg_->max_steps) throw HorizonError("cannot step past the configured maximum horizon");
  for (auto a : actions) (void)coupon(a);

  StepResult out;
  out.rewards.resize(n);
  out.outcomes.resize(n);
  std::vector<CustomerState> next(n);
  const ChoiceOptions options{cfg_->max_lambda, cfg_->quantity_cap};
  parallel_for(n, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    ChoiceWorkspace ws;
    for (std::size_t u = begin; u < end; ++u) {
      Rng rng(derive_seed(stream_key_, Stream::Choice, customer_id_offset_ + u, t_));
      auto r = simulate_customer_step(*catalog_, terms_, CustomerParams::of(*customers_, u), states_[u],
                                      cfg_->coupon_grid[actions[u]], store_marketing_[u], t_, options, rng, ws);
      out.rewards[u] = r.outcome.revenue;
      out.outcomes[u] = std::move(r.outcome);
      next[u] = std::move(r.next);
    }
  });
  states_ = std::move(next);

  ++t_;
  Rng price_rng(derive_seed(stream_key_, Stream::Pricing, t_));
  pricing_ = step_shelf_prices(pricing_, *catalog_, cfg_->pricing, price_rng);
  draw_marketing();
  rebuild_terms();
  return out;
}

Observation Env::observation(std::size_t customer) const {
  const auto& s = states_.at(customer);
  return {s.last_purchases, pricing_.shelf_price, store_marketing_[customer], product_marketing_};
}

EnvSnapshot Env::snapshot() const {
  return {stream_key_, customer_id_offset_, t_, pricing_, product_marketing_, store_marketing_, states_};
}

void Env::restore(const EnvSnapshot& s) {
  if (s.pricing.size() != catalog_->n_products() || s.customers.size() != customers_->size() ||
      s.product_marketing.size() != catalog_->n_products() || s.store_marketing.size() != customers_->size())
    throw std::invalid_argument("snapshot dimensions do not match this environment");
  if (s.customer_id_offset != customer_id_offset_)
    throw std::invalid_argument("snapshot belongs to a different customer batch");
  stream_key_ = s.stream_key;
  t_ = s.t;
  pricing_ = s.pricing;
  product_marketing_ = s.product_marketing;
  store_marketing_ = s.store_marketing;
  states_ = s.customers;
  rebuild_terms();
}

void write_snapshot(BinaryWriter& w, const EnvSnapshot& s) {
  w.put(s.stream_key);
  w.put(s.customer_id_offset);
  w.put(s.t);
  w.put_vector(s.pricing.regime);
  w.put_vector(s.pricing.depth);
  w.put_vector(s.pricing.shelf_price);
  w.put_vector(s.product_marketing);
  w.put_vector(s.store_marketing);
  w.put<std::uint64_t>(s.customers.size());
  for (const auto& c : s.customers) {
    w.put<std::uint8_t>(c.visited_prev ? 1 : 0);
    w.put(c.visit_prob_prev);
    w.put(c.store_score_prev);
    w.put_vector(c.last_purchases);
  }
}

EnvSnapshot read_snapshot(BinaryReader& r) {
  EnvSnapshot s;
  s.stream_key = r.get<std::uint64_t>();
  s.customer_id_offset = r.get<std::uint64_t>();
  s.t = r.get<std::uint64_t>();
  s.pricing.regime = r.get_vector<PriceRegime>();
  s.pricing.depth = r.get_vector<double>();
  s.pricing.shelf_price = r.get_vector<double>();
  s.product_marketing = r.get_vector<double>();
  s.store_marketing = r.get_vector<double>();
  const auto n = r.get<std::uint64_t>();
  s.customers.resize(n);
  for (auto& c : s.customers) {
    c.visited_prev = r.get<std::uint8_t>() != 0;
    c.visit_prob_prev = r.get<double>();
    c.store_score_prev = r.get<double>();
    c.last_purchases = r.get_vector<PurchaseLine>();
  }
  return s;
}

void save_snapshot(const std::filesystem::path& path, const EnvSnapshot& s) {
  BinaryWriter w("RSNP", EnvSnapshot::kVersion);
  write_snapshot(w, s);
  w.save(path);
}

EnvSnapshot load_snapshot(const std::filesystem::path& path) {
  auto r = BinaryReader::open(path, "RSNP", EnvSnapshot::kVersion);
  auto s = read_snapshot(r);
  r.expect_end();
  return s;
}

void to_json(nlohmann::json& j, const EnvSnapshot& s) {
  nlohmann::json customers = nlohmann::json::array();
  for (const auto& c : s.customers) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : c.last_purchases) lines.push_back({l.product, l.quantity});
    customers.push_back({{"visited_prev", c.visited_prev},
                         {"visit_prob_prev", c.visit_prob_prev},
                         {"store_score_prev", c.store_score_prev},
                         {"last_purchases", lines}});
  }
  j = {{"version", EnvSnapshot::kVersion},
       {"stream_key", s.stream_key},
       {"customer_id_offset", s.customer_id_offset},
       {"t", s.t},
       {"pricing", s.pricing},
       {"product_marketing", s.product_marketing},
       {"store_marketing", s.store_marketing},
       {"customers", customers}};
}

void from_json(const nlohmann::json& j, EnvSnapshot& s) {
  if (j.at("version").get<std::uint32_t>() != EnvSnapshot::kVersion) throw FormatError("snapshot version mismatch");
  s.stream_key = j.at("stream_key").get<std::uint64_t>();
  s.customer_id_offset = j.at("customer_id_offset").get<std::uint64_t>();
  s.t = j.at("t").get<std::uint64_t>();
  j.at("pricing").get_to(s.pricing);
  j.at("product_marketing").get_to(s.product_marketing);
  j.at("store_marketing").get_to(s.store_marketing);
  s.customers.clear();
  for (const auto& c : j.at("customers")) {
    CustomerState cs;
    cs.visited_prev = c.at("visited_prev").get<bool>();
    cs.visit_prob_prev = c.at("visit_prob_prev").get<double>();
    cs.store_score_prev = c.at("store_score_prev").get<double>();
    for (const auto& l : c.at("last_purchases"))
      cs.last_purchases.push_back({l.at(0).get<std::uint32_t>(), l.at(1).get<std::uint32_t>()});
    s.customers.push_back(std::move(cs));
  }
}

}  // namespace rsim
