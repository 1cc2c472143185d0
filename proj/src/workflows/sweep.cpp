#include <sstream>
#include <stdexcept>

#include "rsim/parallel.hpp"
#include "rsim/workflows.hpp"

namespace rsim {

World make_world(const SimConfig& cfg, std::size_t n_customers, std::uint64_t seed) {
  World w;
  w.cfg = std::make_shared<const SimConfig>(cfg);
  w.catalog = std::make_shared<const Catalog>(generate_catalog(cfg, derive_seed(seed, Stream::Catalog)));
  w.customers = std::make_shared<const CustomerPopulation>(
      generate_customers(cfg, n_customers, derive_seed(seed, Stream::Customers)));
  return w;
}

std::vector<double> mean_price_coefficients(const Catalog& catalog, const CustomerPopulation& pop) {
  const double factor = catalog.mean_price_factor();
  std::vector<double> c(pop.size());
  for (std::size_t u = 0; u < c.size(); ++u) c[u] = pop.price_coef[u] * factor;
  return c;
}

SweepResult static_sweep(const SimConfig& base, const SweepOptions& opt) {
  if (opt.levels.empty()) throw std::invalid_argument("sweep needs at least one coupon level");
  if (opt.n_sims == 0 || opt.n_customers == 0) throw std::invalid_argument("sweep needs simulations and customers");
  if (opt.window == 0 || opt.window > opt.horizon) throw std::invalid_argument("metric window must lie in [1, horizon]");
  SimConfig cfg = base;
  cfg.coupon_grid = opt.levels;
  cfg.max_steps = std::max<std::size_t>(cfg.max_steps, opt.horizon);
  cfg.validate();
  const auto shared_cfg = std::make_shared<const SimConfig>(cfg);
  const auto catalog = std::make_shared<const Catalog>(generate_catalog(cfg, derive_seed(opt.seed, Stream::Catalog)));

  const std::size_t n_levels = opt.levels.size();
  std::vector<double> revenue(n_levels * opt.n_sims), retention(n_levels * opt.n_sims);
  parallel_for(opt.n_sims, opt.jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const auto pop = std::make_shared<const CustomerPopulation>(
          generate_customers(cfg, opt.n_customers, derive_seed(opt.seed, Stream::Customers, s)));
      for (std::size_t l = 0; l < n_levels; ++l) {
        Env env(shared_cfg, catalog, pop);
        env.reset(derive_seed(opt.seed, Stream::Batch, s));
        const std::vector<std::uint32_t> actions(opt.n_customers, static_cast<std::uint32_t>(l));
        std::vector<double> rev(opt.n_customers, 0.0);
        std::vector<std::uint8_t> active(opt.n_customers, 0);
        for (std::size_t t = 0; t < opt.horizon; ++t) {
          const auto res = env.step(actions);
          if (t + opt.window < opt.horizon) continue;
          for (std::size_t u = 0; u < opt.n_customers; ++u) {
            rev[u] += res.rewards[u];
            active[u] |= res.outcomes[u].visited ? 1 : 0;
          }
        }
        double r = 0.0, a = 0.0;
        for (std::size_t u = 0; u < opt.n_customers; ++u) {
          r += rev[u];
          a += active[u];
        }
        revenue[l * opt.n_sims + s] = r / static_cast<double>(opt.n_customers);
        retention[l * opt.n_sims + s] = a / static_cast<double>(opt.n_customers);
      }
    }
  });

  SweepResult out;
  for (std::size_t l = 0; l < n_levels; ++l) {
    SweepLevel lv;
    lv.level = opt.levels[l];
    lv.revenue.assign(revenue.begin() + static_cast<std::ptrdiff_t>(l * opt.n_sims),
                      revenue.begin() + static_cast<std::ptrdiff_t>((l + 1) * opt.n_sims));
    lv.retention.assign(retention.begin() + static_cast<std::ptrdiff_t>(l * opt.n_sims),
                        retention.begin() + static_cast<std::ptrdiff_t>((l + 1) * opt.n_sims));
    out.levels.push_back(std::move(lv));
  }
  return out;
}

std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "level,revenue_mean,revenue_se,retention_mean,retention_se\n";
  for (const auto& lv : r.levels)
    os << format_double(lv.level) << ',' << format_double(mean_of(lv.revenue)) << ','
       << format_double(standard_error(lv.revenue)) << ',' << format_double(mean_of(lv.retention)) << ','
       << format_double(standard_error(lv.retention)) << '\n';
  return os.str();
}

}  // namespace rsim
