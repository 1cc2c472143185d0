#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "rsim/kernels.hpp"

namespace rsim::kernels {

#ifdef RSIM_HAVE_AVX2
const KernelTable& avx2_table_impl() noexcept;
#endif

namespace {

bool cpu_has_avx2() noexcept {
#if defined(RSIM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  if (const char* forced = std::getenv("RSIM_SIMD"); forced != nullptr && std::string_view(forced) == "scalar")
    return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("kernel span length mismatch");
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#ifdef RSIM_HAVE_AVX2
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) noexcept {
  if (name == "scalar") {
    current().store(&scalar_table());
    return true;
  }
  if (name == "avx2") {
    if (const KernelTable* t = avx2_table()) {
      current().store(t);
      return true;
    }
  }
  return false;
}

void utilities(std::span<const double> marketing, std::span<const double> unobserved,
               std::span<const double> weighted_log_price, std::span<const double> price_factor,
               double feature_coef, double unobserved_loading, double price_coef, double log_coupon,
               std::span<double> out) {
  const std::size_t n = out.size();
  check_same(marketing.size(), n);
  check_same(unobserved.size(), n);
  check_same(weighted_log_price.size(), n);
  check_same(price_factor.size(), n);
  active().utilities(marketing.data(), unobserved.data(), weighted_log_price.data(), price_factor.data(), n,
                     feature_coef, unobserved_loading, price_coef, log_coupon, out.data());
}

double logsumexp(std::span<const double> x) { return active().logsumexp(x.data(), x.size()); }

void segment_logsumexp(std::span<const double> x, std::span<const std::uint32_t> offsets,
                       std::span<double> out) {
  if (offsets.size() != out.size() + 1) throw std::invalid_argument("segment offsets must have n+1 entries");
  if (!offsets.empty() && offsets.back() > x.size()) throw std::out_of_range("segment offsets exceed input");
  active().segment_logsumexp(x.data(), offsets.data(), out.size(), out.data());
}

void softmax(std::span<const double> x, std::span<double> out) {
  check_same(x.size(), out.size());
  if (x.empty()) return;
  const double lse = logsumexp(x);
  active().exp_shifted(x.data(), x.size(), lse, out.data());
}

}  // namespace rsim::kernels
