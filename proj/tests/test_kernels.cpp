#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rsim/kernels.hpp"
#include "rsim/rng.hpp"

using namespace rsim;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale) {
  Rng r(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * r.normal();
  return v;
}

double naive_logsumexp(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += std::exp(static_cast<long double>(v));
  return static_cast<double>(std::log(s));
}

}  // namespace

TEST_CASE("logsumexp matches direct summation") {
  for (std::size_t n : {1u, 3u, 4u, 7u, 64u, 1001u}) {
    const auto x = random_vector(n, n, 2.0);
    CHECK(kernels::logsumexp(x) == doctest::Approx(naive_logsumexp(x)).epsilon(1e-13));
  }
}

TEST_CASE("logsumexp and softmax are shift invariant") {
  const auto x = random_vector(257, 1, 3.0);
  std::vector<double> p(x.size()), q(x.size());
  kernels::softmax(x, p);
  for (double c : {-700.0, -5.0, 0.5, 300.0}) {
    std::vector<double> y(x);
    for (auto& v : y) v += c;
    CHECK(std::fabs(kernels::logsumexp(y) - c - kernels::logsumexp(x)) < 1e-12 * std::max(1.0, std::fabs(c)));
    kernels::softmax(y, q);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::fabs(p[i] - q[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("logsumexp edge cases") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(kernels::logsumexp(std::vector<double>{-inf, -inf}) == -inf);
  CHECK(kernels::logsumexp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(std::isnan(kernels::logsumexp(std::vector<double>{1.0, std::nan("")})));
}

TEST_CASE("scalar and AVX2 tables agree") {
  const kernels::KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this host; equivalence test skipped");
    return;
  }
  const auto& ref = kernels::scalar_table();
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 13u, 100u, 2514u}) {
    const auto x = random_vector(n, 10 + n, 1.0);
    const auto z = random_vector(n, 20 + n, 1.0);
    const auto wl = random_vector(n, 30 + n, 1.0);
    const auto w = random_vector(n, 40 + n, 0.2);
    std::vector<double> a(n), b(n);
    ref.utilities(x.data(), z.data(), wl.data(), w.data(), n, 0.5, 0.3, -1.2, std::log1p(-0.3), a.data());
    simd->utilities(x.data(), z.data(), wl.data(), w.data(), n, 0.5, 0.3, -1.2, std::log1p(-0.3), b.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-14));

    CHECK(simd->logsumexp(x.data(), n) == doctest::Approx(ref.logsumexp(x.data(), n)).epsilon(1e-13));

    std::vector<double> ea(n), eb(n);
    ref.exp_shifted(x.data(), n, 0.7, ea.data());
    simd->exp_shifted(x.data(), n, 0.7, eb.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(eb[i] == doctest::Approx(ea[i]).epsilon(1e-13));
  }

  std::vector<std::uint32_t> offsets{0, 1, 4, 4 + 8, 4 + 8 + 9, 40};
  const auto x = random_vector(40, 99, 4.0);
  std::vector<double> sa(5), sb(5);
  ref.segment_logsumexp(x.data(), offsets.data(), 5, sa.data());
  simd->segment_logsumexp(x.data(), offsets.data(), 5, sb.data());
  for (int s = 0; s < 5; ++s) CHECK(sb[s] == doctest::Approx(sa[s]).epsilon(1e-13));
}

TEST_CASE("table selection") {
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("sse9"));
  if (kernels::avx2_table() != nullptr) CHECK(kernels::select("avx2"));
}
