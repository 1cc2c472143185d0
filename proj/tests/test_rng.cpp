#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsim/rng.hpp"

using namespace rsim;

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, Stream::Catalog) != derive_seed(1, Stream::Customers));
  CHECK(derive_seed(1, Stream::Policy, 3, 4) != derive_seed(1, Stream::Policy, 4, 3));
  CHECK(derive_seed(1, Stream::Policy, 3) == derive_seed(1, Stream::Policy, 3));
}

TEST_CASE("uniform and below stay in range") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.below(6) < 6);
  }
}

TEST_CASE("shifted Poisson mean is one plus lambda within 3 standard errors") {
  for (double lambda : {0.3, 2.5, 12.0, 45.0}) {
    Rng r(derive_seed(11, static_cast<std::uint64_t>(lambda * 10)));
    const int n = 100000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double q = 1.0 + static_cast<double>(r.poisson(lambda));
      s += q;
      ss += q * q;
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    CHECK(std::fabs(mean - (1.0 + lambda)) < 3.0 * se);
  }
}

TEST_CASE("Gumbel draws have the Euler-Mascheroni mean shift") {
  Rng r(3);
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += r.gumbel(-2.0, 0.1);
  CHECK(s / n == doctest::Approx(-2.0 + 0.1 * 0.5772156649).epsilon(0.002));
}

TEST_CASE("normal draws have unit variance") {
  Rng r(5);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    ss += x * x;
  }
  CHECK(std::fabs(s / n) < 0.01);
  CHECK(ss / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("state restore continues the stream") {
  Rng a(9);
  for (int i = 0; i < 5; ++i) a();
  Rng b = Rng::from_state(a.state());
  for (int i = 0; i < 5; ++i) CHECK(a() == b());
}
