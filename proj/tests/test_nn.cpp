#include <doctest.h>

#include <cmath>
#include <vector>

#include "rsim/nn.hpp"

using namespace rsim;

namespace {

// Largest relative error between analytic and central-difference gradients
// of 0.5 * ||f(x) - y||^2.
double gradient_check(Mlp net, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double eps = 1e-5) {
  const auto loss = [&](const Mlp& m) { return 0.5 * (m.forward(x) - y).squaredNorm(); };
  const auto g = net.backward(x, net.forward(x) - y);
  std::vector<double> analytic;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    analytic.insert(analytic.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    analytic.insert(analytic.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  auto p = net.flat_parameters();
  REQUIRE(p.size() == analytic.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + eps;
    net.set_flat_parameters(p);
    const double up = loss(net);
    p[i] = keep - eps;
    net.set_flat_parameters(p);
    const double down = loss(net);
    p[i] = keep;
    net.set_flat_parameters(p);
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-6});
    worst = std::max(worst, std::fabs(numeric - analytic[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
  const std::vector<std::size_t> sizes{4, 8, 3};
  const Mlp m = Mlp::zeros(sizes);
  Eigen::VectorXd x(4);
  x << 1, -2, 3, 0.5;
  CHECK(m.forward(x).isZero());
}

TEST_CASE("single layer is an affine map") {
  Rng r(1);
  const std::vector<std::size_t> sizes{3, 2};
  const Mlp m(sizes, r);
  Eigen::VectorXd x(3);
  x << 0.3, -1.0, 2.0;
  const Eigen::VectorXd expect = m.weights()[0] * x + m.biases()[0];
  CHECK((m.forward(x) - expect).norm() < 1e-15);
}

TEST_CASE("analytic gradients match finite differences") {
  const std::vector<std::vector<std::size_t>> shapes{{3, 2}, {5, 8, 2, 6}, {10, 16, 6}, {4, 32, 8, 3}};
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    Rng r(derive_seed(7, s));
    const Mlp m(shapes[s], r);
    Eigen::VectorXd x(static_cast<Eigen::Index>(shapes[s].front()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(shapes[s].back()));
    for (auto& v : x) v = r.normal();
    for (auto& v : y) v = r.normal();
    CHECK(gradient_check(m, x, y) < 1e-4);
  }
}

TEST_CASE("head training reduces the loss on the selected heads") {
  Rng r(3);
  const std::vector<std::size_t> sizes{2, 8, 3};
  Mlp m(sizes, r);
  Eigen::MatrixXd x(2, 64);
  std::vector<std::uint32_t> heads(64);
  std::vector<double> targets(64);
  for (int i = 0; i < 64; ++i) {
    x(0, i) = r.normal();
    x(1, i) = r.normal();
    heads[i] = static_cast<std::uint32_t>(i % 3);
    targets[i] = heads[i] + 0.5 * x(0, i);
  }
  const double before = m.head_loss(x, heads, targets);
  for (int k = 0; k < 500; ++k) m.train_heads(x, heads, targets, 0.1);
  CHECK(m.head_loss(x, heads, targets) < 0.1 * before);
}

TEST_CASE("forward rejects bad input and serializes") {
  Rng r(2);
  const std::vector<std::size_t> sizes{3, 4, 2};
  const Mlp m(sizes, r);
  CHECK_THROWS_AS(m.forward(Eigen::VectorXd::Zero(2)), std::invalid_argument);
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  bad(1) = std::nan("");
  CHECK_THROWS_AS(m.forward(bad), std::domain_error);

  BinaryWriter w("TEST", 1);
  m.write(w);
  BinaryReader rd(w.bytes(), "TEST", 1);
  CHECK(Mlp::read(rd) == m);
}
