#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crmgrasp/nn.hpp"

using namespace crmgrasp;
using Catch::Approx;

namespace {

// Naive per-neuron forward pass, independent of the Eigen implementation.
Eigen::VectorXd naive_forward(const nn::Mlp& net, const Eigen::VectorXd& x) {
  std::vector<double> a(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& w = net.weights()[l];
    const auto& b = net.biases()[l];
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = b[r];
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = (l + 1 < net.layer_count()) ? std::tanh(s) : s;
    }
    a = z;
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) out[static_cast<Eigen::Index>(i)] = a[i];
  return out;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("mlp forward zero parameters") {
  nn::Mlp net({3, 4, 2});
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  REQUIRE(net.forward(x).isZero());
}

TEST_CASE("mlp forward identity linear layer") {
  nn::Mlp net({2, 2});
  net.weights()[0] = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  const Eigen::VectorXd y = net.forward(x);
  CHECK(y[0] == Approx(1.0));
  CHECK(y[1] == Approx(2.0));
}

TEST_CASE("mlp forward matches naive per-neuron oracle") {
  Rng rng(7);
  const nn::Mlp net = nn::Mlp::glorot({5, 8, 6, 3}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x[i] = rng.normal();
    const Eigen::VectorXd got = net.forward(x);
    const Eigen::VectorXd want = naive_forward(net, x);
    for (int i = 0; i < 3; ++i) CHECK(got[i] == Approx(want[i]).margin(1e-12));
  }
}

TEST_CASE("mlp forward rejects dimension mismatch with shape diagnostic") {
  nn::Mlp net({3, 2});
  Eigen::VectorXd x(4);
  x.setZero();
  CHECK_THROWS_WITH(net.forward(x), Catch::Matchers::ContainsSubstring("input size 4"));
}

TEST_CASE("mlp backward zero upstream gradient") {
  Rng rng(3);
  nn::Mlp net = nn::Mlp::glorot({3, 5, 2}, rng);
  nn::Mlp::Trace tr;
  Eigen::VectorXd x(3);
  x << 0.2, -0.1, 0.7;
  net.forward(x, &tr);
  const nn::MlpGrads g = net.backward(tr, Eigen::VectorXd::Zero(2));
  for (const auto& m : g.w) CHECK(m.isZero());
  for (const auto& v : g.b) CHECK(v.isZero());
}

TEST_CASE("mlp backward single linear layer is an outer product") {
  nn::Mlp net({3, 2});
  net.weights()[0].setRandom();
  Eigen::VectorXd x(3), g(2);
  x << 1.0, 2.0, 3.0;
  g << 0.5, -1.5;
  nn::Mlp::Trace tr;
  net.forward(x, &tr);
  const nn::MlpGrads grads = net.backward(tr, g);
  const Eigen::MatrixXd outer = g * x.transpose();
  CHECK((grads.w[0] - outer).cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-14));
  CHECK((grads.b[0] - g).cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-14));
}

TEST_CASE("mlp gradients match central finite differences") {
  Rng rng(11);
  // random small nets: <= 3 hidden layers, <= 32 units
  const std::vector<std::vector<int>> shapes = {{4, 16, 16, 2}, {3, 32, 1}, {2, 8, 8, 8, 2}};
  const double h = 1e-5;
  for (const auto& shape : shapes) {
    nn::Mlp net = nn::Mlp::glorot(shape, rng);
    Eigen::VectorXd x(shape.front());
    for (int i = 0; i < shape.front(); ++i) x[i] = rng.normal();
    Eigen::VectorXd go(shape.back());
    for (int i = 0; i < shape.back(); ++i) go[i] = rng.normal();

    nn::Mlp::Trace tr;
    net.forward(x, &tr);
    const nn::MlpGrads grads = net.backward(tr, go);

    auto loss = [&]() { return go.dot(net.forward(x)); };
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      auto& w = net.weights()[l];
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        const double orig = w.data()[k];
        w.data()[k] = orig + h;
        const double up = loss();
        w.data()[k] = orig - h;
        const double dn = loss();
        w.data()[k] = orig;
        worst = std::max(worst, rel_err(grads.w[l].data()[k], (up - dn) / (2 * h)));
      }
      auto& b = net.biases()[l];
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double orig = b[k];
        b[k] = orig + h;
        const double up = loss();
        b[k] = orig - h;
        const double dn = loss();
        b[k] = orig;
        worst = std::max(worst, rel_err(grads.b[l][k], (up - dn) / (2 * h)));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("adam zero gradients leave parameters unchanged") {
  Rng rng(5);
  nn::Mlp net = nn::Mlp::glorot({2, 4, 1}, rng);
  const auto w0 = net.weights();
  nn::Adam opt(net, {});
  REQUIRE(opt.step(net, net.zero_grads()));
  for (std::size_t l = 0; l < w0.size(); ++l)
    CHECK((net.weights()[l] - w0[l]).cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-15));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam first step closed form") {
  // scalar parameter, gradient 1.0, lr 1e-3: bias-corrected moments are both
  // 1, so the delta is -lr / (1 + eps) ~ -1e-3
  nn::Mlp net({1, 1});
  nn::Adam opt(net, {.lr = 1e-3});
  nn::MlpGrads g = net.zero_grads();
  g.w[0](0, 0) = 1.0;
  REQUIRE(opt.step(net, g));
  CHECK(net.weights()[0](0, 0) == Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam drives a quadratic monotonically toward zero") {
  // f(w) = w^2 from w = 1, gradient 2w
  nn::Mlp net({1, 1});
  net.weights()[0](0, 0) = 1.0;
  nn::Adam opt(net, {.lr = 5e-3});
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    nn::MlpGrads g = net.zero_grads();
    g.w[0](0, 0) = 2.0 * net.weights()[0](0, 0);
    REQUIRE(opt.step(net, g));
    const double cur = std::abs(net.weights()[0](0, 0));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("adam skips non-finite gradients") {
  nn::Mlp net({1, 1});
  nn::MlpGrads g = net.zero_grads();
  g.w[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  nn::Adam opt(net, {});
  CHECK_FALSE(opt.step(net, g));
  CHECK(opt.step_count() == 0);
  CHECK(net.weights()[0](0, 0) == 0.0);
}

TEST_CASE("policy sample collapses to the mean at the log_std floor") {
  Rng rng(17);
  nn::Mlp net({2, 3});
  net.biases()[0] << 0.5, -0.25, 1.0;
  nn::GaussianPolicy pi(std::move(net), 3);
  pi.log_std().setConstant(-30.0);  // clamps to -5
  const auto s = pi.sample(Eigen::VectorXd::Zero(2), rng);
  // sigma = e^-5, keep each dim within 3 sigma of the mean (w.h.p. margin)
  CHECK(std::abs(s.action[0] - 0.5) < 5 * std::exp(-5.0));
  CHECK(std::abs(s.action[1] + 0.25) < 5 * std::exp(-5.0));
  CHECK(std::abs(s.action[2] - 1.0) < 5 * std::exp(-5.0));
}

TEST_CASE("standard normal log density at the mode") {
  for (int d = 1; d <= 4; ++d) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    CHECK(nn::gaussian_log_prob(zero, zero, zero) ==
          Approx(-0.5 * d * std::log(2.0 * M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("policy sampling empirical moments") {
  Rng rng(23);
  nn::Mlp net({1, 1});  // zero net: mean 0
  nn::GaussianPolicy pi(std::move(net), 1);
  const Eigen::VectorXd obs = Eigen::VectorXd::Zero(1);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = pi.sample(obs, rng).action[0];
    sum += a;
    sumsq += a * a;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(stddev - 1.0) < 0.02);
}

TEST_CASE("log_prob density integrates to one in 1-d") {
  Rng rng(29);
  nn::Mlp net = nn::Mlp::glorot({1, 4, 1}, rng);
  nn::GaussianPolicy pi(std::move(net), 1);
  pi.log_std().setConstant(-0.3);
  const Eigen::VectorXd obs = Eigen::VectorXd::Constant(1, 0.4);
  const double mean = pi.mean_action(obs)[0];
  const double lo = mean - 8.0, hi = mean + 8.0;
  const int n = 20000;
  const double dx = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd a(1);
    a << lo + (i + 0.5) * dx;
    integral += std::exp(pi.log_prob(obs, a)) * dx;
  }
  CHECK(integral == Approx(1.0).margin(1e-3));
}

TEST_CASE("sampling is deterministic for a fixed rng state") {
  nn::Mlp net({2, 2});
  net.weights()[0].setIdentity();
  nn::GaussianPolicy pi(std::move(net), 2);
  Eigen::VectorXd obs(2);
  obs << 0.3, -0.9;
  Rng a(99), b(99);
  const auto sa = pi.sample(obs, a);
  const auto sb = pi.sample(obs, b);
  CHECK(sa.action == sb.action);
  CHECK(sa.log_prob == sb.log_prob);
}

TEST_CASE("checkpoint binary round trip") {
  Rng rng(31);
  nn::Mlp actor = nn::Mlp::glorot({8, 64, 64, 3}, rng);
  nn::Mlp critic = nn::Mlp::glorot({8, 64, 64, 1}, rng);
  Eigen::VectorXd ls(3);
  ls << -0.5, 0.1, 0.0;
  const std::string path = "ckpt_test.bin";
  nn::save_checkpoint(path, {{"actor", actor, true, ls}, {"critic", critic, false, {}}});
  const auto loaded = nn::load_checkpoint(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].name == "actor");
  CHECK(loaded[0].has_log_std);
  CHECK(loaded[0].log_std == ls);
  for (std::size_t l = 0; l < actor.layer_count(); ++l) {
    CHECK(loaded[0].net.weights()[l] == actor.weights()[l]);
    CHECK(loaded[0].net.biases()[l] == actor.biases()[l]);
  }
  CHECK(loaded[1].net.layer_sizes() == critic.layer_sizes());
  const auto j = nn::checkpoint_to_json(loaded);
  CHECK(j["entries"].size() == 2);
  std::remove(path.c_str());
}
