#include <doctest.h>

#include <cmath>

#include "acefr/adapt.hpp"
#include "acefr/spacecraft.hpp"
#include "oracles.hpp"

using namespace acefr;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

MlpController random_net(const std::vector<int>& sizes, SeededStream& rng) {
  MlpController net(sizes, Activation::tanh);
  for (int l = 1; l <= net.num_layers(); ++l) {
    net.weight(l) = rng.gaussian_matrix(net.weight(l).rows(), net.weight(l).cols(), 0.6);
    if (l < net.num_layers()) net.bias(l) = rng.gaussian_matrix(net.bias(l).size(), 1, 0.2);
  }
  return net;
}

ClosedLoop scalar_loop() {
  ClosedLoop loop;
  loop.plant = ControlAffinePlant::with_constant_input(
      [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, Mat::Identity(1, 1));
  loop.reference = Reference::constant(vec({0.0}));
  return loop;
}

}  // namespace

TEST_CASE("backpropagated error with identity activations") {
  MlpController net({2, 2, 2, 2}, Activation::identity);
  net.weight(1) << 1, 2, 3, 4;
  net.weight(2) << 0.5, -1, 2, 0;
  net.weight(3) << 1, 1, 0, 3;
  ForwardCache cache;
  const Vec zeta = vec({0.2, -0.1});
  forward(net, zeta, cache);
  const Vec d3 = vec({1.0, 2.0});
  // W3' d3 = [1, 7]; W2' [1, 7] = [14.5, -1].
  const BackpropResult at2 = backprop_delta(net, cache, 2, d3);
  CHECK((at2.delta - vec({1.0, 7.0})).norm() < 1e-15);
  const BackpropResult at1 = backprop_delta(net, cache, 1, d3);
  CHECK((at1.delta - vec({14.5, -1.0})).norm() < 1e-15);
  CHECK(at1.z_prev == zeta);
  CHECK(backprop_delta(net, cache, 3, d3).delta == d3);
}

TEST_CASE("adaptive direction is the negative gradient of the virtual loss") {
  // J(W) = (P e)' g M u_NN(zeta; W) with e held fixed; -delta_l z_{l-1}' = dJ/dW_l.
  SeededStream rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_in = 3 + static_cast<int>(rng.uniform(0.0, 3.0));
    const int h1 = 2 + static_cast<int>(rng.uniform(0.0, 4.0));
    const int h2 = 2 + static_cast<int>(rng.uniform(0.0, 4.0));
    const int n_out = 2;
    MlpController net = random_net({n_in, h1, h2, n_out}, rng);
    const Mat g = rng.gaussian_matrix(4, 3, 1.0);
    const Mat m = rng.gaussian_matrix(3, n_out, 1.0);
    Mat p = rng.gaussian_matrix(4, 4, 1.0);
    p = p * p.transpose() + Mat::Identity(4, 4);
    const Vec e = rng.gaussian_matrix(4, 1, 0.5);
    const Vec zeta = rng.gaussian_matrix(n_in, 1, 0.7);
    const Vec w_out = (g * m).transpose() * (p * e);
    auto virtual_loss = [&] {
      ForwardCache c;
      return w_out.dot(forward(net, zeta, c));
    };
    ForwardCache cache;
    forward(net, zeta, cache);
    const Vec d_out = output_delta(g, p, e, m);
    for (int layer = 1; layer <= net.num_layers(); ++layer) {
      const BackpropResult bp = backprop_delta(net, cache, layer, d_out);
      const Mat analytic = -bp.delta * bp.z_prev.transpose();
      Mat fd(analytic.rows(), analytic.cols());
      for (Eigen::Index i = 0; i < fd.rows(); ++i) {
        for (Eigen::Index j = 0; j < fd.cols(); ++j) {
          fd(i, j) = oracle::central_diff(virtual_loss, net.weight(layer)(i, j), 1e-6);
        }
      }
      CAPTURE(trial);
      CAPTURE(layer);
      CHECK((analytic - fd).norm() / fd.norm() < 1e-5);
    }
  }
}

TEST_CASE("adaptive law with zero error is pure leakage") {
  MlpController net({2, 3, 1}, Activation::tanh);
  SeededStream rng(8);
  net.weight(1) = project_spectral(rng.gaussian_matrix(3, 2, 0.5), 0.9);
  net.weight(2) = project_spectral(rng.gaussian_matrix(1, 3, 0.5), 0.9);
  const double gamma = 0.3;
  for (int layer : {1, 2}) {
    NetLoopConfig cfg;
    cfg.gains = NominalGains::from_gain(Mat::Identity(1, 1));
    cfg.adapt = AdaptiveConfig::uniform(net, layer, 5.0, gamma);
    cfg.adapt->project_each_step = false;
    const SimTrace tr = run_adaptive_closed_loop(scalar_loop(), net, cfg, vec({0.0}), 10.0, 0.01);
    REQUIRE(tr.ok);
    const double w0 = net.weight(layer).norm();
    double worst = 0.0;
    for (const TraceRow& r : tr.rows) {
      CHECK(r.err_norm == 0.0);
      worst = std::max(worst, std::abs(r.w_frob - w0 * std::exp(-gamma * r.t)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("adapt_rate and configuration checks") {
  const MlpController net({2, 3, 1}, Activation::tanh);
  AdaptiveConfig cfg = AdaptiveConfig::uniform(net, 1, 2.0, 0.5);
  CHECK_NOTHROW(cfg.validate(net));
  const Mat w = Mat::Ones(3, 2);
  const Mat rate = adapt_rate(vec({1, 0, -1}), vec({2, 3}), w, cfg);
  Mat want(3, 2);
  want << 4 - 0.5, 6 - 0.5, -0.5, -0.5, -4 - 0.5, -6 - 0.5;
  CHECK((rate - want).norm() < 1e-15);
  CHECK_THROWS_AS(adapt_rate(vec({1, 0}), vec({2, 3}), w, cfg), std::invalid_argument);
  cfg.layer = 3;
  CHECK_THROWS_AS(cfg.validate(net), std::invalid_argument);
  cfg = AdaptiveConfig::uniform(net, 2, 1.0, -0.1);
  CHECK_THROWS_AS(cfg.validate(net), std::invalid_argument);
}

TEST_CASE("projection keeps the adapted layer inside the spectral bound") {
  const spacecraft::CaseStudy cs = spacecraft::build_case_study(spacecraft::Variant::faulted);
  SeededStream init(3);
  const MlpController net = MlpController::glorot(cs.net_sizes, Activation::tanh, init, 0.99);
  NetLoopConfig cfg = cs.loop_config(net, 3);
  cfg.adapt->gain.setConstant(1e4);
  const SimTrace tr = run_adaptive_closed_loop(cs.loop, net, cfg, cs.x0, 20.0, cs.dt);
  REQUIRE(tr.ok);
  // ||W||_F <= sqrt(rank) ||W||_2 <= sqrt(15) * 0.99.
  for (const TraceRow& r : tr.rows) CHECK(r.w_frob <= std::sqrt(15.0) * 0.99 + 1e-9);
}

TEST_CASE("net loop with a frozen zero net equals the nominal loop") {
  const spacecraft::CaseStudy cs = spacecraft::build_case_study(spacecraft::Variant::faulted);
  const MlpController zero(cs.net_sizes, Activation::tanh);
  const SimTrace with_net =
      run_adaptive_closed_loop(cs.loop, zero, cs.loop_config(zero, std::nullopt), cs.x0, 15.0, cs.dt);
  NominalPolicy nominal(cs.gains, pseudo_inverse(cs.output_map));
  const SimTrace alone = simulate_closed_loop(cs.loop, nominal, cs.x0, 15.0, cs.dt);
  REQUIRE(with_net.rows.size() == alone.rows.size());
  for (std::size_t i = 0; i < alone.rows.size(); ++i) {
    REQUIRE((with_net.rows[i].x - alone.rows[i].x).norm() < 1e-14);
  }
}
