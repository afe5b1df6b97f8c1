#include <doctest.h>

#include <cmath>

#include "acefr/controllers.hpp"
#include "acefr/spacecraft.hpp"

using namespace acefr;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Mat mat1(double v) {
  Mat m(1, 1);
  m << v;
  return m;
}

ControlAffinePlant scalar_plant(double g) {
  return ControlAffinePlant::with_constant_input(
      [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, mat1(g));
}

}  // namespace

TEST_CASE("nominal control examples") {
  const auto p = scalar_plant(2.0);
  const NominalGains k3 = NominalGains::from_gain(mat1(3.0));
  CHECK(std::abs(nominal_control(p, k3, 0.0, vec({0.5}), vec({0.0}), vec({1.0}))[0] + 0.25) < 1e-15);
  CHECK(nominal_control(p, k3, 0.0, vec({0.0}), vec({0.0}), vec({0.0})).isZero(0.0));

  // At x = x_d the spacecraft command is pure feedforward and e' = 0.
  const auto params = spacecraft::Params::defaults();
  const auto sc = spacecraft::make_plant(params);
  const NominalGains gains = spacecraft::make_gains(params);
  const Reference ref = spacecraft::make_reference();
  Vec xd(6), xd_dot(6);
  ref.eval(0.0, xd, xd_dot);
  const Vec u = nominal_control(sc, gains, 0.0, xd, xd, xd_dot);
  CHECK((plant_deriv(sc, {}, {}, 0.0, xd, u) - xd_dot).norm() < 1e-12);
}

TEST_CASE("nominal control rejects commands outside the image of g") {
  Mat g(2, 1);
  g << 1.0, 0.0;
  const auto p = ControlAffinePlant::with_constant_input(
      [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, g);
  const NominalGains gains = NominalGains::from_gain(Mat::Identity(2, 2));
  CHECK_THROWS_AS(nominal_control(p, gains, 0.0, vec({0.0, 1.0}), vec({0.0, 0.0}), vec({0.0, 0.0})),
                  ImageError);
}

TEST_CASE("ideal compensator examples") {
  CHECK(ideal_compensator(vec({1.0, 2.0}), vec({1.0, 1.0}), vec({0.3, -0.1})) == vec({-0.3, 0.1}));
  CHECK(ideal_compensator(vec({1.0}), vec({1.0}), vec({0.0})).isZero(0.0));
  CHECK(std::abs(ideal_compensator(vec({1.0}), vec({0.5}), vec({0.0}))[0] - 1.0) < 1e-15);
  CHECK_THROWS_AS(ideal_compensator(vec({1.0}), vec({0.0}), vec({0.0})), std::domain_error);
}

TEST_CASE("ideal compensator satisfies its defining relation") {
  SeededStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Vec eta(4), u(4), d(4);
    for (int k = 0; k < 4; ++k) {
      eta[k] = rng.uniform(0.05, 1.0);
      u[k] = rng.gaussian(0.0, 1.0);
      d[k] = rng.gaussian(0.0, 0.3);
    }
    const Vec c = ideal_compensator(u, eta, d);
    const Vec beta = eta.array() - 1.0;
    CHECK((c + beta.cwiseProduct(u + c) + d).norm() < 1e-12);
  }
}

TEST_CASE("mapped compensator restores the nominal torque") {
  const auto params = spacecraft::Params::defaults();
  const Mat b = params.allocation;
  Mat g = Mat::Zero(6, 4);
  g.bottomRows(3) = params.inertia.inverse() * b;
  const Mat m = spacecraft::output_map(params);
  SeededStream rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Vec eta(4), d(4);
    for (int k = 0; k < 4; ++k) {
      eta[k] = rng.uniform(0.05, 1.0);
      d[k] = rng.gaussian(0.0, 0.02);
    }
    const Vec v = rng.gaussian_matrix(3, 1, 0.1);
    const Vec c = ideal_compensator_mapped(g, eta, m, v, d);
    const Vec delivered = g * (eta.asDiagonal() * (m * (v + c)) + d);
    CHECK((delivered - g * (m * v)).norm() < 1e-12);
  }
  // With M = I and full column rank g the two forms agree.
  const Mat g4 = Mat::Identity(4, 4);
  const Vec eta = vec({0.3, 0.7, 1.0, 0.5});
  const Vec u = vec({0.1, -0.2, 0.3, 0.05});
  const Vec d = vec({0.01, 0.0, -0.02, 0.003});
  CHECK((ideal_compensator_mapped(g4, eta, g4, u, d) - ideal_compensator(u, eta, d)).norm() < 1e-12);
}

TEST_CASE("FDI-reconfigured nominal control") {
  const auto params = spacecraft::Params::defaults();
  const auto sc = spacecraft::make_plant(params);
  const NominalGains gains = spacecraft::make_gains(params);
  const Reference ref = spacecraft::make_reference();
  SeededStream rng(2);
  FdiEstimate healthy;
  healthy.eta_hat = Vec::Ones(4);
  for (int trial = 0; trial < 20; ++trial) {
    Vec xd(6), xd_dot(6);
    ref.eval(60.0 * rng.uniform(), xd, xd_dot);
    const Vec x = xd + rng.gaussian_matrix(6, 1, 0.1);
    REQUIRE(fdi_nominal_control(sc, gains, healthy, 0.0, x, xd, xd_dot) ==
            nominal_control(sc, gains, 0.0, x, xd, xd_dot));
  }

  FdiEstimate half;
  half.eta_hat = vec({0.5});
  const NominalGains k1 = NominalGains::from_gain(mat1(1.0));
  // v = xd' - f - Ke = 1 at e = 0.
  CHECK(std::abs(fdi_nominal_control(scalar_plant(1.0), k1, half, 0.0, vec({0.0}), vec({0.0}),
                                     vec({1.0}))[0] -
                 2.0) < 1e-12);

  // With an exact estimate the delivered actuation equals the nominal command.
  FdiEstimate exact;
  exact.eta_hat = vec({1.0, 0.25, 0.5, 1.0});
  const FaultProfile fault({{1, 0.0, 10.0, 0.25}, {2, 0.0, 10.0, 0.5}});
  for (int trial = 0; trial < 20; ++trial) {
    Vec xd(6), xd_dot(6);
    ref.eval(60.0 * rng.uniform(), xd, xd_dot);
    const Vec x = xd + rng.gaussian_matrix(6, 1, 0.1);
    const Vec u = fdi_nominal_control(sc, gains, exact, 1.0, x, xd, xd_dot);
    const Vec edot = plant_deriv(sc, fault, {}, 1.0, x, u) - xd_dot;
    CHECK((edot + gains.K * (x - xd)).norm() < 1e-12);
  }

  FdiEstimate bad;
  bad.eta_hat = vec({1.0, 0.01, 1.0, 1.0});
  CHECK_THROWS_AS(fdi_nominal_control(sc, gains, bad, 0.0, Vec::Zero(6), Vec::Zero(6), Vec::Zero(6)),
                  std::invalid_argument);
}

TEST_CASE("gains validation") {
  CHECK_THROWS_AS(NominalGains::from_gain(mat1(-1.0)), std::exception);
  const NominalGains g = spacecraft::make_gains(spacecraft::Params::defaults());
  CHECK_NOTHROW(g.validate());
  const Mat residual = (-g.K).transpose() * g.P + g.P * (-g.K) + Mat::Identity(6, 6);
  CHECK(residual.norm() < 1e-10);
}
