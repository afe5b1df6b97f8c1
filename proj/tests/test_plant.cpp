#include <doctest.h>

#include <cmath>

#include "acefr/controllers.hpp"
#include "acefr/plant.hpp"
#include "acefr/spacecraft.hpp"

using namespace acefr;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ControlAffinePlant scalar_plant(double g = 1.0) {
  Mat gm(1, 1);
  gm << g;
  return ControlAffinePlant::with_constant_input([](const Vec& x) { return Vec(Vec::Zero(x.size())); },
                                                 gm);
}

}  // namespace

TEST_CASE("fault profile construction rules") {
  CHECK_THROWS_AS(FaultProfile({{0, 5.0, 5.0, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(FaultProfile({{0, 1.0, 5.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(FaultProfile({{0, 1.0, 5.0, 0.01}}), std::invalid_argument);
  CHECK_THROWS_AS(FaultProfile({{0, 1.0, 5.0, 1.5}}), std::invalid_argument);
  CHECK_THROWS_AS(FaultProfile({{1, 1.0, 5.0, 0.5}, {1, 4.0, 8.0, 0.5}}), std::invalid_argument);
  CHECK_NOTHROW(FaultProfile({{1, 1.0, 5.0, 0.5}, {1, 5.0, 8.0, 0.5}}));
  CHECK_NOTHROW(FaultProfile({{0, 1.0, 5.0, 0.01}}, 0.01));
}

TEST_CASE("case-study effectiveness schedule") {
  const FaultProfile p = spacecraft::case_fault_profile();
  CHECK(p.effectiveness_at(5.0, 4) == vec({1, 1, 1, 1}));
  CHECK(p.effectiveness_at(15.0, 4) == vec({1, 1, 0.5, 1}));
  CHECK(p.effectiveness_at(22.0, 4) == vec({1, 0.25, 0.5, 1}));
  CHECK(p.effectiveness_at(55.0, 4) == vec({1, 1, 1, 1}));
  for (double t = 0.0; t < 60.0; t += 0.37) {
    const Vec eta = p.effectiveness_at(t, 4);
    CHECK(eta.minCoeff() > 0.0);
    CHECK(eta.maxCoeff() <= 1.0);
  }
}

TEST_CASE("disturbance stays within its declared bound") {
  MatchedDisturbance d;
  d.terms = {{0, 0.3, 1.1, 0.2}, {1, -0.2, 0.4, 1.0}, {0, 0.05, 3.0, 0.0}};
  d.offset = vec({0.01, -0.02, 0.0});
  for (double t = 0.0; t < 50.0; t += 0.013) CHECK(d.evaluate(t, 3).norm() <= d.bound() + 1e-15);
  CHECK(MatchedDisturbance{}.is_zero());
  CHECK(MatchedDisturbance{}.evaluate(1.0, 2).isZero(0.0));
}

TEST_CASE("plant derivative examples") {
  const auto id2 = ControlAffinePlant::with_constant_input(
      [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, Mat::Identity(2, 2));
  CHECK(plant_deriv(id2, {}, {}, 0.0, vec({0, 0}), vec({1, -1})) == vec({1, -1}));

  MatchedDisturbance d;
  d.offset = vec({0.1});
  const FaultProfile half({{0, 0.0, 10.0, 0.5}});
  CHECK(std::abs(plant_deriv(scalar_plant(), half, d, 1.0, vec({0}), vec({2}))[0] - 1.1) < 1e-15);

  const auto sc = spacecraft::make_plant(spacecraft::Params::defaults());
  const Vec x = vec({0.1, -0.2, 0.3, 0.01, 0.02, -0.03});
  CHECK(plant_deriv(sc, {}, {}, 0.0, x, Vec::Zero(4)) == sc.f(x));
}

TEST_CASE("plant derivative is affine in the input") {
  const auto sc = spacecraft::make_plant(spacecraft::Params::defaults());
  const FaultProfile p = spacecraft::case_fault_profile();
  MatchedDisturbance d;
  d.terms = {{2, 0.01, 0.5, 0.3}};
  SeededStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = rng.uniform(0.0, 60.0);
    const Vec x = rng.gaussian_matrix(6, 1, 0.2);
    const Vec u1 = rng.gaussian_matrix(4, 1, 0.1);
    const Vec u2 = rng.gaussian_matrix(4, 1, 0.1);
    const Vec z = plant_deriv(sc, p, d, t, x, Vec::Zero(4));
    const Vec lhs = plant_deriv(sc, p, d, t, x, u1 + u2) - z;
    const Vec rhs = (plant_deriv(sc, p, d, t, x, u1) - z) + (plant_deriv(sc, p, d, t, x, u2) - z);
    CHECK((lhs - rhs).norm() < 1e-12);
  }
}

TEST_CASE("simulation row layout") {
  ClosedLoop loop;
  loop.plant = scalar_plant();
  loop.reference = Reference::constant(vec({0.0}));
  ZeroPolicy zero;
  const SimTrace tr = simulate_closed_loop(loop, zero, vec({0.7}), 1.0, 0.01);
  REQUIRE(tr.ok);
  REQUIRE(tr.rows.size() == 100);
  for (std::size_t k = 0; k < tr.rows.size(); ++k) {
    CHECK(tr.rows[k].x[0] == 0.7);
    CHECK(tr.rows[k].t == static_cast<double>(k) * 0.01);
    CHECK(tr.rows[k].err_norm == tr.rows[k].e.norm());
  }
  CHECK(step_count(60.0, 0.005) == 12000);
}

TEST_CASE("nominal loop on a scalar integrator decays") {
  ClosedLoop loop;
  loop.plant = scalar_plant();
  loop.reference = Reference::constant(vec({0.0}));
  Mat k(1, 1);
  k << 1.0;
  NominalPolicy nominal(NominalGains::from_gain(k));
  const SimTrace tr = simulate_closed_loop(loop, nominal, vec({1.0}), 10.0, 0.01);
  REQUIRE(tr.ok);
  for (std::size_t i = 1; i < tr.rows.size(); ++i) {
    CHECK(tr.rows[i].err_norm <= tr.rows[i - 1].err_norm);
    CHECK(std::abs(tr.rows[i].err_norm - std::exp(-tr.rows[i].t)) < 1e-8);
  }
  CHECK(tr.rows.back().err_norm < 1e-3);
}

TEST_CASE("non-finite dynamics abort the rollout with a failure message") {
  ClosedLoop loop;
  loop.plant = ControlAffinePlant::with_constant_input(
      [](const Vec& x) { return Vec(x.array().square() * 10.0); }, Mat::Identity(1, 1));
  loop.reference = Reference::constant(vec({0.0}));
  ZeroPolicy zero;
  const SimTrace tr = simulate_closed_loop(loop, zero, vec({1.0}), 10.0, 0.01);
  CHECK_FALSE(tr.ok);
  CHECK(tr.failure.find("non-finite") != std::string::npos);
  CHECK(tr.rows.size() < 1000);
}

TEST_CASE("spacecraft nominal loop: Lyapunov value does not increase") {
  const spacecraft::CaseStudy cs = spacecraft::build_case_study(spacecraft::Variant::fault_free);
  NominalPolicy nominal(cs.gains, pseudo_inverse(cs.output_map));
  const SimTrace tr = simulate_closed_loop(cs.loop, nominal, cs.x0, cs.horizon, cs.dt);
  REQUIRE(tr.ok);
  CHECK(tr.rows.size() == 12000);
  for (std::size_t i = 2; i < tr.rows.size(); ++i) {
    CHECK(tr.rows[i].V0 <= tr.rows[i - 1].V0 * (1.0 + 1e-9) + 1e-18);
  }
}

TEST_CASE("simulation is reproducible") {
  const spacecraft::CaseStudy cs = spacecraft::build_case_study(spacecraft::Variant::faulted);
  NominalPolicy a(cs.gains, pseudo_inverse(cs.output_map));
  NominalPolicy b(cs.gains, pseudo_inverse(cs.output_map));
  const SimTrace ta = simulate_closed_loop(cs.loop, a, cs.x0, 20.0, cs.dt);
  const SimTrace tb = simulate_closed_loop(cs.loop, b, cs.x0, 20.0, cs.dt);
  REQUIRE(ta.rows.size() == tb.rows.size());
  for (std::size_t i = 0; i < ta.rows.size(); ++i) REQUIRE(ta.rows[i].x == tb.rows[i].x);
}
