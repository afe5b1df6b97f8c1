#include "acefr/spacecraft.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acefr::spacecraft {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Mat allocation_matrix() {
  Mat b(3, 4);
  b << 1, 1, -1, -1,
       1, -1, 1, -1,
       1, -1, -1, 1;
  return b / std::sqrt(3.0);
}

Params Params::defaults() {
  Params p;
  p.allocation = allocation_matrix();
  return p;
}

void Params::validate() const {
  if (inertia.rows() != 3 || inertia.cols() != 3 || !inertia.isDiagonal(0.0) ||
      !(inertia.diagonal().array() > 0.0).all()) {
    throw std::invalid_argument("spacecraft: inertia must be diagonal and positive");
  }
  if (!(torque_max > 0.0)) throw std::invalid_argument("spacecraft: torque_max must be > 0");
  if (allocation.rows() != 3 || allocation.cols() != 4) {
    throw std::invalid_argument("spacecraft: allocation matrix must be 3x4");
  }
  Eigen::JacobiSVD<Mat> svd(allocation);
  if (svd.singularValues()(2) < 1e-9 * svd.singularValues()(0)) {
    throw std::invalid_argument("spacecraft: allocation matrix must have rank 3");
  }
  for (int k = 0; k < 4; ++k) {
    if (std::abs(allocation.col(k).norm() - 1.0) > 1e-12) {
      throw std::invalid_argument("spacecraft: allocation columns must have unit norm");
    }
  }
  if (kp.rows() != 3 || kp.cols() != 3 || kd.rows() != 3 || kd.cols() != 3) {
    throw std::invalid_argument("spacecraft: Kp and Kd must be 3x3");
  }
}

Vec attitude_deriv(const Params& params, const Vec& x, const Vec& wheel_torques) {
  if (x.size() != 6 || wheel_torques.size() != 4) {
    throw std::invalid_argument("attitude_deriv: expected 6 states and 4 wheel torques");
  }
  const Eigen::Vector3d w = x.tail<3>();
  const Eigen::Matrix3d inertia = params.inertia;
  const Eigen::Vector3d torque = params.allocation * wheel_torques;
  Vec dx(6);
  dx.head<3>() = w;
  dx.tail<3>() = inertia.inverse() * (-w.cross(inertia * w) + torque);
  return dx;
}

std::string Helix::id() const {
  std::ostringstream os;
  os << "helix(a=" << amplitude << ",w=" << rate << ",p=" << phase << ",r=" << yaw_rate << ")";
  return os.str();
}

TrajectorySample desired_trajectory(double t, const Helix& h) {
  const double s = std::sin(h.rate * t + h.phase);
  const double c = std::cos(h.rate * t + h.phase);
  const double a = h.amplitude;
  const double w = h.rate;
  TrajectorySample out;
  out.theta = {a * s, a * c, h.yaw_rate * t};
  out.theta_dot = {a * w * c, -a * w * s, h.yaw_rate};
  out.theta_ddot = {-a * w * w * s, -a * w * w * c, 0.0};
  return out;
}

Reference make_reference(const Helix& helix) {
  Reference ref;
  ref.id = helix.id();
  ref.eval = [helix](double t, Vec& xd, Vec& xd_dot) {
    const TrajectorySample s = desired_trajectory(t, helix);
    xd.resize(6);
    xd_dot.resize(6);
    xd << s.theta, s.theta_dot;
    xd_dot << s.theta_dot, s.theta_ddot;
  };
  return ref;
}

ControlAffinePlant make_plant(const Params& params) {
  params.validate();
  const Eigen::Matrix3d inertia = params.inertia;
  const Eigen::Matrix3d inv = inertia.inverse();
  Mat g = Mat::Zero(6, 4);
  g.bottomRows(3) = inv * params.allocation;
  auto f = [inertia, inv](const Vec& x) {
    const Eigen::Vector3d w = x.tail<3>();
    Vec dx(6);
    dx.head<3>() = w;
    dx.tail<3>() = -(inv * w.cross(inertia * w));
    return dx;
  };
  return ControlAffinePlant::with_constant_input(f, g);
}

NominalGains make_gains(const Params& params) {
  Mat k = Mat::Zero(6, 6);
  k.topRightCorner(3, 3) = -Mat::Identity(3, 3);
  k.bottomLeftCorner(3, 3) = params.kp;
  k.bottomRightCorner(3, 3) = params.kd;
  return NominalGains::from_gain(k);
}

Mat output_map(const Params& params) { return pseudo_inverse(params.allocation); }

Vec default_initial_state(const Helix& helix) {
  const TrajectorySample s = desired_trajectory(0.0, helix);
  Vec x0(6);
  x0 << s.theta + Eigen::Vector3d(0.02, -0.02, 0.01), s.theta_dot;
  return x0;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::fault_free:
      return "fault_free";
    case Variant::faulted:
      return "faulted";
    case Variant::faulted_with_fdi:
      return "faulted_with_fdi";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "fault_free") return Variant::fault_free;
  if (name == "faulted") return Variant::faulted;
  if (name == "faulted_with_fdi") return Variant::faulted_with_fdi;
  throw std::invalid_argument("unknown case-study variant '" + std::string(name) + "'");
}

FaultProfile case_fault_profile() {
  // Wheels are numbered from 1 in the narrative and from 0 here.
  return FaultProfile({{2, 10.0, 25.0, 0.5}, {1, 20.0, 50.0, 0.25}});
}

FdiSchedule case_fdi_schedule() {
  FdiSchedule s;
  s.estimates = FaultProfile({{2, 10.0, 25.0, 0.6}, {1, 20.0, 50.0, 0.55}});
  return s;
}

FdiSchedule exact_fdi(const FaultProfile& profile) {
  FdiSchedule s;
  s.estimates = profile;
  return s;
}

NetLoopConfig CaseStudy::loop_config(const MlpController& net,
                                     std::optional<int> adapt_layer) const {
  NetLoopConfig cfg;
  cfg.gains = gains;
  cfg.output_map = output_map;
  cfg.fdi = fdi;
  if (adapt_layer) cfg.adapt = AdaptiveConfig::uniform(net, *adapt_layer, adapt_gain, leakage);
  return cfg;
}

CaseStudy build_case_study(Variant variant, const Params& params) {
  CaseStudy cs;
  cs.variant = variant;
  cs.params = params;
  cs.gains = make_gains(params);
  cs.output_map = output_map(params);
  cs.loop.plant = make_plant(params);
  cs.loop.reference = make_reference();
  cs.loop.lyapunov = cs.gains.P;
  cs.loop.tracked = {0, 1, 2};
  cs.loop.u_max = params.torque_max;
  cs.x0 = default_initial_state();
  if (variant != Variant::fault_free) {
    cs.loop.fault = case_fault_profile();
    cs.windows = {{"fault", 10.0, 50.0}, {"wheel3_only", 10.0, 20.0}, {"wheel2_only", 25.0, 50.0}};
  }
  if (variant == Variant::faulted_with_fdi) cs.fdi = case_fdi_schedule();
  return cs;
}

ScenarioSampler make_training_sampler(const Params& params, const SamplerRanges& r,
                                      double horizon) {
  const ControlAffinePlant plant = make_plant(params);
  const NominalGains gains = make_gains(params);
  return [plant, gains, r, horizon](int index, SeededStream& stream) {
    SampledScenario sc;
    const double t_f = stream.uniform(r.fault_start_lo, r.fault_start_hi);
    std::vector<FaultEvent> events;
    for (int k = 0; k < 4; ++k) {
      const double eta = stream.uniform(r.eta_lo, r.eta_hi);
      if (eta < 1.0) events.push_back({k, t_f, std::max(horizon, t_f) + 1.0, eta});
    }
    MatchedDisturbance dist;
    for (int k = 0; k < 4; ++k) {
      SinusoidTerm term;
      term.channel = k;
      term.amplitude = stream.uniform(0.0, r.dist_amp_max);
      term.frequency = stream.uniform(r.dist_freq_lo, r.dist_freq_hi);
      term.phase = stream.uniform(0.0, 2.0 * kPi);
      dist.terms.push_back(term);
    }
    const Helix helix;
    const TrajectorySample s0 = desired_trajectory(0.0, helix);
    Vec x0(6);
    Eigen::Vector3d d0;
    for (int i = 0; i < 3; ++i) d0[i] = stream.uniform(-r.attitude_error, r.attitude_error);
    x0 << s0.theta + d0, s0.theta_dot;

    sc.loop.plant = plant;
    sc.loop.fault = FaultProfile(events);
    sc.loop.disturbance = dist;
    sc.loop.reference = make_reference(helix);
    sc.loop.lyapunov = gains.P;
    sc.loop.tracked = {0, 1, 2};
    // Expert rollouts follow the unsaturated scenario dynamics.
    sc.x0 = x0;
    sc.meta.id = index;
    sc.meta.trajectory_id = helix.id();
    sc.meta.fault = sc.loop.fault;
    sc.meta.disturbance = dist;
    sc.meta.fault_time = t_f;
    sc.meta.x0 = x0;
    return sc;
  };
}

std::vector<OodScenario> ood_scenarios(const Params& params, double horizon, double dt) {
  const ControlAffinePlant plant = make_plant(params);
  const NominalGains gains = make_gains(params);
  struct Pattern {
    std::string id;
    std::vector<FaultEvent> events;
  };
  // Fault windows that end before the horizon never occur in training,
  // where faults persist once started; the severities are also off-grid.
  const std::vector<Pattern> patterns = {
      {"w1-w4", {{0, 8.0, 30.0, 0.35}, {3, 18.0, 45.0, 0.6}}},
      {"w2-w3", {{1, 12.0, 40.0, 0.3}, {2, 15.0, 35.0, 0.45}}},
  };
  const std::vector<std::pair<std::string, double>> phases = {{"phA", 0.3}, {"phB", 2.2}};
  std::vector<OodScenario> out;
  for (const Pattern& p : patterns) {
    for (const auto& [tag, phase] : phases) {
      OodScenario sc;
      sc.id = "ood-" + p.id + "-" + tag;
      sc.loop.plant = plant;
      sc.loop.fault = FaultProfile(p.events);
      for (int k = 0; k < 4; ++k) {
        sc.loop.disturbance.terms.push_back({k, 0.005, 0.4 + 0.15 * k, phase + 0.9 * k});
      }
      sc.loop.reference = make_reference();
      sc.loop.lyapunov = gains.P;
      sc.loop.tracked = {0, 1, 2};
      sc.loop.u_max = params.torque_max;
      sc.x0 = default_initial_state();
      sc.horizon = horizon;
      sc.dt = dt;
      out.push_back(std::move(sc));
    }
  }
  return out;
}

DatasetSpec default_dataset_spec(const Params& params) {
  DatasetSpec spec;
  spec.gains = make_gains(params);
  spec.output_map = output_map(params);
  spec.sampler = make_training_sampler(params, SamplerRanges{}, spec.horizon);
  return spec;
}

}  // namespace acefr::spacecraft
