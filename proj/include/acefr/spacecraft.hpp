#pragma once

#include <optional>
#include <string>
#include <vector>

#include "acefr/ace.hpp"
#include "acefr/adapt.hpp"
#include "acefr/controllers.hpp"
#include "acefr/dnn.hpp"
#include "acefr/plant.hpp"

namespace acefr::spacecraft {

/// Rigid body with four tetrahedral reaction wheels. State x = [theta; omega]
/// (Euler angles, body rates), inputs are the four wheel torques.
struct Params {
  Mat inertia = Eigen::Vector3d(1.0, 1.0, 0.8).asDiagonal();
  double wheel_inertia = 0.01;  // recorded only; wheel momentum is not modelled
  double torque_max = 0.14;
  Mat allocation;  // 3x4, filled by defaults()
  Mat kp = Eigen::Vector3d(22.5, 18.0, 15.0).asDiagonal();
  Mat kd = Eigen::Vector3d(12.0, 9.0, 7.5).asDiagonal();

  static Params defaults();
  void validate() const;
};

/// Columns (1/sqrt 3){[1,1,1], [1,-1,-1], [-1,1,-1], [-1,-1,1]}.
Mat allocation_matrix();

/// theta' = omega, omega' = I^-1 (-omega x I omega + B tau).
Vec attitude_deriv(const Params& params, const Vec& x, const Vec& wheel_torques);

/// Helical reference theta_d = [a sin(w t + p), a cos(w t + p), r t].
struct Helix {
  double amplitude = 0.05;
  double rate = 0.2 * 3.14159265358979323846;
  double phase = 0.0;
  double yaw_rate = 3.14159265358979323846 / 250.0;

  std::string id() const;
};

struct TrajectorySample {
  Eigen::Vector3d theta, theta_dot, theta_ddot;
};

TrajectorySample desired_trajectory(double t, const Helix& helix = Helix{});

/// x_d = [theta_d; theta_d'], x_d' = [theta_d'; theta_d''].
Reference make_reference(const Helix& helix = Helix{});

ControlAffinePlant make_plant(const Params& params);

/// K = [[0, -I], [Kp, Kd]] so that e' = -K e is the PD error dynamics;
/// P solves (-K)'P + P(-K) = -I.
NominalGains make_gains(const Params& params);

/// Net output is a body torque; M = B^+ maps it to wheel torques.
Mat output_map(const Params& params);

/// Default initial state: theta_d(0) + [0.02, -0.02, 0.01], omega = theta_d'(0).
Vec default_initial_state(const Helix& helix = Helix{});

enum class Variant { fault_free, faulted, faulted_with_fdi };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct FaultWindow {
  std::string label;
  double start = 0.0;
  double end = 0.0;
};

/// Everything one experiment on the case study needs.
struct CaseStudy {
  Variant variant = Variant::fault_free;
  Params params;
  ClosedLoop loop;
  NominalGains gains;
  Mat output_map;
  std::vector<int> net_sizes{9, 15, 15, 15, 15, 3};
  double adapt_gain = 1e6;
  double leakage = 0.1;
  double horizon = 60.0;
  double dt = 0.005;
  Vec x0;
  std::optional<FdiSchedule> fdi;
  std::vector<FaultWindow> windows;  // evaluation windows for fault statistics

  NetLoopConfig loop_config(const MlpController& net, std::optional<int> adapt_layer) const;
};

/// Faults on wheel 3 (eta 0.5, [10, 25) s) and wheel 2 (eta 0.25, [20, 50) s).
FaultProfile case_fault_profile();
/// Misestimated FDI: wheel 3 0.6, wheel 2 0.55 over the same windows.
FdiSchedule case_fdi_schedule();
/// FDI that reports the true effectiveness.
FdiSchedule exact_fdi(const FaultProfile& profile);

CaseStudy build_case_study(Variant variant, const Params& params = Params::defaults());

/// Training scenario sampler ranges.
struct SamplerRanges {
  double eta_lo = 0.2;
  double eta_hi = 1.0;
  double fault_start_lo = 5.0;
  double fault_start_hi = 30.0;
  double dist_amp_max = 0.02;
  double dist_freq_lo = 0.1;
  double dist_freq_hi = 1.0;
  double attitude_error = 0.05;
};

ScenarioSampler make_training_sampler(const Params& params, const SamplerRanges& ranges,
                                      double horizon);

/// Held-out scenarios for ACE: two fault patterns absent from training
/// crossed with two disturbance phase sets.
std::vector<OodScenario> ood_scenarios(const Params& params, double horizon, double dt);

DatasetSpec default_dataset_spec(const Params& params);

}  // namespace acefr::spacecraft
