#pragma once

#include <optional>

#include "acefr/numerics.hpp"
#include "acefr/plant.hpp"

namespace acefr {

/// Error-feedback gain K (closed-loop error dynamics e' = -K e) and the
/// Lyapunov matrix P of V0(e) = 0.5 e'Pe.
struct NominalGains {
  Mat K;
  Mat P;

  /// Checks that -K is Hurwitz and P is symmetric positive definite.
  void validate() const;

  /// P solves (-K)'P + P(-K) = -Q; Q defaults to identity.
  static NominalGains from_gain(const Mat& K, const Mat& Q = Mat());
};

/// Thrown when the nominal command v = xd' - f - Ke is not in Im(g(x)).
class ImageError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// u_nom = g(x)^+ (xd' - f(x) - K e), e = x - x_d.
Vec nominal_control(const ControlAffinePlant& plant, const NominalGains& gains,
                    double t, const Vec& x, const Vec& x_d, const Vec& xdot_d);

/// Actuator-space compensator solving u_c = -(beta (u_nom + u_c) + d_hat)
/// with beta = diag(eta) - I, i.e. u_c = -(I + beta)^-1 (beta u_nom + d_hat).
Vec ideal_compensator(const Vec& u_nom, const Vec& eta, const Vec& d_hat);

/// Compensator for a policy whose commands live in a reduced frame mapped to
/// actuators by `output_map` (u = M v). Solves g Lambda M (v + c) + g d_hat =
/// g M v for c in the least-squares sense. Reduces to ideal_compensator when
/// M = I and g has full column rank.
Vec ideal_compensator_mapped(const Mat& g, const Vec& eta, const Mat& output_map,
                             const Vec& v_nom, const Vec& d_hat);

struct FdiEstimate {
  Vec eta_hat;
  double eta_hat_min = 0.05;

  void validate() const;
};

/// u = [g(x) Lambda_hat]^+ (xd' - f(x) - K e). Bit-identical to
/// nominal_control when every estimate equals 1.
Vec fdi_nominal_control(const ControlAffinePlant& plant, const NominalGains& gains,
                        const FdiEstimate& estimate, double t, const Vec& x,
                        const Vec& x_d, const Vec& xdot_d);

/// Time schedule of FDI estimates; an effectiveness profile whose entries are
/// the estimated values.
struct FdiSchedule {
  FaultProfile estimates;
  double eta_hat_min = 0.05;

  FdiEstimate at(double t, int m) const;
};

/// Nominal (or FDI-reconfigured) controller alone.
class NominalPolicy : public ControlPolicy {
 public:
  /// `report_map` maps actuator commands to the reporting frame (empty: identity).
  NominalPolicy(NominalGains gains, Mat report_map = Mat(),
                std::optional<FdiSchedule> fdi = std::nullopt);

  void evaluate(const ControlContext& ctx, const Vec& params,
                ControlOutput& out) override;

 private:
  NominalGains gains_;
  Mat report_map_;
  std::optional<FdiSchedule> fdi_;
};

/// Nominal control plus the ideal compensator computed from the true fault
/// and disturbance; the expert policy used for dataset generation.
class CompensatedPolicy : public ControlPolicy {
 public:
  /// `output_map` M maps reduced-frame commands to actuators (empty: identity).
  CompensatedPolicy(NominalGains gains, FaultProfile fault,
                    MatchedDisturbance disturbance, Mat output_map = Mat());

  void evaluate(const ControlContext& ctx, const Vec& params,
                ControlOutput& out) override;

 private:
  NominalGains gains_;
  FaultProfile fault_;
  MatchedDisturbance disturbance_;
  Mat output_map_;
  Mat report_map_;
};

}  // namespace acefr
