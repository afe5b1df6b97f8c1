#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "acefr/numerics.hpp"

namespace acefr {

/// One loss-of-effectiveness window on a single actuator, active on
/// [start, end).
struct FaultEvent {
  int actuator = 0;
  double start = 0.0;
  double end = 0.0;
  double effectiveness = 1.0;
};

/// Piecewise-constant actuator effectiveness schedule. Events on the same
/// actuator may not overlap; effectiveness must lie in [eta_min, 1].
class FaultProfile {
 public:
  static constexpr double kDefaultEtaMin = 0.05;

  FaultProfile() = default;
  explicit FaultProfile(std::vector<FaultEvent> events,
                        double eta_min = kDefaultEtaMin);

  const std::vector<FaultEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  double eta_min() const { return eta_min_; }

  /// Writes the m diagonal entries of the effectiveness matrix at time t.
  void effectiveness_at(double t, Vec& out) const;
  Vec effectiveness_at(double t, int m) const;

 private:
  std::vector<FaultEvent> events_;
  double eta_min_ = kDefaultEtaMin;
};

inline Vec effectiveness_at(const FaultProfile& profile, double t, int m) {
  return profile.effectiveness_at(t, m);
}

struct SinusoidTerm {
  int channel = 0;
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;      // rad
};

/// Actuator-space disturbance d_hat(t); the state-space disturbance is
/// g(x) * d_hat(t), so it is matched by construction.
struct MatchedDisturbance {
  std::vector<SinusoidTerm> terms;
  Vec offset;  // empty means zero

  void evaluate(double t, Vec& out) const;
  Vec evaluate(double t, int m) const;
  /// sum |amplitude| + ||offset||, an upper bound on ||d_hat(t)||.
  double bound() const;
  bool is_zero() const;
};

/// x' = f(x) + g(x) * Lambda * u + g(x) * d_hat.
struct ControlAffinePlant {
  int n = 0;
  int m = 0;
  std::function<Vec(const Vec&)> f;
  std::function<Mat(const Vec&)> g;
  /// Optional closed-form right inverse of g(x); pseudo_inverse(g(x)) otherwise.
  std::function<Mat(const Vec&)> g_pinv;

  Mat right_inverse(const Vec& x) const;

  /// Plant whose input matrix does not depend on the state.
  static ControlAffinePlant with_constant_input(std::function<Vec(const Vec&)> f,
                                                const Mat& g);
};

Vec plant_deriv(const ControlAffinePlant& plant, const FaultProfile& profile,
                const MatchedDisturbance& dist, double t, const Vec& x,
                const Vec& u);

/// Desired trajectory x_d(t) and its derivative.
struct Reference {
  std::string id;
  std::function<void(double t, Vec& xd, Vec& xd_dot)> eval;

  static Reference constant(const Vec& xd, std::string id = "constant");
};

struct TraceRow {
  double t = 0.0;
  Vec x, x_d, e;
  Vec u_nom;    // reporting frame of the policy (body torque for the spacecraft)
  Vec u_nn;     // same frame as u_nom
  Vec u_total;  // actuator command after saturation, before Lambda
  Vec eta;
  Vec eta_hat;  // empty when no FDI estimate is in use
  double V0 = 0.0;
  double V0_dot = 0.0;
  double err_norm = 0.0;    // ||e||
  double track_norm = 0.0;  // ||e|| restricted to the tracked components
  double w_frob = 0.0;      // norm of the adapted parameters, 0 if none
};

struct SimTrace {
  std::vector<TraceRow> rows;
  bool ok = true;
  std::string failure;
};

struct ControlContext {
  double t;
  const Vec& x;
  const Vec& x_d;
  const Vec& xd_dot;
  const Vec& e;
  const ControlAffinePlant& plant;
};

struct ControlOutput {
  Vec u_cmd;       // actuator space, before saturation
  Vec u_nom;       // reporting frame
  Vec u_nn;        // reporting frame
  Vec eta_hat;     // empty if unused
  Vec param_rate;  // derivative of the policy parameters (adaptive policies)
};

/// A composite control law. Adaptive policies expose their parameters so the
/// simulator can integrate them together with the plant state.
class ControlPolicy {
 public:
  virtual ~ControlPolicy() = default;

  virtual Eigen::Index param_dim() const { return 0; }
  virtual Vec initial_params() const { return Vec(); }
  virtual void evaluate(const ControlContext& ctx, const Vec& params,
                        ControlOutput& out) = 0;
  /// Called once after every full integration step (e.g. for projection).
  virtual void after_step(Vec& params) { (void)params; }
  virtual double param_norm(const Vec& params) const { return params.norm(); }
};

class ZeroPolicy : public ControlPolicy {
 public:
  void evaluate(const ControlContext& ctx, const Vec& params,
                ControlOutput& out) override;
};

struct ClosedLoop {
  ControlAffinePlant plant;
  FaultProfile fault;
  MatchedDisturbance disturbance;
  Reference reference;
  Mat lyapunov;              // P for V0 = 0.5 e'Pe; identity when empty
  std::vector<int> tracked;  // components in track_norm; all when empty
  double u_max = std::numeric_limits<double>::infinity();
};

using RowSink = std::function<void(const TraceRow&)>;

struct SimStatus {
  bool ok = true;
  std::string failure;
  std::size_t rows = 0;
};

/// Integrates plant state and policy parameters together with RK4 at fixed
/// dt and emits one row per step, at t = k*dt for k in [0, horizon/dt).
SimStatus simulate_closed_loop(const ClosedLoop& loop, ControlPolicy& policy,
                               const Vec& x0, double horizon, double dt,
                               const RowSink& sink);

SimTrace simulate_closed_loop(const ClosedLoop& loop, ControlPolicy& policy,
                              const Vec& x0, double horizon, double dt);

std::size_t step_count(double horizon, double dt);

}  // namespace acefr
