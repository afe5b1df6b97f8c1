#pragma once

#include <optional>

#include "acefr/controllers.hpp"
#include "acefr/dnn.hpp"
#include "acefr/plant.hpp"

namespace acefr {

/// Adaptive law W' = Gamma delta z' - gamma W on the selected layer.
struct AdaptiveConfig {
  int layer = 1;
  Vec gain;             // diagonal of Gamma, one entry per row of W_layer
  double leakage = 0.1;
  bool project_each_step = true;
  double eps_sn = 0.01;

  /// Gamma = gain * I.
  static AdaptiveConfig uniform(const MlpController& net, int layer, double gain,
                                double leakage);
  void validate(const MlpController& net) const;
};

struct BackpropResult {
  Vec delta;   // delta at the selected layer
  Vec z_prev;  // its input z_{l-1}
};

/// delta_L = (g M)' P e. `output_map` M maps the net's output frame to
/// actuators; empty means identity.
Vec output_delta(const Mat& g, const Mat& P, const Vec& e, const Mat& output_map = Mat());

/// delta_l = Psi_l W_{l+1}' delta_{l+1} down to `layer`, with Psi_l the
/// activation Jacobian at the cached pre-activation.
BackpropResult backprop_delta(const MlpController& net, const ForwardCache& cache, int layer,
                              const Vec& delta_out, const WeightOverride& ov = {});

/// Same, starting from the plant signals.
BackpropResult backprop_delta(const MlpController& net, const ForwardCache& cache, int layer,
                              const NominalGains& gains, const ControlAffinePlant& plant,
                              const Vec& x, const Vec& e, const Mat& output_map = Mat());

Mat adapt_rate(const Vec& delta, const Vec& z_prev, const Mat& w, const AdaptiveConfig& config);

/// Everything needed to close the loop around a trained net.
struct NetLoopConfig {
  NominalGains gains;
  Mat output_map;                       // net frame -> actuators; empty: identity
  std::optional<FdiSchedule> fdi;       // reconfigured nominal controller
  std::optional<AdaptiveConfig> adapt;  // frozen net when absent
};

/// u = u_nom (or u_nom^FDI) + M u_NN(zeta), zeta = [M^+ u_nom; e]. With
/// adaptation, the selected layer's weights are the policy parameters.
class NetPolicy : public ControlPolicy {
 public:
  NetPolicy(MlpController net, NetLoopConfig config);

  Eigen::Index param_dim() const override;
  Vec initial_params() const override;
  void evaluate(const ControlContext& ctx, const Vec& params, ControlOutput& out) override;
  void after_step(Vec& params) override;

  const MlpController& net() const { return net_; }

 private:
  MlpController net_;
  NetLoopConfig cfg_;
  Mat report_map_;
  ForwardCache cache_;
  Vec zeta_;
};

/// Plant state and (optionally) the selected layer co-integrated under RK4.
SimTrace run_adaptive_closed_loop(const ClosedLoop& loop, const MlpController& net,
                                  const NetLoopConfig& config, const Vec& x0, double horizon,
                                  double dt);

/// Time-averaged ||e||^2 of the frozen-net closed loop; the rollout term of
/// the training loss, reported for monitoring only.
double rollout_error_term(const ClosedLoop& loop, const MlpController& net,
                          const NetLoopConfig& config, const Vec& x0, double horizon, double dt);

}  // namespace acefr
