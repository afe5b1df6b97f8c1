#include "acefr/adapt.hpp"

#include <sstream>

namespace acefr {

AdaptiveConfig AdaptiveConfig::uniform(const MlpController& net, int layer, double gain,
                                       double leakage) {
  AdaptiveConfig cfg;
  cfg.layer = layer;
  cfg.gain = Vec::Constant(net.weight(layer).rows(), gain);
  cfg.leakage = leakage;
  return cfg;
}

void AdaptiveConfig::validate(const MlpController& net) const {
  if (layer < 1 || layer > net.num_layers()) {
    throw std::invalid_argument("AdaptiveConfig: layer " + std::to_string(layer) +
                                " outside 1.." + std::to_string(net.num_layers()));
  }
  if (gain.size() != net.weight(layer).rows()) {
    throw std::invalid_argument("AdaptiveConfig: gain size does not match layer rows");
  }
  if (!(gain.array() >= 0.0).all() || !(leakage >= 0.0)) {
    throw std::invalid_argument("AdaptiveConfig: gains and leakage must be nonnegative");
  }
  if (!(eps_sn > 0.0 && eps_sn < 1.0)) throw std::invalid_argument("AdaptiveConfig: eps_sn");
}

Vec output_delta(const Mat& g, const Mat& P, const Vec& e, const Mat& output_map) {
  if (output_map.size() == 0) return g.transpose() * (P * e);
  return output_map.transpose() * (g.transpose() * (P * e));
}

BackpropResult backprop_delta(const MlpController& net, const ForwardCache& cache, int layer,
                              const Vec& delta_out, const WeightOverride& ov) {
  const int L = net.num_layers();
  if (layer < 1 || layer > L) throw std::out_of_range("backprop_delta: layer out of range");
  if (cache.z.size() != static_cast<std::size_t>(L) || delta_out.size() != net.output_dim()) {
    throw std::logic_error("backprop_delta: cache does not belong to this network");
  }
  const auto& sizes = net.layer_sizes();
  for (int l = 0; l < L; ++l) {
    if (cache.z[static_cast<std::size_t>(l)].size() != sizes[l]) {
      throw std::logic_error("backprop_delta: stale forward cache");
    }
  }
  auto weight_of = [&](int l) -> Eigen::Map<const Mat> {
    if (ov.data != nullptr && ov.layer == l) {
      return Eigen::Map<const Mat>(ov.data, sizes[l], sizes[l - 1]);
    }
    const Mat& w = net.weight(l);
    return Eigen::Map<const Mat>(w.data(), w.rows(), w.cols());
  };
  BackpropResult res;
  res.delta = delta_out;
  for (int l = L - 1; l >= layer; --l) {
    Vec next = weight_of(l + 1).transpose() * res.delta;
    if (net.activation() == Activation::tanh) {
      const Vec& z = cache.z[static_cast<std::size_t>(l)];
      next.array() *= 1.0 - z.array().square();
    }
    res.delta = std::move(next);
  }
  res.z_prev = cache.z[static_cast<std::size_t>(layer - 1)];
  return res;
}

BackpropResult backprop_delta(const MlpController& net, const ForwardCache& cache, int layer,
                              const NominalGains& gains, const ControlAffinePlant& plant,
                              const Vec& x, const Vec& e, const Mat& output_map) {
  return backprop_delta(net, cache, layer, output_delta(plant.g(x), gains.P, e, output_map));
}

Mat adapt_rate(const Vec& delta, const Vec& z_prev, const Mat& w, const AdaptiveConfig& config) {
  if (delta.size() != w.rows() || z_prev.size() != w.cols() || config.gain.size() != w.rows()) {
    throw std::invalid_argument("adapt_rate: shape mismatch");
  }
  return config.gain.cwiseProduct(delta) * z_prev.transpose() - config.leakage * w;
}

NetPolicy::NetPolicy(MlpController net, NetLoopConfig config)
    : net_(std::move(net)), cfg_(std::move(config)) {
  net_.validate();
  if (cfg_.output_map.size() > 0) report_map_ = pseudo_inverse(cfg_.output_map);
  if (cfg_.adapt) cfg_.adapt->validate(net_);
}

Eigen::Index NetPolicy::param_dim() const {
  return cfg_.adapt ? net_.weight(cfg_.adapt->layer).size() : 0;
}

Vec NetPolicy::initial_params() const {
  if (!cfg_.adapt) return Vec();
  const Mat& w = net_.weight(cfg_.adapt->layer);
  return Eigen::Map<const Vec>(w.data(), w.size());
}

void NetPolicy::evaluate(const ControlContext& ctx, const Vec& params, ControlOutput& out) {
  Vec u_nom;
  if (cfg_.fdi) {
    const FdiEstimate est = cfg_.fdi->at(ctx.t, ctx.plant.m);
    u_nom = fdi_nominal_control(ctx.plant, cfg_.gains, est, ctx.t, ctx.x, ctx.x_d, ctx.xd_dot);
    out.eta_hat = est.eta_hat;
  } else {
    u_nom = nominal_control(ctx.plant, cfg_.gains, ctx.t, ctx.x, ctx.x_d, ctx.xd_dot);
    out.eta_hat.resize(0);
  }
  const bool mapped = cfg_.output_map.size() > 0;
  if (mapped) {
    out.u_nom.noalias() = report_map_ * u_nom;
  } else {
    out.u_nom = u_nom;
  }
  zeta_.resize(out.u_nom.size() + ctx.e.size());
  zeta_ << out.u_nom, ctx.e;

  WeightOverride ov;
  if (cfg_.adapt) {
    ov.layer = cfg_.adapt->layer;
    ov.data = params.data();
  }
  out.u_nn = forward(net_, zeta_, cache_, ov);
  out.u_cmd = u_nom;
  if (mapped) {
    out.u_cmd.noalias() += cfg_.output_map * out.u_nn;
  } else {
    out.u_cmd += out.u_nn;
  }

  if (cfg_.adapt) {
    const Vec d_out = output_delta(ctx.plant.g(ctx.x), cfg_.gains.P, ctx.e, cfg_.output_map);
    const BackpropResult bp = backprop_delta(net_, cache_, cfg_.adapt->layer, d_out, ov);
    const Mat& w0 = net_.weight(cfg_.adapt->layer);
    const Eigen::Map<const Mat> w(params.data(), w0.rows(), w0.cols());
    out.param_rate.resize(params.size());
    Eigen::Map<Mat> rate(out.param_rate.data(), w0.rows(), w0.cols());
    rate.noalias() = cfg_.adapt->gain.cwiseProduct(bp.delta) * bp.z_prev.transpose();
    rate -= cfg_.adapt->leakage * w;
  } else {
    out.param_rate.resize(0);
  }
}

void NetPolicy::after_step(Vec& params) {
  if (!cfg_.adapt || !cfg_.adapt->project_each_step) return;
  const Mat& w0 = net_.weight(cfg_.adapt->layer);
  const Mat w = Eigen::Map<const Mat>(params.data(), w0.rows(), w0.cols());
  const Mat projected = project_spectral(w, 1.0 - cfg_.adapt->eps_sn);
  params = Eigen::Map<const Vec>(projected.data(), projected.size());
}

SimTrace run_adaptive_closed_loop(const ClosedLoop& loop, const MlpController& net,
                                  const NetLoopConfig& config, const Vec& x0, double horizon,
                                  double dt) {
  NetPolicy policy(net, config);
  return simulate_closed_loop(loop, policy, x0, horizon, dt);
}

double rollout_error_term(const ClosedLoop& loop, const MlpController& net,
                          const NetLoopConfig& config, const Vec& x0, double horizon, double dt) {
  NetLoopConfig frozen = config;
  frozen.adapt.reset();
  NetPolicy policy(net, frozen);
  double sum = 0.0;
  std::size_t rows = 0;
  const SimStatus st = simulate_closed_loop(loop, policy, x0, horizon, dt, [&](const TraceRow& r) {
    sum += r.err_norm * r.err_norm;
    ++rows;
  });
  if (!st.ok) throw std::runtime_error("rollout_error_term: " + st.failure);
  return rows > 0 ? sum / static_cast<double>(rows) : 0.0;
}

}  // namespace acefr
