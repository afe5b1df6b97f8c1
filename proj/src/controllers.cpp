#include "acefr/controllers.hpp"

#include <sstream>

#include <Eigen/Eigenvalues>

namespace acefr {

void NominalGains::validate() const {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || P.rows() != n || P.cols() != n) {
    throw std::invalid_argument("NominalGains: K and P must be square and of equal size");
  }
  Eigen::EigenSolver<Mat> eig(-K, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(eig.eigenvalues()[i].real() < 0.0)) {
      throw std::invalid_argument("NominalGains: closed-loop error matrix -K is not Hurwitz");
    }
  }
  if (!P.isApprox(P.transpose(), 1e-12)) {
    throw std::invalid_argument("NominalGains: P is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> sym(P, Eigen::EigenvaluesOnly);
  if (!(sym.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument("NominalGains: P is not positive definite");
  }
}

NominalGains NominalGains::from_gain(const Mat& K, const Mat& Q) {
  NominalGains gains;
  gains.K = K;
  const Mat q = Q.size() > 0 ? Q : Mat::Identity(K.rows(), K.rows());
  gains.P = solve_lyapunov(-K, q);
  gains.validate();
  return gains;
}

namespace {

Vec nominal_command(const ControlAffinePlant& plant, const NominalGains& gains,
                    const Vec& x, const Vec& x_d, const Vec& xdot_d) {
  if (x.size() != plant.n || x_d.size() != plant.n || xdot_d.size() != plant.n) {
    throw std::invalid_argument("nominal_control: state dimension mismatch");
  }
  return xdot_d - plant.f(x) - gains.K * (x - x_d);
}

void check_image(const Mat& g, const Vec& u, const Vec& v) {
  const double residual = (g * u - v).norm();
  if (residual > 1e-8 * std::max(1.0, v.norm())) {
    std::ostringstream msg;
    msg << "nominal command outside Im(g(x)), residual " << residual;
    throw ImageError(msg.str());
  }
}

}  // namespace

Vec nominal_control(const ControlAffinePlant& plant, const NominalGains& gains,
                    double, const Vec& x, const Vec& x_d, const Vec& xdot_d) {
  const Vec v = nominal_command(plant, gains, x, x_d, xdot_d);
  Vec u = plant.right_inverse(x) * v;
  check_image(plant.g(x), u, v);
  return u;
}

Vec ideal_compensator(const Vec& u_nom, const Vec& eta, const Vec& d_hat) {
  if (u_nom.size() != eta.size() || d_hat.size() != eta.size()) {
    throw std::invalid_argument("ideal_compensator: dimension mismatch");
  }
  Vec out(eta.size());
  for (Eigen::Index k = 0; k < eta.size(); ++k) {
    if (!(eta[k] > 0.0)) {
      throw std::domain_error("ideal_compensator: I + beta is singular (eta <= 0)");
    }
    const double beta = eta[k] - 1.0;
    out[k] = -(beta * u_nom[k] + d_hat[k]) / (1.0 + beta);
  }
  return out;
}

Vec ideal_compensator_mapped(const Mat& g, const Vec& eta, const Mat& output_map,
                             const Vec& v_nom, const Vec& d_hat) {
  if (!(eta.minCoeff() > 0.0)) {
    throw std::domain_error("ideal_compensator_mapped: eta <= 0");
  }
  const Mat g_lambda_m = g * eta.asDiagonal() * output_map;
  const Vec rhs = g * ((Vec::Ones(eta.size()) - eta).asDiagonal() * (output_map * v_nom)) -
                  g * d_hat;
  return pseudo_inverse(g_lambda_m) * rhs;
}

void FdiEstimate::validate() const {
  if (!(eta_hat_min > 0.0)) throw std::invalid_argument("FdiEstimate: eta_hat_min must be positive");
  for (Eigen::Index k = 0; k < eta_hat.size(); ++k) {
    if (!(eta_hat[k] >= eta_hat_min && eta_hat[k] <= 1.0)) {
      std::ostringstream msg;
      msg << "FdiEstimate: eta_hat[" << k << "] = " << eta_hat[k] << " outside ["
          << eta_hat_min << ", 1]";
      throw std::invalid_argument(msg.str());
    }
  }
}

Vec fdi_nominal_control(const ControlAffinePlant& plant, const NominalGains& gains,
                        const FdiEstimate& estimate, double t, const Vec& x,
                        const Vec& x_d, const Vec& xdot_d) {
  if (estimate.eta_hat.size() != plant.m) {
    throw std::invalid_argument("fdi_nominal_control: estimate dimension mismatch");
  }
  estimate.validate();
  if ((estimate.eta_hat.array() == 1.0).all()) {
    return nominal_control(plant, gains, t, x, x_d, xdot_d);
  }
  const Vec v = nominal_command(plant, gains, x, x_d, xdot_d);
  const Mat g = plant.g(x);
  const Mat g_hat = g * estimate.eta_hat.asDiagonal();
  Vec u = pseudo_inverse(g_hat) * v;
  check_image(g_hat, u, v);
  return u;
}

FdiEstimate FdiSchedule::at(double t, int m) const {
  FdiEstimate est;
  est.eta_hat = estimates.effectiveness_at(t, m);
  est.eta_hat_min = eta_hat_min;
  return est;
}

NominalPolicy::NominalPolicy(NominalGains gains, Mat report_map,
                             std::optional<FdiSchedule> fdi)
    : gains_(std::move(gains)), report_map_(std::move(report_map)), fdi_(std::move(fdi)) {}

void NominalPolicy::evaluate(const ControlContext& ctx, const Vec&,
                             ControlOutput& out) {
  if (fdi_) {
    const FdiEstimate est = fdi_->at(ctx.t, ctx.plant.m);
    out.u_cmd = fdi_nominal_control(ctx.plant, gains_, est, ctx.t, ctx.x, ctx.x_d, ctx.xd_dot);
    out.eta_hat = est.eta_hat;
  } else {
    out.u_cmd = nominal_control(ctx.plant, gains_, ctx.t, ctx.x, ctx.x_d, ctx.xd_dot);
    out.eta_hat.resize(0);
  }
  if (report_map_.size() > 0) {
    out.u_nom = report_map_ * out.u_cmd;
  } else {
    out.u_nom = out.u_cmd;
  }
  out.u_nn.setZero(out.u_nom.size());
  out.param_rate.resize(0);
}

CompensatedPolicy::CompensatedPolicy(NominalGains gains, FaultProfile fault,
                                     MatchedDisturbance disturbance, Mat output_map)
    : gains_(std::move(gains)),
      fault_(std::move(fault)),
      disturbance_(std::move(disturbance)),
      output_map_(std::move(output_map)) {
  if (output_map_.size() > 0) report_map_ = pseudo_inverse(output_map_);
}

void CompensatedPolicy::evaluate(const ControlContext& ctx, const Vec&,
                                 ControlOutput& out) {
  const int m = ctx.plant.m;
  const Vec u_nom = nominal_control(ctx.plant, gains_, ctx.t, ctx.x, ctx.x_d, ctx.xd_dot);
  const Vec eta = fault_.effectiveness_at(ctx.t, m);
  const Vec d_hat = disturbance_.evaluate(ctx.t, m);
  if (output_map_.size() == 0) {
    const Vec comp = ideal_compensator(u_nom, eta, d_hat);
    out.u_cmd = u_nom + comp;
    out.u_nom = u_nom;
    out.u_nn = comp;
  } else {
    const Vec v_nom = report_map_ * u_nom;
    const Vec comp = ideal_compensator_mapped(ctx.plant.g(ctx.x), eta, output_map_, v_nom, d_hat);
    out.u_cmd = output_map_ * (v_nom + comp);
    out.u_nom = v_nom;
    out.u_nn = comp;
  }
  out.eta_hat.resize(0);
  out.param_rate.resize(0);
}

}  // namespace acefr
