#include "acefr/plant.hpp"

#include <cmath>
#include <sstream>

namespace acefr {

FaultProfile::FaultProfile(std::vector<FaultEvent> events, double eta_min)
    : events_(std::move(events)), eta_min_(eta_min) {
  if (!(eta_min_ > 0.0 && eta_min_ <= 1.0)) {
    throw std::invalid_argument("FaultProfile: eta_min must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const FaultEvent& ev = events_[i];
    if (ev.actuator < 0) throw std::invalid_argument("FaultProfile: negative actuator index");
    if (!(ev.start < ev.end)) {
      throw std::invalid_argument("FaultProfile: event start must precede end");
    }
    if (!(ev.effectiveness >= eta_min_ && ev.effectiveness <= 1.0)) {
      std::ostringstream msg;
      msg << "FaultProfile: effectiveness " << ev.effectiveness
          << " outside [" << eta_min_ << ", 1]";
      throw std::invalid_argument(msg.str());
    }
    for (std::size_t j = 0; j < i; ++j) {
      const FaultEvent& other = events_[j];
      if (other.actuator == ev.actuator && ev.start < other.end &&
          other.start < ev.end) {
        std::ostringstream msg;
        msg << "FaultProfile: overlapping events on actuator " << ev.actuator;
        throw std::invalid_argument(msg.str());
      }
    }
  }
}

void FaultProfile::effectiveness_at(double t, Vec& out) const {
  out.setOnes();
  for (const FaultEvent& ev : events_) {
    if (ev.actuator >= out.size()) {
      throw std::out_of_range("FaultProfile: actuator index exceeds input dimension");
    }
    if (t >= ev.start && t < ev.end) out[ev.actuator] = ev.effectiveness;
  }
}

Vec FaultProfile::effectiveness_at(double t, int m) const {
  Vec out(m);
  effectiveness_at(t, out);
  return out;
}

void MatchedDisturbance::evaluate(double t, Vec& out) const {
  if (offset.size() == out.size()) {
    out = offset;
  } else if (offset.size() == 0) {
    out.setZero();
  } else {
    throw std::invalid_argument("MatchedDisturbance: offset dimension mismatch");
  }
  for (const SinusoidTerm& term : terms) {
    if (term.channel < 0 || term.channel >= out.size()) {
      throw std::out_of_range("MatchedDisturbance: channel out of range");
    }
    out[term.channel] += term.amplitude * std::sin(term.frequency * t + term.phase);
  }
}

Vec MatchedDisturbance::evaluate(double t, int m) const {
  Vec out(m);
  evaluate(t, out);
  return out;
}

double MatchedDisturbance::bound() const {
  double b = offset.size() > 0 ? offset.norm() : 0.0;
  for (const SinusoidTerm& term : terms) b += std::abs(term.amplitude);
  return b;
}

bool MatchedDisturbance::is_zero() const {
  for (const SinusoidTerm& term : terms) {
    if (term.amplitude != 0.0) return false;
  }
  return offset.size() == 0 || offset.isZero(0.0);
}

Mat ControlAffinePlant::right_inverse(const Vec& x) const {
  if (g_pinv) return g_pinv(x);
  return pseudo_inverse(g(x));
}

ControlAffinePlant ControlAffinePlant::with_constant_input(
    std::function<Vec(const Vec&)> f, const Mat& g) {
  ControlAffinePlant plant;
  plant.n = static_cast<int>(g.rows());
  plant.m = static_cast<int>(g.cols());
  plant.f = std::move(f);
  plant.g = [g](const Vec&) { return g; };
  const Mat pinv = pseudo_inverse(g);
  plant.g_pinv = [pinv](const Vec&) { return pinv; };
  return plant;
}

Vec plant_deriv(const ControlAffinePlant& plant, const FaultProfile& profile,
                const MatchedDisturbance& dist, double t, const Vec& x,
                const Vec& u) {
  if (x.size() != plant.n || u.size() != plant.m) {
    throw std::invalid_argument("plant_deriv: dimension mismatch");
  }
  const Vec eta = profile.effectiveness_at(t, plant.m);
  const Vec dhat = dist.evaluate(t, plant.m);
  Vec xdot = plant.f(x) + plant.g(x) * (eta.cwiseProduct(u) + dhat);
  const Eigen::Index bad = first_non_finite(xdot);
  if (bad >= 0) {
    throw IntegrationFault(t, bad, "plant_deriv: non-finite derivative");
  }
  return xdot;
}

Reference Reference::constant(const Vec& xd, std::string id) {
  Reference ref;
  ref.id = std::move(id);
  ref.eval = [xd](double, Vec& out, Vec& out_dot) {
    out = xd;
    out_dot.setZero(xd.size());
  };
  return ref;
}

void ZeroPolicy::evaluate(const ControlContext& ctx, const Vec&,
                          ControlOutput& out) {
  out.u_cmd.setZero(ctx.plant.m);
  out.u_nom.setZero(ctx.plant.m);
  out.u_nn.setZero(ctx.plant.m);
  out.eta_hat.resize(0);
  out.param_rate.resize(0);
}

std::size_t step_count(double horizon, double dt) {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

SimStatus simulate_closed_loop(const ClosedLoop& loop, ControlPolicy& policy,
                               const Vec& x0, double horizon, double dt,
                               const RowSink& sink) {
  const ControlAffinePlant& plant = loop.plant;
  if (!(horizon > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("simulate_closed_loop: horizon and dt must be positive");
  }
  if (x0.size() != plant.n) {
    throw std::invalid_argument("simulate_closed_loop: x0 dimension mismatch");
  }
  const Eigen::Index n = plant.n;
  const Eigen::Index np = policy.param_dim();
  const Mat lyap = loop.lyapunov.size() > 0 ? loop.lyapunov : Mat::Identity(n, n);

  Vec z(n + np);
  z.head(n) = x0;
  if (np > 0) z.tail(np) = policy.initial_params();

  Vec x(n), xd(n), xd_dot(n), e(n), eta(plant.m), dhat(plant.m), usat(plant.m);
  Vec params(np);
  ControlOutput out;

  // Evaluates the augmented derivative; leaves the stage signals in the
  // scratch variables above so the first stage can be logged.
  auto stage = [&](double t, const Vec& zz) -> Vec {
    x = zz.head(n);
    if (np > 0) params = zz.tail(np);
    loop.reference.eval(t, xd, xd_dot);
    e = x - xd;
    const ControlContext ctx{t, x, xd, xd_dot, e, plant};
    policy.evaluate(ctx, params, out);
    usat = out.u_cmd.cwiseMax(-loop.u_max).cwiseMin(loop.u_max);
    loop.fault.effectiveness_at(t, eta);
    loop.disturbance.evaluate(t, dhat);
    Vec dz(n + np);
    dz.head(n) = plant.f(x) + plant.g(x) * (eta.cwiseProduct(usat) + dhat);
    if (np > 0) dz.tail(np) = out.param_rate;
    return dz;
  };
  const Derivative deriv = [&](double t, const Vec& zz) { return stage(t, zz); };

  SimStatus status;
  const std::size_t steps = step_count(horizon, dt);
  TraceRow row;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    try {
      const Eigen::Index bad_state = first_non_finite(z);
      if (bad_state >= 0) {
        throw IntegrationFault(t, bad_state, "non-finite state");
      }
      Vec k1 = stage(t, z);
      const Eigen::Index bad = first_non_finite(k1);
      if (bad >= 0) throw IntegrationFault(t, bad, "non-finite derivative");

      row.t = t;
      row.x = x;
      row.x_d = xd;
      row.e = e;
      row.u_nom = out.u_nom;
      row.u_nn = out.u_nn;
      row.u_total = usat;
      row.eta = eta;
      row.eta_hat = out.eta_hat;
      row.V0 = 0.5 * e.dot(lyap * e);
      row.V0_dot = e.dot(lyap * (k1.head(n) - xd_dot));
      row.err_norm = e.norm();
      if (loop.tracked.empty()) {
        row.track_norm = row.err_norm;
      } else {
        double s = 0.0;
        for (int i : loop.tracked) s += e[i] * e[i];
        row.track_norm = std::sqrt(s);
      }
      row.w_frob = np > 0 ? policy.param_norm(params) : 0.0;
      if (sink) sink(row);
      ++status.rows;

      z = rk4_step(deriv, t, z, dt, k1);
      if (np > 0) {
        params = z.tail(np);
        policy.after_step(params);
        z.tail(np) = params;
      }
    } catch (const IntegrationFault& fault) {
      status.ok = false;
      status.failure = fault.what();
      return status;
    } catch (const std::exception& ex) {
      status.ok = false;
      std::ostringstream msg;
      msg << "t=" << t << ": " << ex.what();
      status.failure = msg.str();
      return status;
    }
  }
  return status;
}

SimTrace simulate_closed_loop(const ClosedLoop& loop, ControlPolicy& policy,
                              const Vec& x0, double horizon, double dt) {
  SimTrace trace;
  trace.rows.reserve(step_count(horizon, dt));
  const SimStatus status = simulate_closed_loop(
      loop, policy, x0, horizon, dt,
      [&](const TraceRow& row) { trace.rows.push_back(row); });
  trace.ok = status.ok;
  trace.failure = status.failure;
  return trace;
}

}  // namespace acefr
