#pragma once

// Reference computations used as test oracles. Nothing here calls into the
// library, so a bug in the code under test cannot leak into its oracle.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Gauss-Hermite rule for E[f(Z)], Z ~ N(0, 1) (Golub-Welsch on the
/// probabilists' Hermite recurrence). Weights sum to 1.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k - 1, k) = j(k, k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  std::vector<double> nodes(n), weights(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = es.eigenvalues()(i);
    weights[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
  return {nodes, weights};
}

/// E[f(mean + sd Z)] by an n-point Gauss-Hermite rule.
inline double normal_expectation(const std::function<double(double)>& f, double mean, double sd,
                                 int n = 60) {
  const auto [x, w] = gauss_hermite(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += w[i] * f(mean + sd * x[i]);
  return acc;
}

/// Scalar classical RK4, returning the state at t = k dt for k in [0, steps).
inline std::vector<double> rk4_scalar(const std::function<double(double, double)>& f, double x0,
                                      double dt, int steps) {
  std::vector<double> xs(static_cast<std::size_t>(steps));
  double x = x0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    xs[static_cast<std::size_t>(k)] = x;
    const double k1 = f(t, x);
    const double k2 = f(t + dt / 2, x + dt / 2 * k1);
    const double k3 = f(t + dt / 2, x + dt / 2 * k2);
    const double k4 = f(t + dt, x + dt * k3);
    x += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return xs;
}

/// Central finite difference of a scalar function of a matrix entry.
template <class F>
double central_diff(F&& f, double& entry, double h) {
  const double saved = entry;
  entry = saved + h;
  const double fp = f();
  entry = saved - h;
  const double fm = f();
  entry = saved;
  return (fp - fm) / (2 * h);
}

/// Largest singular value from a full SVD.
inline double spectral_norm_svd(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

}  // namespace oracle
