#include "acefr/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace acefr {

IntegrationFault::IntegrationFault(double t, Eigen::Index component,
                                   const std::string& what)
    : std::runtime_error(what), t_(t), component_(component) {}

void require_finite(const Mat& m, std::string_view what) {
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

void require_finite(const Vec& v, std::string_view what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
  }
}

Eigen::Index first_non_finite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return i;
  }
  return -1;
}

namespace {

void check_stage(const Vec& k, double t) {
  const Eigen::Index bad = first_non_finite(k);
  if (bad >= 0) {
    std::ostringstream msg;
    msg << "non-finite derivative at t=" << t << " in component " << bad;
    throw IntegrationFault(t, bad, msg.str());
  }
}

}  // namespace

Vec rk4_step(const Derivative& deriv, double t, const Vec& x, double dt) {
  Vec k1 = deriv(t, x);
  check_stage(k1, t);
  return rk4_step(deriv, t, x, dt, k1);
}

Vec rk4_step(const Derivative& deriv, double t, const Vec& x, double dt,
             const Vec& k1) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const double h2 = 0.5 * dt;
  Vec k2 = deriv(t + h2, x + h2 * k1);
  check_stage(k2, t + h2);
  Vec k3 = deriv(t + h2, x + h2 * k2);
  check_stage(k3, t + h2);
  Vec k4 = deriv(t + dt, x + dt * k3);
  check_stage(k4, t + dt);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Mat pseudo_inverse(const Mat& a, double tol) {
  require_finite(a, "pseudo_inverse");
  if (a.size() == 0) return Mat::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  if (smax == 0.0) return Mat::Zero(a.cols(), a.rows());
  const double cutoff = tol * smax;
  Vec inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

SpectralNormEstimate spectral_norm(const Mat& w, int max_iters, double tol) {
  require_finite(w, "spectral_norm");
  if (w.size() == 0) throw std::invalid_argument("spectral_norm: empty matrix");
  SpectralNormEstimate out;
  if (w.isZero(0.0)) {
    out.converged = true;
    return out;
  }
  // Fixed pseudo-random start so the estimate is a pure function of w.
  SeededStream start(0x5eedULL);
  Vec v(w.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.5 * start.uniform();
  v.normalize();
  Vec u(w.rows());
  double prev = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    u.noalias() = w * v;
    const double sigma = u.norm();
    out.iterations = it;
    out.value = sigma;
    if (sigma == 0.0) {
      out.converged = true;
      return out;
    }
    if (it > 1 && std::abs(sigma - prev) <= tol * sigma) {
      out.converged = true;
      return out;
    }
    prev = sigma;
    v.noalias() = w.transpose() * u;
    const double vn = v.norm();
    if (vn == 0.0) {
      out.converged = true;
      return out;
    }
    v /= vn;
  }
  return out;
}

Mat project_spectral(const Mat& w, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("project_spectral: bound must be positive");
  const double s = spectral_norm(w).value;
  if (s <= bound) return w;
  Mat out = w * (bound / s);
  // Guard against the rescaled estimate landing one rounding step above bound.
  for (int i = 0; i < 4 && spectral_norm(out).value > bound; ++i) {
    out *= 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
  }
  return out;
}

Mat solve_lyapunov(const Mat& a, const Mat& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  }
  require_finite(a, "solve_lyapunov A");
  require_finite(q, "solve_lyapunov Q");
  Eigen::EigenSolver<Mat> eig(a, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto lambda = eig.eigenvalues()[i];
    if (!(lambda.real() < 0.0)) {
      std::ostringstream msg;
      msg << "solve_lyapunov: A is not Hurwitz (eigenvalue " << lambda.real()
          << (lambda.imag() >= 0 ? "+" : "") << lambda.imag() << "i)";
      throw std::domain_error(msg.str());
    }
  }
  // Column-major vec: vec(A^T P) = (I kron A^T) vec(P), vec(P A) = (A^T kron I) vec(P).
  const Mat id = Mat::Identity(n, n);
  Mat kron(n * n, n * n);
  kron.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      kron.block(i * n, j * n, n, n) += id(i, j) * a.transpose();
      kron.block(i * n, j * n, n, n) += a(j, i) * id;
    }
  }
  Vec rhs = -Eigen::Map<const Vec>(q.data(), n * n);
  Vec sol = kron.fullPivLu().solve(rhs);
  Mat p = Eigen::Map<Mat>(sol.data(), n, n);
  return 0.5 * (p + p.transpose());
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t SeededStream::next_u64() {
  const std::uint64_t v = splitmix64(seed_ ^ splitmix64(counter_));
  ++counter_;
  return v;
}

double SeededStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SeededStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

Mat SeededStream::gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                  double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = stddev * gaussian();
  }
  return m;
}

SeededStream SeededStream::split(std::uint64_t index) const {
  return SeededStream(splitmix64(seed_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)) ^
                      0xd1b54a32d192ed03ULL * (index + 1));
}

}  // namespace acefr
