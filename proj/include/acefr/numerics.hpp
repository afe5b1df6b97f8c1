#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace acefr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when an integration step produces a non-finite value.
class IntegrationFault : public std::runtime_error {
 public:
  IntegrationFault(double t, Eigen::Index component, const std::string& what);

  double time() const { return t_; }
  Eigen::Index component() const { return component_; }

 private:
  double t_;
  Eigen::Index component_;
};

/// Throws std::invalid_argument naming `what` if any entry is NaN or Inf.
void require_finite(const Mat& m, std::string_view what);
void require_finite(const Vec& v, std::string_view what);

/// Returns the index of the first non-finite entry, or -1.
Eigen::Index first_non_finite(const Vec& v);

using Derivative = std::function<Vec(double, const Vec&)>;

/// Classical fixed-step fourth-order Runge-Kutta update of x over [t, t+dt].
Vec rk4_step(const Derivative& deriv, double t, const Vec& x, double dt);

/// Same as above with the first stage derivative already evaluated at (t, x).
Vec rk4_step(const Derivative& deriv, double t, const Vec& x, double dt,
             const Vec& k1);

/// Moore-Penrose pseudo-inverse. Singular values below tol * sigma_max are
/// treated as zero.
Mat pseudo_inverse(const Mat& a, double tol = 1e-12);

struct SpectralNormEstimate {
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Power-iteration estimate of the largest singular value of w.
SpectralNormEstimate spectral_norm(const Mat& w, int max_iters = 2000,
                                   double tol = 1e-13);

/// Rescales w so that its spectral norm does not exceed `bound`.
Mat project_spectral(const Mat& w, double bound);

/// Solves A^T P + P A = -Q for symmetric P > 0 (A Hurwitz, Q SPD) with a
/// direct Kronecker-product solve. Intended for small n.
Mat solve_lyapunov(const Mat& a, const Mat& q);

/// Deterministic counter-based random stream (splitmix64 mixing). Streams
/// with equal seeds produce identical sequences on every platform. Child
/// streams are derived with split(), never by sharing one stream.
class SeededStream {
 public:
  explicit SeededStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double gaussian();
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }
  /// Fills a matrix with i.i.d. N(0, stddev^2) entries, row-major order.
  Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev);

  SeededStream split(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace acefr
