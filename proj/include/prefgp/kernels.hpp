#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "prefgp/errors.hpp"

namespace prefgp {

enum class KernelFamily {
  Matern32,
  SquaredExponential,
  Identity,
};

const char* kernel_family_name(KernelFamily f);
KernelFamily kernel_family_from_name(const std::string& name);

// Kernel family plus anisotropic length-scales. The identity family ignores
// length-scales and compares rows for exact equality.
struct KernelConfig {
  KernelFamily family = KernelFamily::Matern32;
  Eigen::VectorXd length_scales;  // one per feature dimension
  double jitter = 1e-6;           // added to diagonals before factorization

  void validate() const;

  static KernelConfig matern32(Eigen::VectorXd scales, double jitter = 1e-6) {
    return {KernelFamily::Matern32, std::move(scales), jitter};
  }
  static KernelConfig squared_exponential(Eigen::VectorXd scales,
                                          double jitter = 1e-6) {
    return {KernelFamily::SquaredExponential, std::move(scales), jitter};
  }
  static KernelConfig identity() {
    return {KernelFamily::Identity, Eigen::VectorXd(), 0.0};
  }
};

// k(x1, x2) in (0, 1]. Matern-3/2: (1 + sqrt(3) r) exp(-sqrt(3) r) and
// SE: exp(-r^2 / 2), both over the scaled Euclidean distance
// r = sqrt(sum_d ((x1_d - x2_d) / l_d)^2).
double kernel_value(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                    const KernelConfig& cfg);

// Per-dimension median of |x_{i,d} - x_{j,d}| over all ordered pairs,
// including i = j. Zero medians fall back to the median over distinct-value
// pairs, then to 1.
Eigen::VectorXd median_heuristic(const Eigen::MatrixXd& X);

// 20 * sqrt(D) * median_heuristic(X), for high-dimensional feature spaces.
Eigen::VectorXd scaled_median_heuristic(const Eigen::MatrixXd& X);

// Cross-covariance between the rows of X1 and X2. When X1 and X2 are the
// same matrix the result is exactly symmetric (entries computed once and
// mirrored).
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& X1,
                                  const Eigen::MatrixXd& X2,
                                  const KernelConfig& cfg);

// Cholesky of K + jitter*I, escalating jitter x10 from `jitter` up to 1e-2
// before giving up with NumericalError.
struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter_used = 0.0;

  Eigen::MatrixXd inverse() const {
    return llt.solve(Eigen::MatrixXd::Identity(llt.rows(), llt.rows()));
  }
};

CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& K, double jitter);

}  // namespace prefgp
