#pragma once

// Shared numerical helpers for the GPPL and crowd trainers; not installed.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "prefgp/kernels.hpp"
#include "prefgp/quadrature.hpp"

namespace prefgp::internal {

// Plain LLT first; only perturb the diagonal if that fails.
inline Eigen::LLT<Eigen::MatrixXd> factorize_spd(const Eigen::MatrixXd& A,
                                                 double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  return cholesky_with_jitter(A, jitter).llt;
}

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// E_q[ln p(u | s)] - E_q[ln q(u)] for q(u) = N(mean, cov) and
// p(u | s) = N(0, K / s), in expectation over q(s). The determinant of K/s
// expands to ln|K| - dim * E[ln s].
inline double gaussian_kl_term(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov,
                               const Eigen::MatrixXd& k_inv, double log_det_k,
                               double e_s, double e_ln_s, double jitter) {
  const double dim = static_cast<double>(mean.size());
  const Eigen::LLT<Eigen::MatrixXd> llt = factorize_spd(cov, jitter);
  const double log_det_s = log_det_from_llt(llt);
  const double quad = e_s * (mean.dot(k_inv * mean) + (k_inv * cov).trace());
  return -0.5 * (log_det_k - dim * e_ln_s - log_det_s - dim + quad);
}

// -KL(Gamma(alpha, beta) || Gamma(alpha0, beta0)), shape/rate convention.
inline double gamma_kl_term(double alpha0, double beta0, double alpha,
                            double beta, double e_s, double e_ln_s) {
  return alpha0 * std::log(beta0) - alpha * std::log(beta) -
         std::lgamma(alpha0) + std::lgamma(alpha) + (alpha0 - alpha) * e_ln_s +
         (beta - beta0) * e_s;
}

inline const GaussHermite& elbo_quadrature() {
  static const GaussHermite gh(20);
  return gh;
}

}  // namespace prefgp::internal
