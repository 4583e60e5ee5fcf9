#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "prefgp/errors.hpp"

namespace prefgp {

// Observation-noise variance per item; marginalised analytically so that
// z = f_a - f_b. Fixed by construction, never configurable.
inline constexpr double kSigmaSquared = 0.5;

// One pairwise observation: user prefers item_a over item_b iff y == 1.
struct PairwiseLabel {
  int user = 0;  // 0 for single-user data
  int item_a = 0;
  int item_b = 0;
  int y = 0;  // binary outcome
};

double std_normal_cdf(double z);

// Probabilities clamped to [1e-12, 1 - 1e-12] before logs or divisions.
double clamp_prob(double p);

// Phi(z_hat) with z_hat = (f_a - f_b) / sqrt(1 + C_aa + C_bb - 2 C_ab).
// Throws NumericalError if the denominator argument is not positive.
double pair_probability(double f_hat_a, double f_hat_b, double c_aa,
                        double c_bb, double c_ab);

// Beta parameters matched to the mean/variance of Phi(z) under
// z ~ Normal(prior_mean_z, prior_var_z). Infeasible variances are clamped to
// 0.99 * m(1-m); outputs clamped to [1e-6, 1e6].
struct BetaMoments {
  double gamma = 1.0;
  double lambda = 1.0;
};

BetaMoments estimate_beta_prior(double prior_mean_z, double prior_var_z,
                                int quadrature_nodes = 20);

// Posterior beta-Bernoulli variance used as the diagonal of Q:
// (gamma + y)(lambda + 1 - y) / (gamma + lambda + 1)^2.
double observation_noise(double gamma, double lambda, int y);

// Scalar Taylor coefficient of Phi about z_hat:
// Phi(z)(1 - Phi(z))(2y - 1).
double linearization_coefficient(double z_hat, int y);

// One row of G over `batch_items`: +/-linearization_coefficient at the
// positions of item_a / item_b, zero elsewhere. Throws InternalError if
// either item is missing from the batch.
Eigen::VectorXd linearization_row(double z_hat_p, int y_p, int a_p, int b_p,
                                  std::span<const int> batch_items);

// Per-batch linearized-likelihood quantities shared by the SVI updates.
// `delta_a` holds, per pair, the difference of the rows of A for the pair's
// two items; together with `g` it is a row-sparse factorization of G * A.
//
// z_hat is oriented towards the observed label, z~ = (2y-1) z, so phi_z is
// the probability of the label actually seen and the update residual is
// 1 - phi_z. (The unoriented residual flips sign for y = 0 relative to the
// linearization, which would push utilities the wrong way and break
// label-flip symmetry; for y = 1 both conventions coincide.) Since
// Phi(z~)(1 - Phi(z~)) is even in the orientation, `g` equals the unoriented
// linearization coefficient Phi(z)(1 - Phi(z))(2y - 1) either way.
struct BatchWorkspace {
  std::vector<PairwiseLabel> pairs;
  Eigen::MatrixXd delta_a;      // pairs x M: A_row(a_p) - A_row(b_p)
  Eigen::VectorXd z_hat;        // pairs, oriented: (2y-1) * z
  Eigen::VectorXd phi_z;        // pairs: Phi(z_hat), clamped
  Eigen::VectorXd g;            // pairs: Phi(1-Phi)(2y-1)
  Eigen::VectorXd q_diag;       // pairs, in (0, 0.25]
  Eigen::VectorXd lin_mean;     // pairs: (G A f_lin)_p at the linearization
  Eigen::VectorXd y;            // pairs, as reals
  double gamma = 1.0;
  double lambda = 1.0;

  Eigen::Index size() const { return z_hat.size(); }
};

}  // namespace prefgp
