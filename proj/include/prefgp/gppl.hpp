#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "prefgp/data.hpp"
#include "prefgp/inducing.hpp"
#include "prefgp/kernels.hpp"
#include "prefgp/likelihood.hpp"
#include "prefgp/svi.hpp"

namespace prefgp {

// Variational posterior for a single utility function: q(f_m) = N(f_hat_m, S)
// over the inducing values and q(s) = Gamma(alpha, beta) over the inverse
// function scale (shape/rate, E[s] = alpha/beta).
//
// K_nm and A are training caches; gppl_fit frees them before returning so
// that the persistent state size depends only on M and D.
struct GpplState {
  KernelConfig kernel;
  Eigen::MatrixXd inducing;  // M x D
  Eigen::VectorXd f_hat_m;   // M
  Eigen::MatrixXd S;         // M x M
  Eigen::MatrixXd S_inv;     // M x M
  double alpha0 = 1.0;
  double beta0 = 100.0;
  double alpha = 1.0;
  double beta = 100.0;
  double gamma = 1.0;   // beta-Bernoulli noise parameters, set once per fit
  double lambda = 1.0;
  Eigen::MatrixXd K_mm;   // prior covariance at the inducing points
  Eigen::MatrixXd K_inv;  // inverse of K_mm + jitter*I
  double log_det_K = 0.0;
  int iteration = 0;
  std::vector<double> elbo_trace;  // recorded ELBO checks, first entry at init

  // Training caches, populated by gppl_fit and freed before it returns.
  Eigen::MatrixXd K_nm;  // N x M
  Eigen::MatrixXd A;     // N x M: K_nm * K_inv

  Eigen::Index num_inducing() const { return f_hat_m.size(); }
  double expected_scale() const { return alpha / beta; }
  double expected_log_scale() const;  // digamma(alpha) - ln(beta)

  // Bytes held by the members that survive training (excludes K_nm and A).
  std::size_t persistent_bytes() const;
};

// Prior-initialised state: f_hat_m = 0, S = K_mm, q(s) at the prior. Also
// sets (gamma, lambda) from the moments of Phi(z) under the prior, averaged
// over the dataset's pairs. Populates the K_nm/A training caches.
GpplState gppl_init(const PreferenceDataset& dataset,
                    const KernelConfig& kernel_cfg, const InducingSet& inducing,
                    double alpha_0, double beta_0);

// Linearized-likelihood quantities for one batch, evaluated at the state's
// current posterior. Requires the training caches (A).
BatchWorkspace gppl_workspace(const GpplState& state,
                              const PreferenceDataset& dataset,
                              std::span<const int> batch);

// Natural-gradient update of (S, f_hat_m) from a workspace. The (1 - rho)
// blend is taken against (s_inv_base, f_base), normally the state at the
// start of the outer iteration so repeated inner-loop applications do not
// compound the decay.
void gppl_update_batch(GpplState& state, const BatchWorkspace& workspace,
                       double rho, double pi, const Eigen::MatrixXd& s_inv_base,
                       const Eigen::VectorXd& f_base);

inline void gppl_update_batch(GpplState& state,
                              const BatchWorkspace& workspace, double rho,
                              double pi) {
  const Eigen::MatrixXd s_inv = state.S_inv;
  const Eigen::VectorXd f = state.f_hat_m;
  gppl_update_batch(state, workspace, rho, pi, s_inv, f);
}

// alpha = alpha0 + M/2; beta = beta0 + tr(K_mm^-1 (S + f f^T)) / 2.
void gppl_update_scale(GpplState& state);

struct ElboBreakdown {
  double likelihood = 0.0;  // sum over pairs of E_q[ln p(y_p | z_p)]
  double kl_gauss = 0.0;    // -KL(q(f_m) || p(f_m | s)), expectation over s
  double kl_gamma = 0.0;    // -KL(q(s) || p(s))
  double total() const { return likelihood + kl_gauss + kl_gamma; }
};

// Variational lower bound; the likelihood expectation uses Gauss-Hermite
// quadrature over each pair's z with its posterior mean and variance.
ElboBreakdown gppl_elbo_breakdown(const GpplState& state,
                                  const PreferenceDataset& dataset);
double gppl_elbo(const GpplState& state, const PreferenceDataset& dataset);

// Full SVI loop: iterate batch updates and scale updates until the ELBO's
// relative change stays below schedule.convergence_tol on two successive
// checks, or max_iterations. Deterministic given schedule.seed.
GpplState gppl_fit(const PreferenceDataset& dataset,
                   const KernelConfig& kernel_cfg, const InducingSet& inducing,
                   double alpha_0, double beta_0, const SviSchedule& schedule);

struct GpplPrediction {
  Eigen::VectorXd mean;  // f* per row of X_star
  Eigen::MatrixXd cov;   // C*, symmetric PSD
};

// f* = K_*m K_mm^-1 f_hat_m;
// C* = (K_** - A_* K_mm A_*^T) / E[s] + A_* S A_*^T.
GpplPrediction gppl_predict(const GpplState& state,
                            const Eigen::MatrixXd& X_star);

// Phi(z_hat) per pair, covariance computed only for the referenced items.
// `items` holds the feature rows the pair indices refer to.
Eigen::VectorXd gppl_predict_pairs(const GpplState& state,
                                   const Eigen::MatrixXd& items,
                                   const std::vector<PairwiseLabel>& pairs);

}  // namespace prefgp
