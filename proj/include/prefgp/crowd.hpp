#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "prefgp/data.hpp"
#include "prefgp/gppl.hpp"
#include "prefgp/inducing.hpp"
#include "prefgp/kernels.hpp"
#include "prefgp/likelihood.hpp"
#include "prefgp/svi.hpp"

namespace prefgp {

// One Gaussian factor (consensus t, item component v_c, or user component
// w_c) with its Gamma-distributed inverse scale.
struct CrowdFactor {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_inv;
  double alpha0 = 1.0;
  double beta0 = 100.0;
  double alpha = 1.0;
  double beta = 100.0;

  Eigen::Index dim() const { return mean.size(); }
  double expected_scale() const { return alpha / beta; }
  double expected_log_scale() const;
};

struct CrowdHyperparams {
  double alpha0_t = 1.0;
  double beta0_t = 100.0;
  double alpha0_v = 1.0;
  double beta0_v = 100.0;
  double alpha0_w = 1.0;
  double beta0_w = 10.0;
  int C = 20;
  // Components c < user_kernel_split use the user kernel over user features;
  // the rest use an identity prior over user indices. -1 resolves to C when
  // user features are present, otherwise to 0.
  int user_kernel_split = -1;

  int resolved_split(bool has_user_features) const;
  void validate(bool has_user_features) const;
};

// Variational posterior for the crowd model F = V^T W + t 1^T. A and A_w are
// training caches freed by crowd_fit, so the persistent size is
// O(C (M_items^2 + M_users^2)).
struct CrowdState {
  KernelConfig item_kernel;
  KernelConfig user_kernel;
  Eigen::MatrixXd item_inducing;  // M x D
  Eigen::MatrixXd user_inducing;  // Mw x Du; empty when user_kernel_split == 0
  int num_users = 0;
  int user_kernel_split = 0;
  CrowdFactor consensus;                     // dim M
  std::vector<CrowdFactor> item_components;  // C entries, dim M
  std::vector<CrowdFactor> user_components;  // C entries, dim Mw or num_users
  double gamma = 1.0;  // beta-Bernoulli noise parameters, set once per fit
  double lambda = 1.0;
  Eigen::MatrixXd K_mm;
  Eigen::MatrixXd K_inv;
  double log_det_K = 0.0;
  Eigen::MatrixXd L_mm;  // user-kernel prior at the inducing users
  Eigen::MatrixXd L_inv;
  double log_det_L = 0.0;
  int iteration = 0;
  std::vector<double> elbo_trace;

  // Training caches, populated by crowd_init and freed by crowd_fit.
  Eigen::MatrixXd A;    // N x M
  Eigen::MatrixXd A_w;  // U x Mw; empty when user_kernel_split == 0

  int num_components() const {
    return static_cast<int>(item_components.size());
  }
  Eigen::Index num_item_inducing() const { return consensus.dim(); }
  std::size_t persistent_bytes() const;
};

// Sum_c v_c(a) w_c(j) + t(a); columns of v_cols/w_cols are components.
double crowd_utility(const Eigen::MatrixXd& v_cols,
                     const Eigen::MatrixXd& w_cols,
                     const Eigen::VectorXd& t_vals, int a, int j);

// Per-batch quantities for the crowd updates. Covariance-driven members are
// computed when the workspace is built (once per inner pass); mean-driven
// members are refreshed cheaply between factor updates.
struct CrowdWorkspace {
  std::vector<PairwiseLabel> pairs;
  Eigen::MatrixXd delta_a;     // pairs x M: A_row(a_p) - A_row(b_p)
  Eigen::VectorXd schur_item;  // prior item Schur complement per pair
  Eigen::VectorXd orient;      // 2y - 1
  Eigen::VectorXd q_diag;
  Eigen::MatrixXd a_w_rows;  // pairs x Mw: A_w row of u_p (kernel components)
  Eigen::VectorXd dc_t;      // variance of t_a - t_b
  Eigen::MatrixXd dc_v;      // pairs x C: variance of v_{c,a} - v_{c,b}
  Eigen::MatrixXd omega_u;   // pairs x C: variance of w_{c,u_p}
  // Mean-driven (see crowd_refresh_means):
  Eigen::VectorXd dt;    // t_hat_a - t_hat_b
  Eigen::MatrixXd dv;    // pairs x C: v_hat_{c,a} - v_hat_{c,b}
  Eigen::MatrixXd w_u;   // pairs x C: w_hat_{c,u_p}
  Eigen::VectorXd z_hat;  // oriented, as in BatchWorkspace
  Eigen::VectorXd phi_z;
  Eigen::VectorXd coef;  // Phi(z_hat)(1 - Phi(z_hat))

  Eigen::Index size() const { return z_hat.size(); }
};

CrowdWorkspace crowd_workspace(const CrowdState& state,
                               const PreferenceDataset& dataset,
                               std::span<const int> batch);

// Recomputes dt, dv, w_u, z_hat, phi_z and coef from the current factor
// means, keeping the workspace's covariance caches.
void crowd_refresh_means(const CrowdState& state, CrowdWorkspace& workspace);

// Natural-gradient factor updates (one inner-pass step each); the (1 - rho)
// blend is taken against the factor's own (cov_inv, mean) as passed in.
void crowd_update_consensus(CrowdState& state, const CrowdWorkspace& workspace,
                            double rho, double pi,
                            const Eigen::MatrixXd& prec_base,
                            const Eigen::VectorXd& mean_base);
void crowd_update_item_component(CrowdState& state, int c,
                                 const CrowdWorkspace& workspace, double rho,
                                 double pi, const Eigen::MatrixXd& prec_base,
                                 const Eigen::VectorXd& mean_base);
void crowd_update_user_component(CrowdState& state, int c,
                                 const CrowdWorkspace& workspace, double rho,
                                 double pi, const Eigen::MatrixXd& prec_base,
                                 const Eigen::VectorXd& mean_base);

// H_{p,j} = Phi(z_p)(1 - Phi(z_p))(2y_p - 1)[j == u_p], one column per
// distinct user in the batch (ascending user index). z_hat is unoriented
// here, matching the printed definition.
struct UserLinearization {
  Eigen::MatrixXd H;        // pairs x distinct users
  std::vector<int> users;   // column -> user index
};

UserLinearization compute_H(const std::vector<PairwiseLabel>& batch,
                            const Eigen::VectorXd& z_hat);

// q(s) updates for every Gamma factor (consensus, each v_c, each w_c).
void crowd_update_scales(CrowdState& state);

// Variational lower bound; the likelihood term is evaluated at the posterior
// means (plug-in), unlike the quadrature used for the single-user bound.
ElboBreakdown crowd_elbo_breakdown(const CrowdState& state,
                                   const PreferenceDataset& dataset);
double crowd_elbo(const CrowdState& state, const PreferenceDataset& dataset);

// Prior-initialised state with training caches. Item-component means receive
// seeded Gaussian jitter of magnitude 1e-4 to break the bilinear saddle at
// exactly zero.
CrowdState crowd_init(const PreferenceDataset& dataset,
                      const KernelConfig& item_kernel,
                      const KernelConfig& user_kernel,
                      const InducingSet& item_inducing,
                      const InducingSet& user_inducing,
                      const CrowdHyperparams& hyper, uint64_t seed);

CrowdState crowd_fit(const PreferenceDataset& dataset,
                     const KernelConfig& item_kernel,
                     const KernelConfig& user_kernel,
                     const InducingSet& item_inducing,
                     const InducingSet& user_inducing,
                     const CrowdHyperparams& hyper,
                     const SviSchedule& schedule);

struct CrowdPrediction {
  Eigen::MatrixXd F;       // items x users
  Eigen::VectorXd t_mean;  // items
  Eigen::MatrixXd t_cov;   // items x items
  Eigen::MatrixXd v_mean;  // items x C
  std::vector<Eigen::MatrixXd> v_cov;  // C entries, items x items
  Eigen::MatrixXd w_mean;  // users x C
  Eigen::MatrixXd omega;   // users x C: per-user weight variances

  // Lambda*_u = C_t* + sum_c ((omega_{c,u} + w*_{c,u}^2) C_v*_c
  //                           + omega_{c,u} v*_c v*_c^T).
  Eigen::MatrixXd user_cov(int u) const;
};

// U_star holds feature rows for the predicted users (required when
// user_kernel_split > 0); user_indices maps predicted users onto training
// user indices for the identity components (-1 marks an unseen user, which
// falls back to the prior). Either may be empty when unused; the predicted
// user count is taken from whichever is present.
CrowdPrediction crowd_predict(const CrowdState& state,
                              const Eigen::MatrixXd& X_star,
                              const Eigen::MatrixXd& U_star,
                              const std::vector<int>& user_indices);

// Phi(z_hat) per pair via Eq. 3 moments from crowd_predict, computed only
// for the referenced items.
Eigen::VectorXd crowd_predict_pairs(const CrowdState& state,
                                    const Eigen::MatrixXd& items,
                                    const Eigen::MatrixXd& users,
                                    const std::vector<int>& user_indices,
                                    const std::vector<PairwiseLabel>& pairs);

// (beta_v_c / alpha_v_c) * (beta_w_c / alpha_w_c), the plug-in estimate of
// 1 / (s_v_c s_w_c).
double component_variance(const CrowdState& state, int c);

}  // namespace prefgp
