#include "prefgp/crowd.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "internal_math.hpp"
#include "prefgp/quadrature.hpp"

namespace prefgp {

using internal::factorize_spd;
using internal::gamma_kl_term;
using internal::gaussian_kl_term;
using internal::log_det_from_llt;

double CrowdFactor::expected_log_scale() const {
  return digamma(alpha) - std::log(beta);
}

int CrowdHyperparams::resolved_split(bool has_user_features) const {
  if (user_kernel_split >= 0) return user_kernel_split;
  return has_user_features ? C : 0;
}

void CrowdHyperparams::validate(bool has_user_features) const {
  if (C < 0) throw InvalidConfigError("crowd: C must be >= 0");
  for (double v : {alpha0_t, beta0_t, alpha0_v, beta0_v, alpha0_w, beta0_w}) {
    if (!(v > 0.0)) {
      throw InvalidConfigError("crowd: Gamma hyperparameters must be positive");
    }
  }
  const int split = resolved_split(has_user_features);
  if (split < 0 || split > C) {
    throw InvalidConfigError("crowd: user_kernel_split must be in [0, C]");
  }
  if (split > 0 && !has_user_features) {
    throw InvalidConfigError(
        "crowd: user-kernel components require user features");
  }
}

std::size_t CrowdState::persistent_bytes() const {
  Eigen::Index doubles = item_inducing.size() + user_inducing.size() +
                         K_mm.size() + K_inv.size() + L_mm.size() +
                         L_inv.size() + item_kernel.length_scales.size() +
                         user_kernel.length_scales.size();
  auto add_factor = [&doubles](const CrowdFactor& f) {
    doubles += f.mean.size() + f.cov.size() + f.cov_inv.size() + 4;
  };
  add_factor(consensus);
  for (const CrowdFactor& f : item_components) add_factor(f);
  for (const CrowdFactor& f : user_components) add_factor(f);
  return static_cast<std::size_t>(doubles + 8) * sizeof(double);
}

double crowd_utility(const Eigen::MatrixXd& v_cols,
                     const Eigen::MatrixXd& w_cols,
                     const Eigen::VectorXd& t_vals, int a, int j) {
  if (v_cols.cols() != w_cols.cols()) {
    throw InvalidInputError("crowd_utility: component counts differ");
  }
  if (a < 0 || a >= t_vals.size() || a >= v_cols.rows() ||
      (w_cols.cols() > 0 && (j < 0 || j >= w_cols.rows()))) {
    throw InvalidInputError("crowd_utility: index out of range");
  }
  double f = t_vals[a];
  for (Eigen::Index c = 0; c < v_cols.cols(); ++c) {
    f += v_cols(a, c) * w_cols(j, c);
  }
  return f;
}

namespace {

// Prior precision for user component c: L_inv for kernel components, the
// identity for index-based components.
Eigen::MatrixXd user_prior_inverse(const CrowdState& st, int c) {
  if (c < st.user_kernel_split) return st.L_inv;
  const Eigen::Index u = st.user_components[static_cast<size_t>(c)].dim();
  return Eigen::MatrixXd::Identity(u, u);
}

void update_factor_scale(CrowdFactor& f, const Eigen::MatrixXd& prior_inv) {
  f.alpha = f.alpha0 + 0.5 * static_cast<double>(f.dim());
  const double trace_term =
      (prior_inv * f.cov).trace() + f.mean.dot(prior_inv * f.mean);
  f.beta = f.beta0 + 0.5 * trace_term;
  if (!(f.beta > 0.0) || !std::isfinite(f.beta)) {
    throw NumericalError("crowd scale update: non-positive beta");
  }
}

void finalize_factor(CrowdFactor& f, double rho, double pi,
                     const Eigen::MatrixXd& prec_base,
                     const Eigen::VectorXd& mean_base,
                     const Eigen::MatrixXd& prior_inv,
                     const Eigen::MatrixXd& prec_like,
                     const Eigen::VectorXd& rhs_like, double jitter) {
  Eigen::MatrixXd prec =
      (1.0 - rho) * prec_base +
      rho * (f.expected_scale() * prior_inv + pi * prec_like);
  prec = 0.5 * (prec + prec.transpose()).eval();
  const Eigen::VectorXd h =
      (1.0 - rho) * (prec_base * mean_base) + rho * pi * rhs_like;
  const Eigen::LLT<Eigen::MatrixXd> llt = factorize_spd(prec, jitter);
  const Eigen::Index m = f.dim();
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
  f.cov = 0.5 * (cov + cov.transpose());
  f.cov_inv = prec;
  f.mean = llt.solve(h);
}

}  // namespace

CrowdState crowd_init(const PreferenceDataset& dataset,
                      const KernelConfig& item_kernel,
                      const KernelConfig& user_kernel,
                      const InducingSet& item_inducing,
                      const InducingSet& user_inducing,
                      const CrowdHyperparams& hyper, uint64_t seed) {
  dataset.validate();
  item_kernel.validate();
  const bool has_user_features = dataset.users.rows() > 0;
  hyper.validate(has_user_features);
  if (item_inducing.size() < 1) {
    throw InvalidInputError("crowd: need at least one item inducing point");
  }

  CrowdState st;
  st.item_kernel = item_kernel;
  st.user_kernel = user_kernel;
  st.item_inducing = item_inducing.points;
  st.num_users = dataset.num_users();
  if (st.num_users < 1) {
    throw InvalidInputError("crowd: dataset names no users");
  }
  st.user_kernel_split = hyper.resolved_split(has_user_features);

  st.K_mm = covariance_matrix(st.item_inducing, st.item_inducing, item_kernel);
  const CholeskyFactor kf = cholesky_with_jitter(st.K_mm, item_kernel.jitter);
  st.K_inv = kf.inverse();
  st.log_det_K = log_det_from_llt(kf.llt);
  st.A = covariance_matrix(dataset.items, st.item_inducing, item_kernel) *
         st.K_inv;
  const Eigen::Index m = st.item_inducing.rows();
  const Eigen::MatrixXd item_cov0 =
      st.K_mm + kf.jitter_used * Eigen::MatrixXd::Identity(m, m);

  Eigen::MatrixXd user_cov0;
  if (st.user_kernel_split > 0) {
    user_kernel.validate();
    if (user_inducing.size() < 1) {
      throw InvalidInputError("crowd: need at least one inducing user");
    }
    st.user_inducing = user_inducing.points;
    st.L_mm =
        covariance_matrix(st.user_inducing, st.user_inducing, user_kernel);
    const CholeskyFactor lf = cholesky_with_jitter(st.L_mm, user_kernel.jitter);
    st.L_inv = lf.inverse();
    st.log_det_L = log_det_from_llt(lf.llt);
    st.A_w = covariance_matrix(dataset.users, st.user_inducing, user_kernel) *
             st.L_inv;
    const Eigen::Index mw = st.user_inducing.rows();
    user_cov0 = st.L_mm + lf.jitter_used * Eigen::MatrixXd::Identity(mw, mw);
  }

  st.consensus.mean = Eigen::VectorXd::Zero(m);
  st.consensus.cov = item_cov0;
  st.consensus.cov_inv = st.K_inv;
  st.consensus.alpha0 = st.consensus.alpha = hyper.alpha0_t;
  st.consensus.beta0 = st.consensus.beta = hyper.beta0_t;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  st.item_components.resize(static_cast<size_t>(hyper.C));
  st.user_components.resize(static_cast<size_t>(hyper.C));
  for (int c = 0; c < hyper.C; ++c) {
    CrowdFactor& v = st.item_components[static_cast<size_t>(c)];
    v.mean.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) v.mean[i] = 1e-4 * normal(rng);
    v.cov = item_cov0;
    v.cov_inv = st.K_inv;
    v.alpha0 = v.alpha = hyper.alpha0_v;
    v.beta0 = v.beta = hyper.beta0_v;

    CrowdFactor& w = st.user_components[static_cast<size_t>(c)];
    if (c < st.user_kernel_split) {
      w.mean = Eigen::VectorXd::Zero(st.user_inducing.rows());
      w.cov = user_cov0;
      w.cov_inv = st.L_inv;
    } else {
      w.mean = Eigen::VectorXd::Zero(st.num_users);
      w.cov = Eigen::MatrixXd::Identity(st.num_users, st.num_users);
      w.cov_inv = w.cov;
    }
    w.alpha0 = w.alpha = hyper.alpha0_w;
    w.beta0 = w.beta = hyper.beta0_w;
  }

  // Beta-Bernoulli noise parameters from the prior moments of Phi(z); under
  // the prior the component contributions are independent products, so the
  // variance of z_p adds C * E[dv^2] E[w^2] to the consensus term.
  if (!dataset.pairs.empty()) {
    double mean_dk = 0.0;
    for (const PairwiseLabel& p : dataset.pairs) {
      const double k_ab = kernel_value(dataset.items.row(p.item_a),
                                       dataset.items.row(p.item_b), item_kernel);
      mean_dk += 2.0 - 2.0 * k_ab;
    }
    mean_dk /= static_cast<double>(dataset.pairs.size());
    // Unit-scale prior moments (see the matching note in gppl_init): the
    // consensus contributes mean_dk and each of the C components contributes
    // mean_dk times a unit-variance weight.
    const double prior_var_z =
        mean_dk * (1.0 + static_cast<double>(hyper.C));
    const BetaMoments bm = estimate_beta_prior(0.0, prior_var_z);
    st.gamma = bm.gamma;
    st.lambda = bm.lambda;
  }
  return st;
}

CrowdWorkspace crowd_workspace(const CrowdState& state,
                               const PreferenceDataset& dataset,
                               std::span<const int> batch) {
  if (state.A.rows() == 0) {
    throw InternalError("crowd_workspace: training caches are not populated");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index m = state.num_item_inducing();
  const int comps = state.num_components();

  CrowdWorkspace ws;
  ws.pairs.reserve(batch.size());
  ws.delta_a.resize(n, m);
  ws.schur_item.resize(n);
  ws.orient.resize(n);
  ws.q_diag.resize(n);
  ws.dc_t.resize(n);
  ws.dc_v.resize(n, comps);
  ws.omega_u.resize(n, comps);
  ws.dt.resize(n);
  ws.dv.resize(n, comps);
  ws.w_u.resize(n, comps);
  ws.z_hat.resize(n);
  ws.phi_z.resize(n);
  ws.coef.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const PairwiseLabel& p = dataset.pairs.at(static_cast<size_t>(batch[i]));
    ws.pairs.push_back(p);
    ws.delta_a.row(i) = state.A.row(p.item_a) - state.A.row(p.item_b);
    ws.orient[i] = 2.0 * static_cast<double>(p.y) - 1.0;
    ws.q_diag[i] = observation_noise(state.gamma, state.lambda, p.y);
  }

  const Eigen::MatrixXd dK = ws.delta_a * state.K_mm;
  for (Eigen::Index i = 0; i < n; ++i) {
    const PairwiseLabel& p = ws.pairs[static_cast<size_t>(i)];
    const double k_ab =
        kernel_value(dataset.items.row(p.item_a), dataset.items.row(p.item_b),
                     state.item_kernel);
    const double schur = 2.0 - 2.0 * k_ab - dK.row(i).dot(ws.delta_a.row(i));
    ws.schur_item[i] = std::max(schur, 0.0);
  }

  {
    const Eigen::MatrixXd dS = ws.delta_a * state.consensus.cov;
    const double e_s = state.consensus.expected_scale();
    for (Eigen::Index i = 0; i < n; ++i) {
      ws.dc_t[i] =
          ws.schur_item[i] / e_s + dS.row(i).dot(ws.delta_a.row(i));
    }
  }
  for (int c = 0; c < comps; ++c) {
    const CrowdFactor& v = state.item_components[static_cast<size_t>(c)];
    const Eigen::MatrixXd dS = ws.delta_a * v.cov;
    const double e_s = v.expected_scale();
    for (Eigen::Index i = 0; i < n; ++i) {
      ws.dc_v(i, c) =
          ws.schur_item[i] / e_s + dS.row(i).dot(ws.delta_a.row(i));
    }
  }

  if (state.user_kernel_split > 0) {
    ws.a_w_rows.resize(n, state.user_inducing.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
      ws.a_w_rows.row(i) = state.A_w.row(ws.pairs[static_cast<size_t>(i)].user);
    }
  }
  // Per-pair weight variances omega_{c, u_p}.
  Eigen::VectorXd schur_user;
  if (state.user_kernel_split > 0) {
    const Eigen::MatrixXd lw = ws.a_w_rows * state.L_mm;
    schur_user.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      schur_user[i] =
          std::max(1.0 - lw.row(i).dot(ws.a_w_rows.row(i)), 0.0);
    }
  }
  for (int c = 0; c < comps; ++c) {
    const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
    if (c < state.user_kernel_split) {
      const Eigen::MatrixXd ws_cov = ws.a_w_rows * w.cov;
      const double e_s = w.expected_scale();
      for (Eigen::Index i = 0; i < n; ++i) {
        ws.omega_u(i, c) =
            schur_user[i] / e_s + ws_cov.row(i).dot(ws.a_w_rows.row(i));
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        const int u = ws.pairs[static_cast<size_t>(i)].user;
        ws.omega_u(i, c) = w.cov(u, u);
      }
    }
  }

  crowd_refresh_means(state, ws);
  return ws;
}

void crowd_refresh_means(const CrowdState& state, CrowdWorkspace& ws) {
  const Eigen::Index n = ws.size();
  const int comps = state.num_components();
  ws.dt = ws.delta_a * state.consensus.mean;
  for (int c = 0; c < comps; ++c) {
    ws.dv.col(c) =
        ws.delta_a * state.item_components[static_cast<size_t>(c)].mean;
    const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
    if (c < state.user_kernel_split) {
      ws.w_u.col(c) = ws.a_w_rows * w.mean;
    } else {
      for (Eigen::Index i = 0; i < n; ++i) {
        ws.w_u(i, c) = w.mean[ws.pairs[static_cast<size_t>(i)].user];
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    // Linearize about the expectation of z_p (factor means only); see the
    // matching note in the single-user workspace.
    double mu = ws.dt[i];
    for (int c = 0; c < comps; ++c) {
      mu += ws.dv(i, c) * ws.w_u(i, c);
    }
    const double z = ws.orient[i] * mu;
    ws.z_hat[i] = z;
    const double phi = clamp_prob(std_normal_cdf(z));
    ws.phi_z[i] = phi;
    ws.coef[i] = phi * (1.0 - phi);
  }
}

void crowd_update_consensus(CrowdState& state, const CrowdWorkspace& ws,
                            double rho, double pi,
                            const Eigen::MatrixXd& prec_base,
                            const Eigen::VectorXd& mean_base) {
  if (rho == 0.0) return;
  const Eigen::VectorXd g = ws.coef.cwiseProduct(ws.orient);
  const Eigen::VectorXd q_inv = ws.q_diag.cwiseInverse();
  const Eigen::MatrixXd ga = g.asDiagonal() * ws.delta_a;
  const Eigen::MatrixXd prec_like = ga.transpose() * q_inv.asDiagonal() * ga;
  const Eigen::VectorXd resid =
      (1.0 - ws.phi_z.array()).matrix() + g.cwiseProduct(ws.dt);
  const Eigen::VectorXd rhs = ga.transpose() * q_inv.cwiseProduct(resid);
  finalize_factor(state.consensus, rho, pi, prec_base, mean_base, state.K_inv,
                  prec_like, rhs, state.item_kernel.jitter);
}

void crowd_update_item_component(CrowdState& state, int c,
                                 const CrowdWorkspace& ws, double rho,
                                 double pi, const Eigen::MatrixXd& prec_base,
                                 const Eigen::VectorXd& mean_base) {
  if (rho == 0.0) return;
  const Eigen::VectorXd g = ws.coef.cwiseProduct(ws.orient);
  const Eigen::VectorXd wc = ws.w_u.col(c);
  const Eigen::VectorXd om = ws.omega_u.col(c);
  const Eigen::VectorXd dvc = ws.dv.col(c);
  const Eigen::VectorXd q_inv = ws.q_diag.cwiseInverse();

  const Eigen::VectorXd prec_w = (wc.array().square() + om.array()) *
                                 ws.coef.array().square() * q_inv.array();
  const Eigen::MatrixXd prec_like =
      ws.delta_a.transpose() * prec_w.asDiagonal() * ws.delta_a;

  const Eigen::VectorXd resid = (1.0 - ws.phi_z.array()).matrix() +
                                g.cwiseProduct(wc).cwiseProduct(dvc);
  const Eigen::VectorXd rc =
      g.cwiseProduct(wc).cwiseProduct(resid).cwiseProduct(q_inv);
  const Eigen::VectorXd rhs = ws.delta_a.transpose() * rc;
  finalize_factor(state.item_components[static_cast<size_t>(c)], rho, pi,
                  prec_base, mean_base, state.K_inv, prec_like, rhs,
                  state.item_kernel.jitter);
}

void crowd_update_user_component(CrowdState& state, int c,
                                 const CrowdWorkspace& ws, double rho,
                                 double pi, const Eigen::MatrixXd& prec_base,
                                 const Eigen::VectorXd& mean_base) {
  if (rho == 0.0) return;
  CrowdFactor& f = state.user_components[static_cast<size_t>(c)];
  const Eigen::Index n = ws.size();
  const Eigen::VectorXd g = ws.coef.cwiseProduct(ws.orient);
  const Eigen::VectorXd dvc = ws.dv.col(c);
  const Eigen::VectorXd q_inv = ws.q_diag.cwiseInverse();
  // r_p = (v_a - v_b)^2 plus the posterior variance of that difference.
  const Eigen::VectorXd r =
      dvc.array().square() + ws.dc_v.col(c).array();
  const Eigen::VectorXd prec_w =
      ws.coef.array().square() * r.array() * q_inv.array();
  const Eigen::VectorXd resid = (1.0 - ws.phi_z.array()).matrix() +
                                g.cwiseProduct(dvc).cwiseProduct(ws.w_u.col(c));
  const Eigen::VectorXd rc =
      g.cwiseProduct(dvc).cwiseProduct(resid).cwiseProduct(q_inv);

  if (c < state.user_kernel_split) {
    const Eigen::MatrixXd prec_like =
        ws.a_w_rows.transpose() * prec_w.asDiagonal() * ws.a_w_rows;
    const Eigen::VectorXd rhs = ws.a_w_rows.transpose() * rc;
    finalize_factor(f, rho, pi, prec_base, mean_base, state.L_inv, prec_like,
                    rhs, state.user_kernel.jitter);
  } else {
    const Eigen::Index u = f.dim();
    Eigen::MatrixXd prec_like = Eigen::MatrixXd::Zero(u, u);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(u);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int up = ws.pairs[static_cast<size_t>(i)].user;
      prec_like(up, up) += prec_w[i];
      rhs[up] += rc[i];
    }
    finalize_factor(f, rho, pi, prec_base, mean_base,
                    Eigen::MatrixXd::Identity(u, u), prec_like, rhs, 1e-10);
  }
}

UserLinearization compute_H(const std::vector<PairwiseLabel>& batch,
                            const Eigen::VectorXd& z_hat) {
  if (static_cast<Eigen::Index>(batch.size()) != z_hat.size()) {
    throw InvalidInputError("compute_H: batch and z_hat sizes differ");
  }
  UserLinearization out;
  for (const PairwiseLabel& p : batch) out.users.push_back(p.user);
  std::sort(out.users.begin(), out.users.end());
  out.users.erase(std::unique(out.users.begin(), out.users.end()),
                  out.users.end());
  out.H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(batch.size()),
                                static_cast<Eigen::Index>(out.users.size()));
  for (size_t p = 0; p < batch.size(); ++p) {
    const auto col = std::lower_bound(out.users.begin(), out.users.end(),
                                      batch[p].user) -
                     out.users.begin();
    const double phi = std_normal_cdf(z_hat[static_cast<Eigen::Index>(p)]);
    out.H(static_cast<Eigen::Index>(p), col) =
        phi * (1.0 - phi) * (2.0 * batch[p].y - 1.0);
  }
  return out;
}

void crowd_update_scales(CrowdState& state) {
  update_factor_scale(state.consensus, state.K_inv);
  for (int c = 0; c < state.num_components(); ++c) {
    update_factor_scale(state.item_components[static_cast<size_t>(c)],
                        state.K_inv);
    update_factor_scale(state.user_components[static_cast<size_t>(c)],
                        user_prior_inverse(state, c));
  }
}

ElboBreakdown crowd_elbo_breakdown(const CrowdState& state,
                                   const PreferenceDataset& dataset) {
  ElboBreakdown out;
  const int comps = state.num_components();

  Eigen::MatrixXd a_local;
  const Eigen::MatrixXd* a = &state.A;
  if (state.A.rows() != dataset.items.rows()) {
    a_local = covariance_matrix(dataset.items, state.item_inducing,
                                state.item_kernel) *
              state.K_inv;
    a = &a_local;
  }
  Eigen::MatrixXd aw_local;
  const Eigen::MatrixXd* aw = &state.A_w;
  if (state.user_kernel_split > 0 &&
      state.A_w.rows() != dataset.users.rows()) {
    aw_local = covariance_matrix(dataset.users, state.user_inducing,
                                 state.user_kernel) *
               state.L_inv;
    aw = &aw_local;
  }

  const Eigen::VectorXd t_items = (*a) * state.consensus.mean;
  Eigen::MatrixXd v_items(dataset.items.rows(), comps);
  Eigen::MatrixXd w_users(state.num_users, comps);
  for (int c = 0; c < comps; ++c) {
    v_items.col(c) = (*a) * state.item_components[static_cast<size_t>(c)].mean;
    const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
    if (c < state.user_kernel_split) {
      w_users.col(c) = (*aw) * w.mean;
    } else {
      w_users.col(c) = w.mean;
    }
  }

  for (const PairwiseLabel& p : dataset.pairs) {
    const double fa = crowd_utility(v_items, w_users, t_items, p.item_a,
                                    p.user);
    const double fb = crowd_utility(v_items, w_users, t_items, p.item_b,
                                    p.user);
    const double orient = 2.0 * static_cast<double>(p.y) - 1.0;
    out.likelihood += std::log(clamp_prob(std_normal_cdf(orient * (fa - fb))));
  }

  auto add_factor = [&out](const CrowdFactor& f, const Eigen::MatrixXd& k_inv,
                           double log_det_k, double jitter) {
    const double e_s = f.expected_scale();
    const double e_ln_s = f.expected_log_scale();
    out.kl_gauss += gaussian_kl_term(f.mean, f.cov, k_inv, log_det_k, e_s,
                                     e_ln_s, jitter);
    out.kl_gamma +=
        gamma_kl_term(f.alpha0, f.beta0, f.alpha, f.beta, e_s, e_ln_s);
  };
  add_factor(state.consensus, state.K_inv, state.log_det_K,
             state.item_kernel.jitter);
  for (int c = 0; c < comps; ++c) {
    add_factor(state.item_components[static_cast<size_t>(c)], state.K_inv,
               state.log_det_K, state.item_kernel.jitter);
    const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
    if (c < state.user_kernel_split) {
      add_factor(w, state.L_inv, state.log_det_L, state.user_kernel.jitter);
    } else {
      add_factor(w, Eigen::MatrixXd::Identity(w.dim(), w.dim()), 0.0, 1e-10);
    }
  }
  return out;
}

double crowd_elbo(const CrowdState& state, const PreferenceDataset& dataset) {
  return crowd_elbo_breakdown(state, dataset).total();
}

CrowdState crowd_fit(const PreferenceDataset& dataset,
                     const KernelConfig& item_kernel,
                     const KernelConfig& user_kernel,
                     const InducingSet& item_inducing,
                     const InducingSet& user_inducing,
                     const CrowdHyperparams& hyper,
                     const SviSchedule& schedule) {
  schedule.validate();
  if (dataset.pairs.empty()) {
    throw InvalidInputError("crowd_fit: dataset has no pairs");
  }
  CrowdState st = crowd_init(dataset, item_kernel, user_kernel, item_inducing,
                             user_inducing, hyper, schedule.seed);
  const int comps = st.num_components();
  const int total = static_cast<int>(dataset.pairs.size());
  BatchSampler sampler(total, schedule.batch_size, schedule.seed);

  if (schedule.track_elbo) {
    st.elbo_trace.push_back(crowd_elbo(st, dataset));
  }

  int settled_checks = 0;
  for (int iter = 1; iter <= schedule.max_iterations; ++iter) {
    const double rho = schedule.rho(iter);
    const std::vector<int> batch = sampler.next();
    const double pi =
        static_cast<double>(total) / static_cast<double>(batch.size());

    // (1 - rho) blends are against the state at the start of this outer
    // iteration so inner-loop passes do not compound the decay.
    const Eigen::MatrixXd t_prec = st.consensus.cov_inv;
    const Eigen::VectorXd t_mean = st.consensus.mean;
    std::vector<Eigen::MatrixXd> v_prec(static_cast<size_t>(comps));
    std::vector<Eigen::VectorXd> v_mean(static_cast<size_t>(comps));
    std::vector<Eigen::MatrixXd> w_prec(static_cast<size_t>(comps));
    std::vector<Eigen::VectorXd> w_mean(static_cast<size_t>(comps));
    for (int c = 0; c < comps; ++c) {
      v_prec[static_cast<size_t>(c)] =
          st.item_components[static_cast<size_t>(c)].cov_inv;
      v_mean[static_cast<size_t>(c)] =
          st.item_components[static_cast<size_t>(c)].mean;
      w_prec[static_cast<size_t>(c)] =
          st.user_components[static_cast<size_t>(c)].cov_inv;
      w_mean[static_cast<size_t>(c)] =
          st.user_components[static_cast<size_t>(c)].mean;
    }

    Eigen::VectorXd prev_phi;
    Eigen::VectorXd prev_coef;
    for (int pass = 0; pass < schedule.inner_max; ++pass) {
      CrowdWorkspace ws = crowd_workspace(st, dataset, batch);
      if (pass > 0) {
        if ((ws.phi_z - prev_phi).cwiseAbs().maxCoeff() < schedule.inner_tol) {
          break;
        }
        // Damp the relinearization between passes (see the single-user fit
        // loop for the rationale); the residual terms pick up the damped
        // coefficients through phi_z and coef.
        ws.phi_z = 0.5 * (ws.phi_z + prev_phi);
        ws.coef = 0.5 * (ws.coef + prev_coef);
      }
      prev_phi = ws.phi_z;
      prev_coef = ws.coef;

      crowd_update_consensus(st, ws, rho, pi, t_prec, t_mean);
      for (int c = 0; c < comps; ++c) {
        crowd_refresh_means(st, ws);
        crowd_update_item_component(st, c, ws, rho, pi,
                                    v_prec[static_cast<size_t>(c)],
                                    v_mean[static_cast<size_t>(c)]);
        update_factor_scale(st.item_components[static_cast<size_t>(c)],
                            st.K_inv);
        crowd_refresh_means(st, ws);
        crowd_update_user_component(st, c, ws, rho, pi,
                                    w_prec[static_cast<size_t>(c)],
                                    w_mean[static_cast<size_t>(c)]);
        update_factor_scale(st.user_components[static_cast<size_t>(c)],
                            user_prior_inverse(st, c));
      }
      crowd_refresh_means(st, ws);
    }
    update_factor_scale(st.consensus, st.K_inv);
    st.iteration = iter;

    if (schedule.check_psd) {
      auto check = [&](const Eigen::MatrixXd& cov, const char* name) {
        if (Eigen::LLT<Eigen::MatrixXd>(cov).info() != Eigen::Success) {
          throw NumericalError(std::string("crowd: posterior covariance ") +
                               name + " failed a Cholesky check at iteration " +
                               std::to_string(iter));
        }
      };
      check(st.consensus.cov, "S_t");
      for (const CrowdFactor& f : st.item_components) check(f.cov, "S_v");
      for (const CrowdFactor& f : st.user_components) check(f.cov, "S_w");
    }

    if (schedule.track_elbo && iter % schedule.elbo_every == 0) {
      const double elbo = crowd_elbo(st, dataset);
      const double prev = st.elbo_trace.back();
      st.elbo_trace.push_back(elbo);
      if (schedule.convergence_tol > 0.0) {
        const double rel =
            std::abs(elbo - prev) / std::max(std::abs(elbo), 1e-300);
        settled_checks = rel < schedule.convergence_tol ? settled_checks + 1 : 0;
        if (settled_checks >= 2) break;
      }
    }
  }

  st.A.resize(0, 0);
  st.A_w.resize(0, 0);
  return st;
}

Eigen::MatrixXd CrowdPrediction::user_cov(int u) const {
  Eigen::MatrixXd cov = t_cov;
  for (size_t c = 0; c < v_cov.size(); ++c) {
    const double w = w_mean(u, static_cast<Eigen::Index>(c));
    const double om = omega(u, static_cast<Eigen::Index>(c));
    const Eigen::VectorXd& v = v_mean.col(static_cast<Eigen::Index>(c));
    cov += (om + w * w) * v_cov[c] + om * (v * v.transpose());
  }
  return 0.5 * (cov + cov.transpose()).eval();
}

CrowdPrediction crowd_predict(const CrowdState& state,
                              const Eigen::MatrixXd& X_star,
                              const Eigen::MatrixXd& U_star,
                              const std::vector<int>& user_indices) {
  const int comps = state.num_components();
  Eigen::Index num_users = static_cast<Eigen::Index>(user_indices.size());
  if (num_users == 0) num_users = U_star.rows();
  if (num_users == 0) {
    throw InvalidInputError("crowd_predict: no users requested");
  }
  if (state.user_kernel_split > 0 && U_star.rows() != num_users) {
    throw InvalidInputError(
        "crowd_predict: user features required for user-kernel components");
  }
  if (state.user_kernel_split < comps &&
      static_cast<Eigen::Index>(user_indices.size()) != num_users) {
    throw InvalidInputError(
        "crowd_predict: user indices required for identity components");
  }

  CrowdPrediction pred;
  const Eigen::MatrixXd k_sm =
      covariance_matrix(X_star, state.item_inducing, state.item_kernel);
  const Eigen::MatrixXd a_s = k_sm * state.K_inv;
  const Eigen::MatrixXd k_ss =
      covariance_matrix(X_star, X_star, state.item_kernel);
  const Eigen::MatrixXd item_schur = k_ss - a_s * k_sm.transpose();

  auto project_item = [&](const CrowdFactor& f, Eigen::VectorXd& mean,
                          Eigen::MatrixXd& cov) {
    mean = a_s * f.mean;
    Eigen::MatrixXd c =
        item_schur / f.expected_scale() + a_s * f.cov * a_s.transpose();
    cov = 0.5 * (c + c.transpose());
  };

  project_item(state.consensus, pred.t_mean, pred.t_cov);
  pred.v_mean.resize(X_star.rows(), comps);
  pred.v_cov.resize(static_cast<size_t>(comps));
  for (int c = 0; c < comps; ++c) {
    Eigen::VectorXd mean;
    project_item(state.item_components[static_cast<size_t>(c)], mean,
                 pred.v_cov[static_cast<size_t>(c)]);
    pred.v_mean.col(c) = mean;
  }

  Eigen::MatrixXd a_u;  // num_users x Mw, for kernel components
  Eigen::VectorXd user_schur;
  if (state.user_kernel_split > 0) {
    const Eigen::MatrixXd l_um =
        covariance_matrix(U_star, state.user_inducing, state.user_kernel);
    a_u = l_um * state.L_inv;
    user_schur.resize(num_users);
    for (Eigen::Index u = 0; u < num_users; ++u) {
      user_schur[u] = std::max(1.0 - a_u.row(u).dot(l_um.row(u)), 0.0);
    }
  }

  pred.w_mean = Eigen::MatrixXd::Zero(num_users, comps);
  pred.omega = Eigen::MatrixXd::Zero(num_users, comps);
  for (int c = 0; c < comps; ++c) {
    const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
    if (c < state.user_kernel_split) {
      pred.w_mean.col(c) = a_u * w.mean;
      const Eigen::MatrixXd t = a_u * w.cov;
      for (Eigen::Index u = 0; u < num_users; ++u) {
        pred.omega(u, c) = user_schur[u] / w.expected_scale() +
                           t.row(u).dot(a_u.row(u));
      }
    } else {
      for (Eigen::Index u = 0; u < num_users; ++u) {
        const int idx = user_indices[static_cast<size_t>(u)];
        if (idx >= 0) {
          if (idx >= w.dim()) {
            throw InvalidInputError("crowd_predict: user index out of range");
          }
          pred.w_mean(u, c) = w.mean[idx];
          pred.omega(u, c) = w.cov(idx, idx);
        } else {
          // Unseen user: prior weight moments.
          pred.omega(u, c) = 1.0 / w.expected_scale();
        }
      }
    }
  }

  pred.F = pred.t_mean.replicate(1, num_users);
  for (int c = 0; c < comps; ++c) {
    pred.F += pred.v_mean.col(c) * pred.w_mean.col(c).transpose();
  }
  return pred;
}

Eigen::VectorXd crowd_predict_pairs(const CrowdState& state,
                                    const Eigen::MatrixXd& items,
                                    const Eigen::MatrixXd& users,
                                    const std::vector<int>& user_indices,
                                    const std::vector<PairwiseLabel>& pairs) {
  std::vector<int> index_of(static_cast<size_t>(items.rows()), -1);
  std::vector<int> used;
  for (const PairwiseLabel& p : pairs) {
    for (int item : {p.item_a, p.item_b}) {
      if (item < 0 || item >= items.rows()) {
        throw InvalidInputError("crowd_predict_pairs: item index out of range");
      }
      if (index_of[static_cast<size_t>(item)] < 0) {
        index_of[static_cast<size_t>(item)] = static_cast<int>(used.size());
        used.push_back(item);
      }
    }
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(used.size()), items.cols());
  for (size_t i = 0; i < used.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = items.row(used[i]);
  }

  const CrowdPrediction pred = crowd_predict(state, x, users, user_indices);
  std::vector<Eigen::MatrixXd> cov_cache(
      static_cast<size_t>(pred.F.cols()));

  Eigen::VectorXd probs(static_cast<Eigen::Index>(pairs.size()));
  for (size_t i = 0; i < pairs.size(); ++i) {
    const PairwiseLabel& p = pairs[i];
    if (p.user < 0 || p.user >= pred.F.cols()) {
      throw InvalidInputError("crowd_predict_pairs: user index out of range");
    }
    Eigen::MatrixXd& cov = cov_cache[static_cast<size_t>(p.user)];
    if (cov.size() == 0) cov = pred.user_cov(p.user);
    const int a = index_of[static_cast<size_t>(p.item_a)];
    const int b = index_of[static_cast<size_t>(p.item_b)];
    probs[static_cast<Eigen::Index>(i)] =
        pair_probability(pred.F(a, p.user), pred.F(b, p.user), cov(a, a),
                         cov(b, b), cov(a, b));
  }
  return probs;
}

double component_variance(const CrowdState& state, int c) {
  if (c < 0 || c >= state.num_components()) {
    throw InvalidInputError("component_variance: component index out of range");
  }
  const CrowdFactor& v = state.item_components[static_cast<size_t>(c)];
  const CrowdFactor& w = state.user_components[static_cast<size_t>(c)];
  return (v.beta / v.alpha) * (w.beta / w.alpha);
}

}  // namespace prefgp
