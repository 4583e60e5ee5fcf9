#include "prefgp/gppl.hpp"

#include <cmath>

#include "internal_math.hpp"
#include "prefgp/quadrature.hpp"

namespace prefgp {

using internal::elbo_quadrature;
using internal::factorize_spd;
using internal::gamma_kl_term;
using internal::gaussian_kl_term;
using internal::log_det_from_llt;

double GpplState::expected_log_scale() const {
  return digamma(alpha) - std::log(beta);
}

std::size_t GpplState::persistent_bytes() const {
  const std::size_t doubles =
      static_cast<std::size_t>(inducing.size() + f_hat_m.size() + S.size() +
                               S_inv.size() + K_mm.size() + K_inv.size() +
                               kernel.length_scales.size()) +
      8;  // scalar hyper/posterior parameters
  return doubles * sizeof(double);
}

GpplState gppl_init(const PreferenceDataset& dataset,
                    const KernelConfig& kernel_cfg, const InducingSet& inducing,
                    double alpha_0, double beta_0) {
  dataset.validate();
  kernel_cfg.validate();
  if (!(alpha_0 > 0.0) || !(beta_0 > 0.0)) {
    throw InvalidConfigError("gppl: alpha_0 and beta_0 must be positive");
  }
  if (inducing.size() < 1) {
    throw InvalidInputError("gppl: need at least one inducing point");
  }

  GpplState st;
  st.kernel = kernel_cfg;
  st.inducing = inducing.points;
  st.alpha0 = alpha_0;
  st.beta0 = beta_0;
  st.alpha = alpha_0;
  st.beta = beta_0;

  st.K_mm = covariance_matrix(st.inducing, st.inducing, kernel_cfg);
  const CholeskyFactor kf = cholesky_with_jitter(st.K_mm, kernel_cfg.jitter);
  st.K_inv = kf.inverse();
  st.log_det_K = log_det_from_llt(kf.llt);

  const Eigen::Index m = st.inducing.rows();
  st.f_hat_m = Eigen::VectorXd::Zero(m);
  st.S = st.K_mm + kf.jitter_used * Eigen::MatrixXd::Identity(m, m);
  st.S_inv = st.K_inv;

  st.K_nm = covariance_matrix(dataset.items, st.inducing, kernel_cfg);
  st.A = st.K_nm * st.K_inv;

  // Moments of Phi(z) under the prior, averaged over the training pairs,
  // fix the beta-Bernoulli noise parameters for the whole fit.
  if (!dataset.pairs.empty()) {
    double mean_dk = 0.0;
    for (const PairwiseLabel& p : dataset.pairs) {
      const double k_ab = kernel_value(dataset.items.row(p.item_a),
                                       dataset.items.row(p.item_b), kernel_cfg);
      mean_dk += 2.0 - 2.0 * k_ab;
    }
    mean_dk /= static_cast<double>(dataset.pairs.size());
    // Moments are taken under the unit-scale GP prior. Folding the Gamma
    // prior on the inverse scale into this variance makes the marginal of
    // Phi(z) bimodal and the matched beta degenerate, which collapses the
    // observation noise Q towards zero and destabilises the updates.
    const double prior_var_z = mean_dk;
    const BetaMoments bm = estimate_beta_prior(0.0, prior_var_z);
    st.gamma = bm.gamma;
    st.lambda = bm.lambda;
  }
  return st;
}

BatchWorkspace gppl_workspace(const GpplState& state,
                              const PreferenceDataset& dataset,
                              std::span<const int> batch) {
  if (state.A.rows() == 0) {
    throw InternalError("gppl_workspace: training caches are not populated");
  }
  const Eigen::Index m = state.num_inducing();
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const double e_s = state.expected_scale();

  BatchWorkspace ws;
  ws.gamma = state.gamma;
  ws.lambda = state.lambda;
  ws.pairs.reserve(batch.size());
  ws.delta_a.resize(n, m);
  ws.z_hat.resize(n);
  ws.phi_z.resize(n);
  ws.g.resize(n);
  ws.q_diag.resize(n);
  ws.lin_mean.resize(n);
  ws.y.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const PairwiseLabel& p = dataset.pairs.at(static_cast<size_t>(batch[i]));
    ws.pairs.push_back(p);
    ws.delta_a.row(i) = state.A.row(p.item_a) - state.A.row(p.item_b);
    ws.y[i] = static_cast<double>(p.y);
    ws.q_diag[i] = observation_noise(state.gamma, state.lambda, p.y);
  }

  // The linearization point is the expectation of z_p; the 2 sigma^2 = 1
  // denominator is already marginalised into the unit scale. Folding the
  // posterior variance into z here (as the predictive probability does)
  // would let the residual 1 - Phi(z) stay bounded away from zero and make
  // the mean run away as the scale posterior loosens.
  (void)e_s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = ws.delta_a.row(i).dot(state.f_hat_m);
    const double orient = 2.0 * ws.y[i] - 1.0;
    const double z = orient * mu;
    ws.z_hat[i] = z;
    const double phi = clamp_prob(std_normal_cdf(z));
    ws.phi_z[i] = phi;
    ws.g[i] = phi * (1.0 - phi) * orient;
    ws.lin_mean[i] = ws.g[i] * mu;
  }
  return ws;
}

void gppl_update_batch(GpplState& state, const BatchWorkspace& workspace,
                       double rho, double pi, const Eigen::MatrixXd& s_inv_base,
                       const Eigen::VectorXd& f_base) {
  if (rho == 0.0) return;
  const Eigen::Index m = state.num_inducing();
  const Eigen::VectorXd q_inv = workspace.q_diag.cwiseInverse();
  const Eigen::MatrixXd ga = workspace.g.asDiagonal() * workspace.delta_a;
  const Eigen::MatrixXd lam = ga.transpose() * q_inv.asDiagonal() * ga;

  Eigen::MatrixXd s_inv_new =
      (1.0 - rho) * s_inv_base +
      rho * (state.expected_scale() * state.K_inv + pi * lam);
  s_inv_new = 0.5 * (s_inv_new + s_inv_new.transpose()).eval();

  const Eigen::VectorXd resid =
      (1.0 - workspace.phi_z.array()).matrix() + workspace.lin_mean;
  const Eigen::VectorXd h = (1.0 - rho) * (s_inv_base * f_base) +
                            rho * pi *
                                (ga.transpose() * q_inv.cwiseProduct(resid));

  const Eigen::LLT<Eigen::MatrixXd> llt =
      factorize_spd(s_inv_new, state.kernel.jitter);
  Eigen::MatrixXd s_new = llt.solve(Eigen::MatrixXd::Identity(m, m));
  state.S = 0.5 * (s_new + s_new.transpose());
  state.S_inv = s_inv_new;
  state.f_hat_m = llt.solve(h);
}

void gppl_update_scale(GpplState& state) {
  const Eigen::Index m = state.num_inducing();
  state.alpha = state.alpha0 + 0.5 * static_cast<double>(m);
  const double trace_term = (state.K_inv * state.S).trace() +
                            state.f_hat_m.dot(state.K_inv * state.f_hat_m);
  state.beta = state.beta0 + 0.5 * trace_term;
  if (!(state.beta > 0.0) || !std::isfinite(state.beta)) {
    throw NumericalError("gppl_update_scale: non-positive beta");
  }
}

ElboBreakdown gppl_elbo_breakdown(const GpplState& state,
                                  const PreferenceDataset& dataset) {
  ElboBreakdown out;
  const double e_s = state.expected_scale();
  const double e_ln_s = state.expected_log_scale();

  Eigen::MatrixXd a_local;
  const Eigen::MatrixXd* a = &state.A;
  if (state.A.rows() != dataset.items.rows()) {
    a_local = covariance_matrix(dataset.items, state.inducing, state.kernel) *
              state.K_inv;
    a = &a_local;
  }

  const GaussHermite& gh = elbo_quadrature();
  for (const PairwiseLabel& p : dataset.pairs) {
    const Eigen::VectorXd da =
        (a->row(p.item_a) - a->row(p.item_b)).transpose();
    const double k_ab = kernel_value(dataset.items.row(p.item_a),
                                     dataset.items.row(p.item_b), state.kernel);
    double schur = 2.0 - 2.0 * k_ab - da.dot(state.K_mm * da);
    if (schur < 0.0) schur = 0.0;
    const double var = schur / e_s + da.dot(state.S * da);
    const double orient = 2.0 * static_cast<double>(p.y) - 1.0;
    const double mu = orient * da.dot(state.f_hat_m);
    out.likelihood += gh.expect(
        [](double z) { return std::log(clamp_prob(std_normal_cdf(z))); }, mu,
        var);
  }

  out.kl_gauss = gaussian_kl_term(state.f_hat_m, state.S, state.K_inv,
                                  state.log_det_K, e_s, e_ln_s,
                                  state.kernel.jitter);
  out.kl_gamma = gamma_kl_term(state.alpha0, state.beta0, state.alpha,
                               state.beta, e_s, e_ln_s);
  return out;
}

double gppl_elbo(const GpplState& state, const PreferenceDataset& dataset) {
  return gppl_elbo_breakdown(state, dataset).total();
}

GpplState gppl_fit(const PreferenceDataset& dataset,
                   const KernelConfig& kernel_cfg, const InducingSet& inducing,
                   double alpha_0, double beta_0, const SviSchedule& schedule) {
  schedule.validate();
  if (dataset.pairs.empty()) {
    throw InvalidInputError("gppl_fit: dataset has no pairs");
  }
  GpplState st = gppl_init(dataset, kernel_cfg, inducing, alpha_0, beta_0);

  const int total = static_cast<int>(dataset.pairs.size());
  BatchSampler sampler(total, schedule.batch_size, schedule.seed);

  if (schedule.track_elbo) {
    st.elbo_trace.push_back(gppl_elbo(st, dataset));
  }

  int settled_checks = 0;
  for (int iter = 1; iter <= schedule.max_iterations; ++iter) {
    const double rho = schedule.rho(iter);
    const std::vector<int> batch = sampler.next();
    const double pi =
        static_cast<double>(total) / static_cast<double>(batch.size());

    const Eigen::MatrixXd s_inv_base = st.S_inv;
    const Eigen::VectorXd f_base = st.f_hat_m;
    Eigen::VectorXd prev_phi;
    Eigen::VectorXd prev_g;
    for (int inner = 0; inner < schedule.inner_max; ++inner) {
      BatchWorkspace ws = gppl_workspace(st, dataset, batch);
      if (inner > 0) {
        if ((ws.phi_z - prev_phi).cwiseAbs().maxCoeff() < schedule.inner_tol) {
          break;
        }
        // Damp the relinearization: without this, pairs whose latent
        // difference saturates lose their likelihood precision all at once
        // and the mean oscillates between the prior and the data fit.
        ws.phi_z = 0.5 * (ws.phi_z + prev_phi);
        ws.g = 0.5 * (ws.g + prev_g);
        ws.lin_mean = ws.g.cwiseProduct(ws.delta_a * st.f_hat_m);
      }
      prev_phi = ws.phi_z;
      prev_g = ws.g;
      gppl_update_batch(st, ws, rho, pi, s_inv_base, f_base);
    }
    gppl_update_scale(st);
    st.iteration = iter;

    if (schedule.check_psd) {
      if (Eigen::LLT<Eigen::MatrixXd>(st.S).info() != Eigen::Success) {
        throw NumericalError("gppl: posterior covariance S failed a Cholesky "
                             "check at iteration " + std::to_string(iter));
      }
    }

    if (schedule.track_elbo && iter % schedule.elbo_every == 0) {
      const double elbo = gppl_elbo(st, dataset);
      const double prev = st.elbo_trace.back();
      st.elbo_trace.push_back(elbo);
      if (schedule.convergence_tol > 0.0) {
        const double rel = std::abs(elbo - prev) /
                           std::max(std::abs(elbo), 1e-300);
        settled_checks = rel < schedule.convergence_tol ? settled_checks + 1 : 0;
        if (settled_checks >= 2) break;
      }
    }
  }

  st.K_nm.resize(0, 0);
  st.A.resize(0, 0);
  return st;
}

GpplPrediction gppl_predict(const GpplState& state,
                            const Eigen::MatrixXd& X_star) {
  const Eigen::MatrixXd k_sm =
      covariance_matrix(X_star, state.inducing, state.kernel);
  const Eigen::MatrixXd a_s = k_sm * state.K_inv;
  const Eigen::MatrixXd k_ss =
      covariance_matrix(X_star, X_star, state.kernel);

  GpplPrediction pred;
  pred.mean = a_s * state.f_hat_m;
  const Eigen::MatrixXd schur = k_ss - a_s * k_sm.transpose();
  Eigen::MatrixXd cov =
      schur / state.expected_scale() + a_s * state.S * a_s.transpose();
  pred.cov = 0.5 * (cov + cov.transpose());
  return pred;
}

Eigen::VectorXd gppl_predict_pairs(const GpplState& state,
                                   const Eigen::MatrixXd& items,
                                   const std::vector<PairwiseLabel>& pairs) {
  // Restrict the covariance computation to the items the pairs reference.
  std::vector<int> index_of(static_cast<size_t>(items.rows()), -1);
  std::vector<int> used;
  for (const PairwiseLabel& p : pairs) {
    for (int item : {p.item_a, p.item_b}) {
      if (item < 0 || item >= items.rows()) {
        throw InvalidInputError("gppl_predict_pairs: item index out of range");
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
  const GpplPrediction pred = gppl_predict(state, x);

  Eigen::VectorXd probs(static_cast<Eigen::Index>(pairs.size()));
  for (size_t i = 0; i < pairs.size(); ++i) {
    const int a = index_of[static_cast<size_t>(pairs[i].item_a)];
    const int b = index_of[static_cast<size_t>(pairs[i].item_b)];
    probs[static_cast<Eigen::Index>(i)] =
        pair_probability(pred.mean[a], pred.mean[b], pred.cov(a, a),
                         pred.cov(b, b), pred.cov(a, b));
  }
  return probs;
}

}  // namespace prefgp
