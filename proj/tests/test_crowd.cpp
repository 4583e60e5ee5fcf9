#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "prefgp/crowd.hpp"
#include "prefgp/eval.hpp"
#include "test_helpers.hpp"

using namespace prefgp;
using prefgp::testing::quick_schedule;

namespace {

PreferenceDataset crowd_sim(int users, int pairs, uint64_t seed,
                            int c_true = 2) {
  SimulationConfig cfg;
  cfg.grid_side = 6;
  cfg.users = users;
  cfg.C_true = c_true;
  cfg.s_v = std::vector<double>(static_cast<size_t>(c_true), 1.0);
  cfg.pairs = pairs;
  cfg.seed = seed;
  return simulate_crowd(cfg);
}

struct CrowdSetup {
  PreferenceDataset ds;
  KernelConfig item_kernel;
  KernelConfig user_kernel;
  InducingSet item_inducing;
  InducingSet user_inducing;
  CrowdHyperparams hyper;
};

CrowdSetup small_crowd(int users, int pairs, uint64_t seed, int C = 3) {
  CrowdSetup s;
  s.ds = crowd_sim(users, pairs, seed);
  s.item_kernel = KernelConfig::matern32(median_heuristic(s.ds.items));
  s.user_kernel = KernelConfig::matern32(median_heuristic(s.ds.users));
  s.item_inducing = select_inducing(s.ds.items, 10, seed);
  s.user_inducing = select_inducing(s.ds.users, std::min(users, 8), seed);
  s.hyper.C = C;
  return s;
}

std::vector<int> all_pairs(const PreferenceDataset& ds) {
  std::vector<int> batch(ds.pairs.size());
  std::iota(batch.begin(), batch.end(), 0);
  return batch;
}

}  // namespace

TEST_CASE("crowd utility matches brute force") {
  Eigen::MatrixXd v(3, 2), w(2, 2);
  v << 1, 2, 3, 4, 5, 6;
  w << 0.5, -1, 2, 0.25;
  Eigen::VectorXd t(3);
  t << 10, 20, 30;
  // f(a=1, j=0) = t[1] + v(1,0) w(0,0) + v(1,1) w(0,1) = 20 + 1.5 - 4.
  CHECK(crowd_utility(v, w, t, 1, 0) == doctest::Approx(17.5));
  CHECK(crowd_utility(v, w, t, 2, 1) ==
        doctest::Approx(30.0 + 5.0 * 2.0 + 6.0 * 0.25));
  CHECK_THROWS_AS(crowd_utility(v, w, t, 3, 0), InvalidInputError);
  CHECK_THROWS_AS(crowd_utility(v, w, t, 0, 2), InvalidInputError);
}

TEST_CASE("hyperparameter validation and split resolution") {
  CrowdHyperparams h;
  h.C = 4;
  CHECK(h.resolved_split(true) == 4);
  CHECK(h.resolved_split(false) == 0);
  h.user_kernel_split = 2;
  CHECK(h.resolved_split(false) == 2);
  CHECK_THROWS_AS(h.validate(false), InvalidConfigError);  // needs features
  CHECK_NOTHROW(h.validate(true));
  h.user_kernel_split = 5;
  CHECK_THROWS_AS(h.validate(true), InvalidConfigError);  // split > C
  h = CrowdHyperparams{};
  h.beta0_w = 0.0;
  CHECK_THROWS_AS(h.validate(true), InvalidConfigError);
}

TEST_CASE("init places every factor at its prior") {
  const CrowdSetup s = small_crowd(5, 100, 1);
  CrowdHyperparams hyper = s.hyper;
  hyper.user_kernel_split = 1;  // mix kernel and identity components
  const CrowdState st = crowd_init(s.ds, s.item_kernel, s.user_kernel,
                                   s.item_inducing, s.user_inducing, hyper, 1);
  CHECK(st.consensus.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.num_components() == 3);
  for (const CrowdFactor& v : st.item_components) {
    CHECK(v.mean.cwiseAbs().maxCoeff() < 1e-3);  // seeded jitter ~ 1e-4
    CHECK(v.mean.cwiseAbs().maxCoeff() > 0.0);
    CHECK(v.alpha == v.alpha0);
  }
  // Kernel user component over inducing users; identity ones over raw users.
  CHECK(st.user_components[0].dim() == st.user_inducing.rows());
  CHECK(st.user_components[1].dim() == st.num_users);
  CHECK((st.user_components[1].cov -
         Eigen::MatrixXd::Identity(st.num_users, st.num_users))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(st.gamma == doctest::Approx(st.lambda).epsilon(1e-8));
  // More prior variance than the single-user model (component terms add),
  // so the beta fit is flatter than gamma = lambda = infinity would be.
  CHECK(st.gamma > 0.0);
}

TEST_CASE("compute_H matches the printed definition") {
  std::vector<PairwiseLabel> batch = {
      {3, 0, 1, 1}, {1, 2, 3, 0}, {3, 1, 2, 1}};
  Eigen::VectorXd z(3);
  z << 0.4, -0.2, 1.1;
  const UserLinearization ul = compute_H(batch, z);
  REQUIRE(ul.users == std::vector<int>({1, 3}));
  REQUIRE(ul.H.rows() == 3);
  REQUIRE(ul.H.cols() == 2);
  auto coef = [](double zz, int y) {
    const double p = std_normal_cdf(zz);
    return p * (1.0 - p) * (2.0 * y - 1.0);
  };
  CHECK(ul.H(0, 1) == doctest::Approx(coef(0.4, 1)));
  CHECK(ul.H(0, 0) == 0.0);
  CHECK(ul.H(1, 0) == doctest::Approx(coef(-0.2, 0)));
  CHECK(ul.H(1, 1) == 0.0);
  CHECK(ul.H(2, 1) == doctest::Approx(coef(1.1, 1)));
  // Each row carries exactly one nonzero, matching linearization_coefficient.
  CHECK(ul.H(2, 0) == 0.0);
  CHECK(ul.H(0, 1) == doctest::Approx(linearization_coefficient(0.4, 1)));
}

TEST_CASE("zero weights keep an item component at zero mean") {
  const CrowdSetup s = small_crowd(4, 80, 2);
  CrowdState st = crowd_init(s.ds, s.item_kernel, s.user_kernel,
                             s.item_inducing, s.user_inducing, s.hyper, 2);
  // Force exact zeros (init leaves small seeded jitter on v, zeros on w).
  for (CrowdFactor& w : st.user_components) w.mean.setZero();
  for (CrowdFactor& v : st.item_components) v.mean.setZero();
  const auto batch = all_pairs(s.ds);
  const CrowdWorkspace ws = crowd_workspace(st, s.ds, batch);
  const Eigen::MatrixXd prec_base = st.item_components[0].cov_inv;
  const Eigen::VectorXd mean_base = st.item_components[0].mean;
  crowd_update_item_component(st, 0, ws, 1.0, 1.0, prec_base, mean_base);
  CHECK(st.item_components[0].mean.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("negating a component's item and user parts leaves F unchanged") {
  const CrowdSetup s = small_crowd(5, 200, 3);
  CrowdState st = crowd_fit(s.ds, s.item_kernel, s.user_kernel,
                            s.item_inducing, s.user_inducing, s.hyper,
                            quick_schedule(8, 3));
  std::vector<int> idx(static_cast<size_t>(s.ds.users.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  const CrowdPrediction before =
      crowd_predict(st, s.ds.items, s.ds.users, idx);
  for (int c = 0; c < st.num_components(); ++c) {
    st.item_components[static_cast<size_t>(c)].mean *= -1.0;
    st.user_components[static_cast<size_t>(c)].mean *= -1.0;
  }
  const CrowdPrediction after = crowd_predict(st, s.ds.items, s.ds.users, idx);
  CHECK((before.F - after.F).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("with C = 0 and one user the crowd model reduces to gppl") {
  const PreferenceDataset ds = prefgp::testing::single_user_sim(5, 150, 4);
  const KernelConfig k = KernelConfig::matern32(median_heuristic(ds.items));
  const InducingSet ind = select_inducing(ds.items, 8, 4);
  SviSchedule sched = quick_schedule(10, 4);

  const GpplState g = gppl_fit(ds, k, ind, 1.0, 100.0, sched);
  CrowdHyperparams hyper;
  hyper.C = 0;
  hyper.alpha0_t = 1.0;
  hyper.beta0_t = 100.0;
  const CrowdState c = crowd_fit(ds, k, KernelConfig::identity(), ind,
                                 InducingSet{}, hyper, sched);
  CHECK((c.consensus.mean - g.f_hat_m).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((c.consensus.cov - g.S).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(c.consensus.alpha == doctest::Approx(g.alpha).epsilon(1e-12));
  CHECK(c.consensus.beta == doctest::Approx(g.beta).epsilon(1e-6));
}

TEST_CASE("users with identical labels get near-identical predictions") {
  // One underlying utility function, two users who answered the same pairs
  // the same way; no user features, so identity components only.
  const PreferenceDataset base = prefgp::testing::single_user_sim(6, 150, 5);
  PreferenceDataset ds;
  ds.items = base.items;
  for (const PairwiseLabel& p : base.pairs) {
    ds.pairs.push_back({0, p.item_a, p.item_b, p.y});
    ds.pairs.push_back({1, p.item_a, p.item_b, p.y});
  }
  const KernelConfig k = KernelConfig::matern32(median_heuristic(ds.items));
  const InducingSet ind = select_inducing(ds.items, 12, 5);
  CrowdHyperparams hyper;
  hyper.C = 3;
  const CrowdState st =
      crowd_fit(ds, k, KernelConfig::identity(), ind, InducingSet{}, hyper,
                quick_schedule(20, 5));
  const CrowdPrediction pred =
      crowd_predict(st, ds.items, Eigen::MatrixXd(), {0, 1});
  CHECK(pearson_correlation(pred.F.col(0), pred.F.col(1)) > 0.99);
}

TEST_CASE("every gamma factor keeps alpha = alpha0 + dim/2 after fitting") {
  const CrowdSetup s = small_crowd(5, 150, 6);
  const CrowdState st = crowd_fit(s.ds, s.item_kernel, s.user_kernel,
                                  s.item_inducing, s.user_inducing, s.hyper,
                                  quick_schedule(6, 6));
  CHECK(st.consensus.alpha ==
        st.consensus.alpha0 + 0.5 * static_cast<double>(st.consensus.dim()));
  for (const CrowdFactor& f : st.item_components) {
    CHECK(f.alpha == f.alpha0 + 0.5 * static_cast<double>(f.dim()));
  }
  for (const CrowdFactor& f : st.user_components) {
    CHECK(f.alpha == f.alpha0 + 0.5 * static_cast<double>(f.dim()));
  }
}

TEST_CASE("pair predictions are symmetric") {
  const CrowdSetup s = small_crowd(4, 150, 7);
  const CrowdState st = crowd_fit(s.ds, s.item_kernel, s.user_kernel,
                                  s.item_inducing, s.user_inducing, s.hyper,
                                  quick_schedule(8, 7));
  std::vector<int> idx(static_cast<size_t>(s.ds.users.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  const std::vector<PairwiseLabel> fwd = {{1, 3, 9, 1}, {2, 0, 5, 1}};
  const std::vector<PairwiseLabel> rev = {{1, 9, 3, 1}, {2, 5, 0, 1}};
  const Eigen::VectorXd pf =
      crowd_predict_pairs(st, s.ds.items, s.ds.users, idx, fwd);
  const Eigen::VectorXd pr =
      crowd_predict_pairs(st, s.ds.items, s.ds.users, idx, rev);
  CHECK(std::abs(pf[0] + pr[0] - 1.0) < 1e-12);
  CHECK(std::abs(pf[1] + pr[1] - 1.0) < 1e-12);
}

TEST_CASE("an unseen user falls back to the consensus") {
  const PreferenceDataset base = prefgp::testing::single_user_sim(5, 120, 8);
  PreferenceDataset ds;
  ds.items = base.items;
  for (const PairwiseLabel& p : base.pairs) ds.pairs.push_back(p);
  ds.pairs.push_back({1, 0, 1, 1});  // a second user so U = 2
  const KernelConfig k = KernelConfig::matern32(median_heuristic(ds.items));
  const InducingSet ind = select_inducing(ds.items, 8, 8);
  CrowdHyperparams hyper;
  hyper.C = 2;
  const CrowdState st =
      crowd_fit(ds, k, KernelConfig::identity(), ind, InducingSet{}, hyper,
                quick_schedule(10, 8));
  const CrowdPrediction pred =
      crowd_predict(st, ds.items, Eigen::MatrixXd(), {-1});
  CHECK((pred.F.col(0) - pred.t_mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("persistent state size does not grow with the dataset") {
  const CrowdSetup a = small_crowd(5, 100, 9);
  CrowdSetup b = small_crowd(5, 100, 9);
  b.ds = crowd_sim(5, 400, 10);  // more pairs, same grid
  b.item_kernel = a.item_kernel;
  b.user_kernel = a.user_kernel;
  const CrowdState sa = crowd_fit(a.ds, a.item_kernel, a.user_kernel,
                                  a.item_inducing, a.user_inducing, a.hyper,
                                  quick_schedule(3, 9));
  const CrowdState sb = crowd_fit(b.ds, a.item_kernel, a.user_kernel,
                                  a.item_inducing, a.user_inducing, a.hyper,
                                  quick_schedule(3, 9));
  CHECK(sa.persistent_bytes() == sb.persistent_bytes());
  CHECK(sa.A.size() == 0);  // training caches are freed
  CHECK(sa.A_w.size() == 0);
}
