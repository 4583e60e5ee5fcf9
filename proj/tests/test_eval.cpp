#include <doctest.h>

#include <cmath>
#include <random>

#include "prefgp/eval.hpp"

using namespace prefgp;

TEST_CASE("accuracy counts correct sides with half credit for ties") {
  Eigen::VectorXd p(4);
  p << 0.9, 0.2, 0.5, 0.6;
  Eigen::VectorXi y(4);
  y << 1, 0, 1, 0;
  // correct, correct, tie (0.5 credit), wrong -> 2.5 / 4.
  CHECK(accuracy(p, y) == doctest::Approx(0.625));
}

TEST_CASE("cross entropy matches a hand-computed value") {
  Eigen::VectorXd p(2);
  p << 0.8, 0.3;
  Eigen::VectorXi y(2);
  y << 1, 0;
  const double want = -(std::log(0.8) + std::log(0.7)) / 2.0;
  CHECK(cross_entropy(p, y) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("cross entropy survives hard 0/1 probabilities via clamping") {
  Eigen::VectorXd p(2);
  p << 0.0, 1.0;
  Eigen::VectorXi y(2);
  y << 1, 0;
  CHECK(std::isfinite(cross_entropy(p, y)));
}

TEST_CASE("kendall tau-b endpoints and tie correction") {
  Eigen::VectorXd a(5), rev(5);
  a << 1, 2, 3, 4, 5;
  rev << 5, 4, 3, 2, 1;
  CHECK(kendall_tau(a, a) == doctest::Approx(1.0));
  CHECK(kendall_tau(rev, a) == doctest::Approx(-1.0));
  // Tie-corrected reference value from an independent implementation.
  Eigen::VectorXd pred(5), gold(5);
  pred << 1, 2, 2, 3, 4;
  gold << 1, 3, 2, 2, 4;
  CHECK(kendall_tau(pred, gold) ==
        doctest::Approx(0.6666666666666666).epsilon(1e-12));
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(5, 2.0);
  CHECK_THROWS_AS(kendall_tau(pred, flat), InvalidInputError);
}

TEST_CASE("pearson correlation against a reference value") {
  Eigen::VectorXd a(4), b(4);
  a << 1, 2, 3, 4;
  b << 2, 1, 4, 3;
  CHECK(pearson_correlation(a, b) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(pearson_correlation(a, a) == doctest::Approx(1.0));
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(4, 1.0);
  CHECK(pearson_correlation(a, flat) == 0.0);
}

TEST_CASE("component matching recovers permuted, scaled components") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd truth(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int c = 0; c < 3; ++c) truth(i, c) = gauss(rng);
  Eigen::MatrixXd inferred(30, 5);
  inferred.col(0) = truth.col(2);
  inferred.col(1) = truth.col(0);
  inferred.col(2) = truth.col(1) * 2.5;  // positive scale must not hurt
  for (int i = 0; i < 30; ++i) {
    inferred(i, 3) = gauss(rng);
    inferred(i, 4) = gauss(rng);
  }
  CHECK(match_components(truth, inferred) == doctest::Approx(1.0).epsilon(1e-9));

  // The matching is deliberately signed: a sign-flipped copy correlates at
  // -1 with its source, so the greedy pass pairs that truth column with
  // whatever noise column correlates best instead, and the mean drops.
  Eigen::MatrixXd flipped = inferred;
  flipped.col(0) = -truth.col(2);
  const double with_flip = match_components(truth, flipped);
  CHECK(with_flip < 0.9);
  CHECK(with_flip > 0.3);  // the two intact columns still match at 1.0
}

TEST_CASE("component matching of pure noise stays small") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd truth(200, 3), inferred(200, 3);
  for (int i = 0; i < 200; ++i) {
    for (int c = 0; c < 3; ++c) {
      truth(i, c) = gauss(rng);
      inferred(i, c) = gauss(rng);
    }
  }
  CHECK(match_components(truth, inferred) < 0.4);
}

TEST_CASE("per-user consensus is the mean across columns") {
  Eigen::MatrixXd f(2, 3);
  f << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd c = per_user_consensus(f);
  CHECK(c[0] == doctest::Approx(2.0));
  CHECK(c[1] == doctest::Approx(5.0));
}
