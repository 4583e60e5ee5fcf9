#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "prefgp/kernels.hpp"

using namespace prefgp;

namespace {

Eigen::MatrixXd random_points(int n, int d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
  return x;
}

}  // namespace

TEST_CASE("matern32 matches hand-computed values") {
  KernelConfig k = KernelConfig::matern32(Eigen::VectorXd::Ones(1));
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_value(a, a, k) == doctest::Approx(1.0).epsilon(1e-14));
  // (1 + sqrt(3) r) exp(-sqrt(3) r) at r = 1 and r = 2.
  CHECK(kernel_value(a, b, k) ==
        doctest::Approx(0.4833577245965077).epsilon(1e-12));
  b << 2.0;
  CHECK(kernel_value(a, b, k) ==
        doctest::Approx(0.13973135019231467).epsilon(1e-12));
}

TEST_CASE("squared exponential matches hand-computed value") {
  KernelConfig k = KernelConfig::squared_exponential(Eigen::VectorXd::Ones(1));
  Eigen::VectorXd a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(kernel_value(a, b, k) ==
        doctest::Approx(0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("length scales act per dimension") {
  Eigen::VectorXd scales(2);
  scales << 2.0, 0.5;
  KernelConfig k = KernelConfig::matern32(scales);
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 2.0, 0.5;  // both dimensions contribute r = 1 each
  KernelConfig iso = KernelConfig::matern32(Eigen::VectorXd::Ones(2));
  Eigen::VectorXd bi(2);
  bi << 1.0, 1.0;
  CHECK(kernel_value(a, b, k) ==
        doctest::Approx(kernel_value(a, bi, iso)).epsilon(1e-14));
}

TEST_CASE("identity kernel compares rows exactly") {
  KernelConfig k = KernelConfig::identity();
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 2.0;
  b << 1.0, 2.0 + 1e-12;
  CHECK(kernel_value(a, a, k) == 1.0);
  CHECK(kernel_value(a, b, k) == 0.0);
}

TEST_CASE("covariance matrix is symmetric and PSD with jitter") {
  const Eigen::MatrixXd x = random_points(40, 3, 11);
  KernelConfig k = KernelConfig::matern32(median_heuristic(x));
  const Eigen::MatrixXd K = covariance_matrix(x, x, k);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const CholeskyFactor f = cholesky_with_jitter(K, 1e-8);
  CHECK(f.llt.info() == Eigen::Success);
  // All entries in (0, 1].
  CHECK(K.maxCoeff() <= 1.0);
  CHECK(K.minCoeff() > 0.0);
}

TEST_CASE("cross covariance against direct kernel evaluation") {
  const Eigen::MatrixXd x1 = random_points(5, 2, 1);
  const Eigen::MatrixXd x2 = random_points(7, 2, 2);
  KernelConfig k = KernelConfig::squared_exponential(Eigen::VectorXd::Ones(2));
  const Eigen::MatrixXd K = covariance_matrix(x1, x2, k);
  REQUIRE(K.rows() == 5);
  REQUIRE(K.cols() == 7);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 7; ++j) {
      CHECK(K(i, j) == doctest::Approx(kernel_value(
                           x1.row(i).transpose(), x2.row(j).transpose(), k))
                           .epsilon(1e-14));
    }
  }
}

TEST_CASE("median heuristic on a hand-checkable set") {
  // Values 0, 1, 3: absolute differences over ordered pairs incl. self-pairs:
  // {0,0,0, 1,1, 2,2, 3,3} -> median 1.
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 1.0, 3.0;
  const Eigen::VectorXd l = median_heuristic(x);
  CHECK(l[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("median heuristic falls back on constant columns") {
  Eigen::MatrixXd x(4, 2);
  x << 1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0;
  const Eigen::VectorXd l = median_heuristic(x);
  CHECK(l[0] == doctest::Approx(1.0));  // constant column -> 1
  CHECK(l[1] > 0.0);
}

TEST_CASE("scaled median heuristic multiplies by 20 sqrt(D)") {
  const Eigen::MatrixXd x = random_points(15, 4, 5);
  const Eigen::VectorXd base = median_heuristic(x);
  const Eigen::VectorXd scaled = scaled_median_heuristic(x);
  CHECK((scaled - 20.0 * std::sqrt(4.0) * base).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("cholesky_with_jitter escalates and eventually fails") {
  Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(3, 3);
  CHECK(cholesky_with_jitter(ok, 1e-10).llt.info() == Eigen::Success);
  Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(cholesky_with_jitter(bad, 1e-10), NumericalError);
}

TEST_CASE("kernel config validation") {
  KernelConfig k = KernelConfig::matern32(Eigen::VectorXd::Ones(2));
  CHECK_NOTHROW(k.validate());
  k.length_scales[1] = 0.0;
  CHECK_THROWS_AS(k.validate(), InvalidConfigError);
}

TEST_CASE("kernel family names round trip") {
  CHECK(kernel_family_from_name("matern32") == KernelFamily::Matern32);
  CHECK(kernel_family_from_name("squared_exponential") ==
        KernelFamily::SquaredExponential);
  CHECK(kernel_family_from_name("identity") == KernelFamily::Identity);
  CHECK_THROWS_AS(kernel_family_from_name("nope"), InvalidConfigError);
}
