#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "prefgp/inducing.hpp"

using namespace prefgp;

namespace {

Eigen::MatrixXd two_blobs(int per_blob, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.1);
  Eigen::MatrixXd x(2 * per_blob, 2);
  for (int i = 0; i < per_blob; ++i) {
    x(i, 0) = gauss(rng);
    x(i, 1) = gauss(rng);
    x(per_blob + i, 0) = 10.0 + gauss(rng);
    x(per_blob + i, 1) = 10.0 + gauss(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("M >= N returns the data unchanged") {
  const Eigen::MatrixXd x = two_blobs(3, 1);
  const InducingSet s = select_inducing(x, 10, 0);
  CHECK(s.size() == x.rows());
  CHECK((s.points - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("selection is deterministic given the seed") {
  const Eigen::MatrixXd x = two_blobs(30, 2);
  const InducingSet a = select_inducing(x, 7, 99);
  const InducingSet b = select_inducing(x, 7, 99);
  CHECK((a.points - b.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.points.rows() == 7);
  CHECK(a.points.cols() == 2);
}

TEST_CASE("centres stay within the data's bounding box") {
  const Eigen::MatrixXd x = two_blobs(40, 3);
  const InducingSet s = select_inducing(x, 9, 5);
  for (int d = 0; d < 2; ++d) {
    CHECK(s.points.col(d).minCoeff() >= x.col(d).minCoeff() - 1e-12);
    CHECK(s.points.col(d).maxCoeff() <= x.col(d).maxCoeff() + 1e-12);
  }
}

TEST_CASE("two separated blobs yield one centre per blob") {
  const Eigen::MatrixXd x = two_blobs(50, 8);
  const InducingSet s = select_inducing(x, 2, 3);
  REQUIRE(s.points.rows() == 2);
  double lo = std::min(s.points(0, 0), s.points(1, 0));
  double hi = std::max(s.points(0, 0), s.points(1, 0));
  CHECK(std::abs(lo - 0.0) < 1.0);
  CHECK(std::abs(hi - 10.0) < 1.0);
}
