#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace prefgp {

// Inducing inputs chosen by k-means++ seeding followed by Lloyd refinement.
struct InducingSet {
  Eigen::MatrixXd points;  // M x D cluster centres

  Eigen::Index size() const { return points.rows(); }
};

// M is clamped to the number of rows of X; when M >= N the rows of X are
// returned unchanged. Deterministic given the seed.
InducingSet select_inducing(const Eigen::MatrixXd& X, int M, uint64_t seed);

}  // namespace prefgp
