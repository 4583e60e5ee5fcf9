#include "prefgp/inducing.hpp"

#include <limits>
#include <random>
#include <vector>

#include "prefgp/errors.hpp"

namespace prefgp {

namespace {

double sq_dist(const Eigen::MatrixXd& X, Eigen::Index i,
               const Eigen::MatrixXd& C, Eigen::Index c) {
  return (X.row(i) - C.row(c)).squaredNorm();
}

}  // namespace

InducingSet select_inducing(const Eigen::MatrixXd& X, int M, uint64_t seed) {
  const Eigen::Index n = X.rows();
  if (n == 0) throw InvalidInputError("select_inducing: X is empty");
  if (M < 1) throw InvalidInputError("select_inducing: M must be >= 1");
  if (M >= n) return {X};

  std::mt19937_64 rng(seed);
  const auto uniform_index = [&rng](Eigen::Index bound) {
    return static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(bound));
  };

  // k-means++ seeding.
  Eigen::MatrixXd centres(M, X.cols());
  centres.row(0) = X.row(uniform_index(n));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = sq_dist(X, i, centres, 0);
  for (int c = 1; c < M; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_index(n);
    }
    centres.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(X, i, centres, c));
    }
  }

  // Lloyd refinement until centre movement < 1e-6 or 100 iterations.
  std::vector<Eigen::Index> assignment(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index best_c = 0;
      for (Eigen::Index c = 0; c < M; ++c) {
        const double d = sq_dist(X, i, centres, c);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assignment[i] = best_c;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(M, X.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(M);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assignment[i]) += X.row(i);
      counts[assignment[i]] += 1.0;
    }
    double max_move = 0.0;
    for (Eigen::Index c = 0; c < M; ++c) {
      Eigen::RowVectorXd next;
      if (counts[c] > 0.0) {
        next = sums.row(c) / counts[c];
      } else {
        // Reseed empty clusters at the farthest point from its centre.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = sq_dist(X, i, centres, assignment[i]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next = X.row(far);
      }
      max_move = std::max(max_move, (next - centres.row(c)).norm());
      centres.row(c) = next;
    }
    if (max_move < 1e-6) break;
  }
  return {centres};
}

}  // namespace prefgp
