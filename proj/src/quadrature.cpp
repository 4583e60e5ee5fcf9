#include "prefgp/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "prefgp/errors.hpp"

namespace prefgp {

GaussHermite::GaussHermite(int n) {
  if (n < 1) throw InvalidInputError("GaussHermite: need at least 1 node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes_ = es.eigenvalues();
  weights_.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    weights_[k] = sqrt_pi * v0 * v0;
  }
}

double GaussHermite::expect(const std::function<double(double)>& g,
                            double mean, double var) const {
  const double sd = std::sqrt(var > 0.0 ? var : 0.0);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < nodes_.size(); ++k) {
    acc += weights_[k] * g(mean + M_SQRT2 * sd * nodes_[k]);
  }
  return acc * inv_sqrt_pi;
}

double digamma(double x) {
  if (!(x > 0.0)) throw InvalidInputError("digamma: argument must be > 0");
  double result = 0.0;
  // Shift into the range where the asymptotic series converges quickly.
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

}  // namespace prefgp
