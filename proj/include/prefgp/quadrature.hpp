#pragma once

#include <Eigen/Dense>
#include <functional>

namespace prefgp {

// Gauss-Hermite rule (physicists' weight exp(-x^2)), nodes/weights computed
// by the Golub-Welsch eigen decomposition of the Jacobi matrix.
class GaussHermite {
 public:
  explicit GaussHermite(int n);

  const Eigen::VectorXd& nodes() const { return nodes_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  // E[g(z)] for z ~ Normal(mean, var).
  double expect(const std::function<double(double)>& g, double mean,
                double var) const;

 private:
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
};

// psi(x) = d/dx ln Gamma(x), for x > 0.
double digamma(double x);

}  // namespace prefgp
