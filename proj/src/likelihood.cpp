#include "prefgp/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "prefgp/quadrature.hpp"

namespace prefgp {

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double clamp_prob(double p) {
  return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

double pair_probability(double f_hat_a, double f_hat_b, double c_aa,
                        double c_bb, double c_ab) {
  const double denom_arg = 1.0 + c_aa + c_bb - 2.0 * c_ab;
  if (!(denom_arg > 0.0)) {
    throw NumericalError(
        "pair_probability: non-positive variance term; posterior covariance "
        "invalid");
  }
  const double z_hat = (f_hat_a - f_hat_b) / std::sqrt(denom_arg);
  return std_normal_cdf(z_hat);
}

BetaMoments estimate_beta_prior(double prior_mean_z, double prior_var_z,
                                int quadrature_nodes) {
  if (!(prior_var_z > 0.0)) {
    throw InvalidInputError("estimate_beta_prior: prior_var_z must be > 0");
  }
  const GaussHermite gh(quadrature_nodes);
  const auto phi = [](double z) { return std_normal_cdf(z); };
  const auto phi2 = [](double z) {
    const double p = std_normal_cdf(z);
    return p * p;
  };
  double m = gh.expect(phi, prior_mean_z, prior_var_z);
  m = clamp_prob(m);
  double v = gh.expect(phi2, prior_mean_z, prior_var_z) - m * m;
  const double feasible = m * (1.0 - m);
  if (!(v > 0.0) || v >= feasible) {
    v = 0.99 * feasible;
  }
  const double common = feasible / v - 1.0;
  const auto cap = [](double x) { return std::clamp(x, 1e-6, 1e6); };
  return {cap(m * common), cap((1.0 - m) * common)};
}

double observation_noise(double gamma, double lambda, int y) {
  if (!(gamma > 0.0) || !(lambda > 0.0)) {
    throw InvalidInputError("observation_noise: gamma, lambda must be > 0");
  }
  const double denom = gamma + lambda + 1.0;
  return (gamma + y) * (lambda + 1.0 - y) / (denom * denom);
}

double linearization_coefficient(double z_hat, int y) {
  const double p = clamp_prob(std_normal_cdf(z_hat));
  return p * (1.0 - p) * (2.0 * y - 1.0);
}

Eigen::VectorXd linearization_row(double z_hat_p, int y_p, int a_p, int b_p,
                                  std::span<const int> batch_items) {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(batch_items.size()));
  const double coeff = linearization_coefficient(z_hat_p, y_p);
  bool found_a = false;
  bool found_b = false;
  for (size_t i = 0; i < batch_items.size(); ++i) {
    if (batch_items[i] == a_p) {
      row[static_cast<Eigen::Index>(i)] += coeff;
      found_a = true;
    }
    if (batch_items[i] == b_p) {
      row[static_cast<Eigen::Index>(i)] -= coeff;
      found_b = true;
    }
  }
  if (!found_a || !found_b) {
    throw InternalError("linearization_row: pair items missing from batch");
  }
  return row;
}

}  // namespace prefgp
