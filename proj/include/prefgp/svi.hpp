#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "prefgp/errors.hpp"

namespace prefgp {

// Mini-batch schedule for stochastic variational inference.
// rho_i = (i + delay)^(-forgetting_rate) unless fixed_rho > 0;
// pi_i = P / |batch|.
struct SviSchedule {
  int batch_size = 1000;
  double delay = 1.0;            // epsilon
  double forgetting_rate = 0.9;  // r, in (0.5, 1]
  int max_iterations = 200;
  double convergence_tol = 1e-4;  // relative ELBO change, twice in a row
  int inner_max = 20;             // cap on the G refinement loop
  double inner_tol = 1e-3;        // max-abs change in Phi(z_hat)
  uint64_t seed = 0;
  double fixed_rho = 0.0;  // > 0 forces a constant step (tests, full batch VB)
  bool track_elbo = true;  // evaluate the bound every elbo_every iterations
  int elbo_every = 5;
  // Cholesky-check every posterior covariance after each outer iteration and
  // raise NumericalError on the first failure (used by the safety suite).
  bool check_psd = false;

  void validate() const {
    if (batch_size < 1) throw InvalidConfigError("svi: batch_size must be >= 1");
    if (delay < 0.0) throw InvalidConfigError("svi: delay must be >= 0");
    if (!(forgetting_rate > 0.5) || forgetting_rate > 1.0) {
      throw InvalidConfigError("svi: forgetting_rate must be in (0.5, 1]");
    }
    if (max_iterations < 1) {
      throw InvalidConfigError("svi: max_iterations must be >= 1");
    }
  }

  double rho(int iteration) const;
};

// Samples without replacement within an epoch, reshuffling each epoch.
class BatchSampler {
 public:
  BatchSampler(int population, int batch_size, uint64_t seed);

  std::vector<int> next();

 private:
  void reshuffle();

  std::vector<int> order_;
  size_t cursor_ = 0;
  int batch_size_;
  std::mt19937_64 rng_;
};

}  // namespace prefgp
