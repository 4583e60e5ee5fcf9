#pragma once

#include <cstdint>

#include "prefgp/data.hpp"
#include "prefgp/gppl.hpp"
#include "prefgp/inducing.hpp"
#include "prefgp/kernels.hpp"
#include "prefgp/svi.hpp"

namespace prefgp::testing {

// Small single-user dataset drawn from the generative model.
inline PreferenceDataset single_user_sim(int grid_side, int pairs,
                                         uint64_t seed) {
  SimulationConfig cfg;
  cfg.grid_side = grid_side;
  cfg.users = 1;
  cfg.C_true = 1;
  cfg.s_v = {1e6};  // negligible personal component
  cfg.s_t = 0.25;   // strong consensus signal
  cfg.pairs = pairs;
  cfg.seed = seed;
  return simulate_crowd(cfg);
}

inline SviSchedule quick_schedule(int iterations, uint64_t seed) {
  SviSchedule s;
  s.batch_size = 200;
  s.max_iterations = iterations;
  s.convergence_tol = 0.0;
  s.seed = seed;
  s.elbo_every = 5;
  return s;
}

}  // namespace prefgp::testing
