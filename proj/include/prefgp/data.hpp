#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "prefgp/likelihood.hpp"

namespace prefgp {

// Items, users and pairwise labels; gold utilities are present only for
// simulated data.
struct PreferenceDataset {
  Eigen::MatrixXd items;  // N x D
  Eigen::MatrixXd users;  // U x Du; 0x0 when user features are absent
  std::vector<PairwiseLabel> pairs;
  Eigen::MatrixXd gold_f;  // N x U, empty unless simulated
  Eigen::VectorXd gold_t;  // N, empty unless simulated
  Eigen::MatrixXd gold_v;  // N x C_true item components, empty unless simulated

  int num_items() const { return static_cast<int>(items.rows()); }
  int num_users() const;
  bool has_gold() const { return gold_f.size() > 0; }

  void validate() const;
};

// Generative setup for the synthetic crowd: a grid of 2-D item features,
// GP draws for the consensus and C_true latent components, probit labels.
struct SimulationConfig {
  int grid_side = 20;
  int item_subsample = 0;  // 0 keeps all grid points
  int users = 25;
  int C_true = 5;
  double s_t = 1.0;               // consensus inverse scale
  std::vector<double> s_v;        // per-component; empty -> draw uniformly
  double s_v_min = 0.0;           // used when s_v is empty
  double s_v_max = 0.0;
  double s_w = 1.0;
  int pairs = 900;
  uint64_t seed = 0;

  void validate() const;
};

PreferenceDataset simulate_crowd(const SimulationConfig& cfg);

// CSV ingestion. Headers are `name` or `name:numeric` / `name:categorical`;
// categorical columns are one-hot encoded in declaration order of their
// levels (sorted). The first column of items/users files is the id.
// pairs.csv columns: user_id,item_a,item_b,label.
PreferenceDataset load_csv(const std::string& items_path,
                           const std::string& users_path,
                           const std::string& pairs_path);

// Writes items.csv, pairs.csv and, when present, users.csv, gold_f.csv,
// gold_t.csv into `dir`.
void save_csv(const PreferenceDataset& ds, const std::string& dir);

struct SplitResult {
  PreferenceDataset train;
  PreferenceDataset test;
};

SplitResult split_dataset(const PreferenceDataset& ds, double train_fraction,
                          uint64_t seed);

// Per-user stratified split with exact counts; errors list infeasible users.
SplitResult split_dataset_per_user(const PreferenceDataset& ds,
                                   int train_per_user, int test_per_user,
                                   uint64_t seed);

}  // namespace prefgp
