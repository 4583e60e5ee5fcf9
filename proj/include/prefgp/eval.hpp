#pragma once

#include <Eigen/Dense>

#include "prefgp/errors.hpp"

namespace prefgp {

// Fraction of correct pairwise labels; p == 0.5 is scored as half credit.
double accuracy(const Eigen::VectorXd& predicted_probs,
                const Eigen::VectorXi& labels);

// Mean binary cross entropy; probabilities are clamped before the logs.
double cross_entropy(const Eigen::VectorXd& predicted_probs,
                     const Eigen::VectorXi& labels);

// Kendall's tau-b (tie corrected). A constant gold vector is an error.
double kendall_tau(const Eigen::VectorXd& predicted_scores,
                   const Eigen::VectorXd& gold_scores);

// Greedy matching on signed Pearson correlation: repeatedly match the
// remaining (true, inferred) pair with the highest correlation; returns the
// mean correlation over matches. Columns are components.
double match_components(const Eigen::MatrixXd& true_components,
                        const Eigen::MatrixXd& inferred_components);

// Mean across user columns.
Eigen::VectorXd per_user_consensus(const Eigen::MatrixXd& per_user_predictions);

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace prefgp
