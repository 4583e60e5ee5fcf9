#include "prefgp/eval.hpp"

#include <cmath>
#include <vector>

#include "prefgp/likelihood.hpp"

namespace prefgp {

namespace {

void check_lengths(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw InvalidInputError(std::string(what) + ": length mismatch");
  if (a == 0) throw InvalidInputError(std::string(what) + ": empty input");
}

}  // namespace

double accuracy(const Eigen::VectorXd& predicted_probs,
                const Eigen::VectorXi& labels) {
  check_lengths(predicted_probs.size(), labels.size(), "accuracy");
  double correct = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = predicted_probs[i];
    if (p == 0.5) {
      correct += 0.5;
    } else {
      correct += ((p > 0.5) == (labels[i] == 1)) ? 1.0 : 0.0;
    }
  }
  return correct / static_cast<double>(labels.size());
}

double cross_entropy(const Eigen::VectorXd& predicted_probs,
                     const Eigen::VectorXi& labels) {
  check_lengths(predicted_probs.size(), labels.size(), "cross_entropy");
  double total = 0.0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double p = clamp_prob(predicted_probs[i]);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(labels.size());
}

double kendall_tau(const Eigen::VectorXd& predicted_scores,
                   const Eigen::VectorXd& gold_scores) {
  check_lengths(predicted_scores.size(), gold_scores.size(), "kendall_tau");
  const Eigen::Index n = predicted_scores.size();
  if (n < 2) throw InvalidInputError("kendall_tau: need at least 2 items");
  if ((gold_scores.array() == gold_scores[0]).all()) {
    throw InvalidInputError("kendall_tau: gold scores are constant");
  }
  long long concordant = 0, discordant = 0, ties_pred = 0, ties_gold = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dp = predicted_scores[i] - predicted_scores[j];
      const double dg = gold_scores[i] - gold_scores[j];
      if (dp == 0.0 && dg == 0.0) continue;
      if (dp == 0.0) {
        ++ties_pred;
      } else if (dg == 0.0) {
        ++ties_gold;
      } else if ((dp > 0.0) == (dg > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(n) * (n - 1) / 2.0;
  const double denom = std::sqrt((n0 - static_cast<double>(ties_pred)) *
                                 (n0 - static_cast<double>(ties_gold)));
  if (denom == 0.0) {
    throw InvalidInputError("kendall_tau: degenerate (all pairs tied)");
  }
  return static_cast<double>(concordant - discordant) / denom;
}

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_lengths(a.size(), b.size(), "pearson_correlation");
  const double ma = a.mean();
  const double mb = b.mean();
  const Eigen::VectorXd da = a.array() - ma;
  const Eigen::VectorXd db = b.array() - mb;
  const double va = da.squaredNorm();
  const double vb = db.squaredNorm();
  if (va == 0.0 || vb == 0.0) return 0.0;  // zero-variance treated as 0
  return da.dot(db) / std::sqrt(va * vb);
}

double match_components(const Eigen::MatrixXd& true_components,
                        const Eigen::MatrixXd& inferred_components) {
  if (true_components.rows() != inferred_components.rows()) {
    throw InvalidInputError("match_components: row count mismatch");
  }
  if (inferred_components.cols() < true_components.cols()) {
    throw InvalidInputError(
        "match_components: need at least as many inferred components as true");
  }
  const Eigen::Index ct = true_components.cols();
  const Eigen::Index ci = inferred_components.cols();
  Eigen::MatrixXd corr(ct, ci);
  for (Eigen::Index i = 0; i < ct; ++i) {
    for (Eigen::Index j = 0; j < ci; ++j) {
      corr(i, j) = pearson_correlation(true_components.col(i),
                                       inferred_components.col(j));
    }
  }
  std::vector<bool> used_true(ct, false), used_inf(ci, false);
  double total = 0.0;
  for (Eigen::Index match = 0; match < ct; ++match) {
    double best = -2.0;
    Eigen::Index bi = -1, bj = -1;
    for (Eigen::Index i = 0; i < ct; ++i) {
      if (used_true[i]) continue;
      for (Eigen::Index j = 0; j < ci; ++j) {
        if (used_inf[j]) continue;
        if (corr(i, j) > best) {
          best = corr(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_true[bi] = true;
    used_inf[bj] = true;
    total += best;
  }
  return total / static_cast<double>(ct);
}

Eigen::VectorXd per_user_consensus(
    const Eigen::MatrixXd& per_user_predictions) {
  if (per_user_predictions.cols() == 0) {
    throw InvalidInputError("per_user_consensus: no user columns");
  }
  return per_user_predictions.rowwise().mean();
}

}  // namespace prefgp
