#include "prefgp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace prefgp {

const char* kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::Matern32:
      return "matern32";
    case KernelFamily::SquaredExponential:
      return "sqexp";
    case KernelFamily::Identity:
      return "identity";
  }
  return "unknown";
}

KernelFamily kernel_family_from_name(const std::string& name) {
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "sqexp" || name == "squared_exponential") {
    return KernelFamily::SquaredExponential;
  }
  if (name == "identity") return KernelFamily::Identity;
  throw InvalidConfigError("unknown kernel family: " + name);
}

void KernelConfig::validate() const {
  if (family == KernelFamily::Identity) return;
  if (length_scales.size() < 1) {
    throw InvalidConfigError("kernel requires at least one length-scale");
  }
  for (Eigen::Index d = 0; d < length_scales.size(); ++d) {
    const double l = length_scales[d];
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw InvalidConfigError("length-scale for dimension " +
                               std::to_string(d) +
                               " must be strictly positive and finite");
    }
  }
  if (jitter < 0.0) throw InvalidConfigError("jitter must be non-negative");
}

namespace {

double scaled_distance(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                       const Eigen::VectorXd& scales) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < x1.size(); ++d) {
    const double u = (x1[d] - x2[d]) / scales[d];
    r2 += u * u;
  }
  return std::sqrt(r2);
}

double kernel_from_distance(KernelFamily family, double r) {
  switch (family) {
    case KernelFamily::Matern32: {
      const double a = std::sqrt(3.0) * r;
      return (1.0 + a) * std::exp(-a);
    }
    case KernelFamily::SquaredExponential:
      return std::exp(-0.5 * r * r);
    case KernelFamily::Identity:
      return r == 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

}  // namespace

double kernel_value(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                    const KernelConfig& cfg) {
  if (x1.size() != x2.size()) {
    throw InvalidInputError("kernel_value: vectors have different dimensions");
  }
  if (cfg.family == KernelFamily::Identity) {
    return x1 == x2 ? 1.0 : 0.0;
  }
  cfg.validate();
  if (x1.size() != cfg.length_scales.size()) {
    throw InvalidInputError(
        "kernel_value: vector dimension does not match length-scales");
  }
  return kernel_from_distance(cfg.family,
                              scaled_distance(x1, x2, cfg.length_scales));
}

namespace {

// Median of a sorted vector; even counts average the middle two.
double sorted_median(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Eigen::VectorXd median_heuristic(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) {
    throw InvalidInputError("median_heuristic requires at least 2 rows");
  }
  Eigen::VectorXd scales(X.cols());
  std::vector<double> diffs;
  diffs.reserve(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (Eigen::Index d = 0; d < X.cols(); ++d) {
    diffs.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        diffs.push_back(std::abs(X(i, d) - X(j, d)));
      }
    }
    double m = sorted_median(diffs);
    if (m == 0.0) {
      // Fall back to pairs of distinct values only.
      std::vector<double> nonzero;
      for (double v : diffs) {
        if (v != 0.0) nonzero.push_back(v);
      }
      m = nonzero.empty() ? 1.0 : sorted_median(nonzero);
      if (m == 0.0) m = 1.0;
    }
    scales[d] = m;
  }
  return scales;
}

Eigen::VectorXd scaled_median_heuristic(const Eigen::MatrixXd& X) {
  const double factor = 20.0 * std::sqrt(static_cast<double>(X.cols()));
  return factor * median_heuristic(X);
}

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& X1,
                                  const Eigen::MatrixXd& X2,
                                  const KernelConfig& cfg) {
  if (X1.cols() != X2.cols()) {
    throw InvalidInputError(
        "covariance_matrix: feature dimensions do not agree");
  }
  if (cfg.family != KernelFamily::Identity) {
    cfg.validate();
    if (X1.cols() != cfg.length_scales.size()) {
      throw InvalidInputError(
          "covariance_matrix: feature dimension does not match length-scales");
    }
  }
  const bool same = (&X1 == &X2) ||
                    (X1.rows() == X2.rows() && X1.cols() == X2.cols() &&
                     X1 == X2);
  Eigen::MatrixXd K(X1.rows(), X2.rows());
  if (same) {
    for (Eigen::Index i = 0; i < X1.rows(); ++i) {
      K(i, i) = 1.0;
      for (Eigen::Index j = i + 1; j < X2.rows(); ++j) {
        const double v = kernel_value(X1.row(i), X2.row(j), cfg);
        K(i, j) = v;
        K(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < X1.rows(); ++i) {
      for (Eigen::Index j = 0; j < X2.rows(); ++j) {
        K(i, j) = kernel_value(X1.row(i), X2.row(j), cfg);
      }
    }
  }
  return K;
}

CholeskyFactor cholesky_with_jitter(const Eigen::MatrixXd& K, double jitter) {
  if (K.rows() != K.cols()) {
    throw InvalidInputError("cholesky_with_jitter: matrix must be square");
  }
  double j = jitter > 0.0 ? jitter : 1e-6;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K.rows(), K.cols());
  while (j <= 1e-2 * (1.0 + 1e-12)) {
    CholeskyFactor f;
    f.llt.compute(K + j * I);
    if (f.llt.info() == Eigen::Success) {
      f.jitter_used = j;
      return f;
    }
    j *= 10.0;
  }
  throw NumericalError(
      "Cholesky factorization failed after jitter escalation to 1e-2");
}

}  // namespace prefgp
