#pragma once

// Linear readout y_hat = X w trained by least squares through the
// pseudoinverse, and the scores used by the benchmarks.

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmqrc/errors.hpp"
#include "nmqrc/linalg.hpp"

namespace nmqrc {

struct ReadoutWeights {
  RealVector weights;               // bias weight last
  std::vector<std::string> labels;  // optional, one per weight
};

struct ReadoutOptions {
  double rcond = kDefaultRcond;
  double ridge_lambda = 0.0;  // 0 = plain pseudoinverse least squares
};

/// w = X^+ y, or (X^T X + lambda I)^-1 X^T y when ridge_lambda > 0.
inline ReadoutWeights fit_linear(const RealMatrix& x, const RealVector& y, const ReadoutOptions& opt = {}) {
  if (x.rows() == 0 || y.size() == 0) throw InvalidArgument("fit_linear: empty training set");
  if (x.rows() != y.size()) throw InvalidArgument("fit_linear: feature rows and targets differ in length");
  if (!y.allFinite()) throw InvalidArgument("fit_linear: non-finite targets");
  if (!x.allFinite()) throw InvalidArgument("fit_linear: non-finite features");
  if (!(opt.ridge_lambda >= 0.0) || !std::isfinite(opt.ridge_lambda)) {
    throw InvalidArgument("fit_linear: ridge_lambda must be finite and >= 0");
  }
  ReadoutWeights w;
  if (opt.ridge_lambda == 0.0) {
    w.weights = pseudoinverse(x, opt.rcond) * y;
  } else {
    Eigen::BDCSVD<RealMatrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("fit_linear: SVD did not converge");
    const RealVector& sv = svd.singularValues();
    const RealVector shrink = sv.array() / (sv.array().square() + opt.ridge_lambda);
    w.weights = svd.matrixV() * shrink.asDiagonal() * (svd.matrixU().transpose() * y);
  }
  if (!w.weights.allFinite()) throw NumericalError("fit_linear: non-finite weights");
  return w;
}

inline RealVector predict(const RealMatrix& x, const ReadoutWeights& w) {
  if (x.cols() != w.weights.size()) throw InvalidArgument("predict: feature width does not match weights");
  return x * w.weights;
}

inline double mse(const RealVector& y, const RealVector& yhat) {
  if (y.size() != yhat.size()) throw InvalidArgument("mse: length mismatch");
  if (y.size() == 0) throw InvalidArgument("mse: empty input");
  return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

struct CorrelationScore {
  double value = 0.0;
  bool degenerate = false;  // a zero-variance input forced the score to 0
};

/// Cov^2(y, yhat) / (Var(y) Var(yhat)), population normalization.
inline CorrelationScore squared_correlation(const RealVector& y, const RealVector& yhat) {
  if (y.size() != yhat.size()) throw InvalidArgument("squared_correlation: length mismatch");
  if (y.size() == 0) throw InvalidArgument("squared_correlation: empty input");
  const double n = static_cast<double>(y.size());
  const RealVector dy = y.array() - y.mean();
  const RealVector dh = yhat.array() - yhat.mean();
  const double var_y = dy.squaredNorm() / n;
  const double var_h = dh.squaredNorm() / n;
  // Rounding leaves a tiny variance behind for constant vectors.
  auto negligible = [](double var, const RealVector& v) {
    const double scale = v.cwiseAbs().maxCoeff();
    return !(var > 1e-28 * (1.0 + scale * scale));
  };
  if (negligible(var_y, y) || negligible(var_h, yhat)) return {0.0, true};
  const double cov = dy.dot(dh) / n;
  double r2 = cov * cov / (var_y * var_h);
  if (r2 > 1.0) r2 = 1.0;
  return {r2, false};
}

inline nlohmann::json weights_to_json(const ReadoutWeights& w) {
  nlohmann::json doc;
  doc["weights"] = std::vector<double>(w.weights.data(), w.weights.data() + w.weights.size());
  doc["labels"] = w.labels;
  return doc;
}

}  // namespace nmqrc
