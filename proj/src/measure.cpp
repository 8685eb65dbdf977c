#include "wproj/measure.hpp"

#include <cmath>
#include <string>

#include "wproj/error.hpp"

namespace wproj {

namespace {

double ordered_sum(const Vector& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += v[i];
  return s;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Matrix support, Vector weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.rows() == 0) throw Error(ErrorCode::EmptyInput, "measure has no atoms");
  if (support_.cols() == 0) throw Error(ErrorCode::EmptyInput, "measure has dimension 0");
  if (weights_.size() != support_.rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "support has " + std::to_string(support_.rows()) + " rows but " +
                    std::to_string(weights_.size()) + " weights");
  }
  if (!support_.allFinite()) throw Error(ErrorCode::NonFinite, "support contains NaN or Inf");
  for (Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]) || weights_[i] <= 0.0) {
      throw Error(ErrorCode::InvalidWeights,
                  "weight " + std::to_string(i) + " is not strictly positive");
    }
  }
  const double total = ordered_sum(weights_);
  if (std::abs(total - 1.0) > kSimplexTol) {
    throw Error(ErrorCode::InvalidWeights, "weights sum to " + std::to_string(total));
  }
}

Eigen::RowVectorXd DiscreteMeasure::mean() const {
  Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(dim());
  for (Index i = 0; i < size(); ++i) m += weights_[i] * support_.row(i);
  return m;
}

bool DiscreteMeasure::identical_to(const DiscreteMeasure& other) const {
  if (this == &other) return true;
  return support_.rows() == other.support_.rows() && support_.cols() == other.support_.cols() &&
         support_ == other.support_ && weights_ == other.weights_;
}

DiscreteMeasure from_samples(const Matrix& samples) {
  if (samples.rows() == 0) throw Error(ErrorCode::EmptyInput, "no samples");
  if (!samples.allFinite()) throw Error(ErrorCode::NonFinite, "samples contain NaN or Inf");
  const Index n = samples.rows();
  return DiscreteMeasure(samples, Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure from_weighted_samples(const Matrix& samples, const Vector& raw_weights) {
  if (samples.rows() == 0) throw Error(ErrorCode::EmptyInput, "no samples");
  if (raw_weights.size() != samples.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "weight column length differs from row count");
  }
  if (!samples.allFinite()) throw Error(ErrorCode::NonFinite, "samples contain NaN or Inf");
  Index kept = 0;
  double total = 0.0;
  for (Index i = 0; i < raw_weights.size(); ++i) {
    const double w = raw_weights[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::InvalidWeights, "raw weight " + std::to_string(i) + " is negative or non-finite");
    }
    if (w > 0.0) {
      ++kept;
      total += w;
    }
  }
  if (kept == 0) throw Error(ErrorCode::AllRowsDropped, "every row has zero weight");
  Matrix support(kept, samples.cols());
  Vector weights(kept);
  Index k = 0;
  for (Index i = 0; i < raw_weights.size(); ++i) {
    if (raw_weights[i] > 0.0) {
      support.row(k) = samples.row(i);
      weights[k] = raw_weights[i] / total;
      ++k;
    }
  }
  return DiscreteMeasure(std::move(support), std::move(weights));
}

void require_simplex(const Vector& lambda, double tol, const char* what) {
  if (lambda.size() == 0) throw Error(ErrorCode::BadWeights, std::string(what) + " is empty");
  double total = 0.0;
  for (Index j = 0; j < lambda.size(); ++j) {
    if (!std::isfinite(lambda[j]) || lambda[j] < -tol) {
      throw Error(ErrorCode::BadWeights, std::string(what) + " has a negative entry");
    }
    total += lambda[j];
  }
  if (std::abs(total - 1.0) > tol) {
    throw Error(ErrorCode::BadWeights, std::string(what) + " sums to " + std::to_string(total));
  }
}

DiscreteMeasure pool(std::span<const DiscreteMeasure> parts, const std::optional<Vector>& mix_weights) {
  if (parts.empty()) throw Error(ErrorCode::EmptyInput, "pool of zero measures");
  const auto count = static_cast<Index>(parts.size());
  Vector mix = mix_weights.value_or(Vector::Constant(count, 1.0 / static_cast<double>(count)));
  if (mix.size() != count) {
    throw Error(ErrorCode::BadMixWeights, "mix weight count differs from part count");
  }
  try {
    require_simplex(mix, kSimplexTol, "mix weights");
  } catch (const Error& e) {
    throw Error(ErrorCode::BadMixWeights, e.what());
  }
  const Index d = parts.front().dim();
  Index total = 0;
  for (Index j = 0; j < count; ++j) {
    if (parts[j].dim() != d) {
      throw Error(ErrorCode::DimensionMismatch, "pooled parts have different dimensions");
    }
    if (mix[j] > 0.0) total += parts[j].size();
  }
  Matrix support(total, d);
  Vector weights(total);
  Index row = 0;
  for (Index j = 0; j < count; ++j) {
    if (mix[j] <= 0.0) continue;
    const auto& part = parts[j];
    support.middleRows(row, part.size()) = part.support();
    weights.segment(row, part.size()) = mix[j] * part.weights();
    row += part.size();
  }
  // Mixing weights may sit slightly off the simplex; renormalise so the
  // result passes the strict measure invariant.
  const double sum = ordered_sum(weights);
  if (std::abs(sum - 1.0) > 1e-12) weights /= sum;
  return DiscreteMeasure(std::move(support), std::move(weights));
}

double second_moment(const DiscreteMeasure& m) {
  double s = 0.0;
  for (Index i = 0; i < m.size(); ++i) s += m.weights()[i] * m.support().row(i).squaredNorm();
  return s;
}

DiscreteMeasure with_support(const DiscreteMeasure& base, Matrix support) {
  if (support.rows() != base.size() || support.cols() != base.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "pushforward support shape differs from base");
  }
  return DiscreteMeasure(std::move(support), base.weights());
}

}  // namespace wproj
