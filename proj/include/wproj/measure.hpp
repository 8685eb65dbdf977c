#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wproj/types.hpp"

namespace wproj {

/// Finitely supported probability measure on R^d.
///
/// Rows of `support()` are atom locations; `weights()` holds their masses.
/// Every instance satisfies: finite support, strictly positive weights
/// summing to one within kSimplexTol, and matching row/weight counts.
/// Atoms are never merged, so duplicate locations are legal.
class DiscreteMeasure {
 public:
  /// Validates and takes ownership. Throws Error on any broken invariant.
  DiscreteMeasure(Matrix support, Vector weights);

  const Matrix& support() const noexcept { return support_; }
  const Vector& weights() const noexcept { return weights_; }
  Index size() const noexcept { return support_.rows(); }
  Index dim() const noexcept { return support_.cols(); }

  Eigen::RowVectorXd mean() const;

  /// Exact (bitwise) equality of support and weights.
  bool identical_to(const DiscreteMeasure& other) const;

 private:
  Matrix support_;
  Vector weights_;
};

/// Empirical measure with uniform weights 1/n.
DiscreteMeasure from_samples(const Matrix& samples);

/// Weighted empirical measure. Raw weights must be finite and nonnegative;
/// zero-weight rows are dropped and the rest renormalized to sum 1.
DiscreteMeasure from_weighted_samples(const Matrix& samples, const Vector& raw_weights);

/// Mixture sum_j mix_j * parts_j, realised as concatenated atoms.
/// Parts whose mixing weight is exactly zero contribute no atoms.
/// Default mix is uniform over parts.
DiscreteMeasure pool(std::span<const DiscreteMeasure> parts,
                     const std::optional<Vector>& mix_weights = std::nullopt);

double second_moment(const DiscreteMeasure& m);

/// Pushforward of `base` through a new atom matrix of the same shape.
/// Weights are copied bitwise.
DiscreteMeasure with_support(const DiscreteMeasure& base, Matrix support);

/// Checks lambda is in the simplex within `tol`; throws BadWeights with `what`.
void require_simplex(const Vector& lambda, double tol, const char* what);

}  // namespace wproj
