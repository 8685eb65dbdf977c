#pragma once

#include <memory>
#include <span>
#include <vector>

#include "wproj/measure.hpp"
#include "wproj/ot.hpp"

namespace wproj {

/// A barycentric-projection map evaluated on the atoms of a base measure.
///
/// `map_values` holds b(x_i) and `displacement` holds b(x_i) - x_i. Both are
/// kept; `check()` verifies they agree with the base support to rounding.
struct TangentField {
  std::shared_ptr<const DiscreteMeasure> base;
  Matrix map_values;
  Matrix displacement;
  PlanMethod source_plan_method = PlanMethod::Exact;

  Index size() const noexcept { return displacement.rows(); }

  /// Throws BaseMismatch / NonFinite if the invariants are broken.
  void check() const;

  /// L2(base) squared norm of the displacement.
  double squared_norm() const;
};

/// b(x_i) = sum_j gamma_ij y_j / sum_j gamma_ij for a plan whose rows index
/// p0's atoms and whose columns index pj's atoms.
TangentField barycentric_projection(const TransportPlan& plan, std::shared_ptr<const DiscreteMeasure> p0,
                                    const DiscreteMeasure& pj);

/// Field built directly from map values (used for tests and scaling).
TangentField field_from_map(std::shared_ptr<const DiscreteMeasure> p0, Matrix map_values,
                            PlanMethod method = PlanMethod::Exact);

/// Pushforward of p0 by x -> x + t * displacement(x), t in [0, 1].
DiscreteMeasure exp_map(const DiscreteMeasure& p0, const TangentField& field, double t);

/// Pushforward of p0 by x -> sum_j lambda_j b_j(x).
DiscreteMeasure hull_point(const DiscreteMeasure& p0, std::span<const TangentField> fields, const Vector& lambda);

/// sum_j lambda_j * displacement_j, evaluated on p0's atoms.
Matrix combined_displacement(std::span<const TangentField> fields, const Vector& lambda);

/// <f, g>_{L2(P0)} for two fields of values on P0's atoms.
double l2_inner(const Vector& weights, const Matrix& f, const Matrix& g);

}  // namespace wproj
