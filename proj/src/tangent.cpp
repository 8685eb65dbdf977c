#include "wproj/tangent.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "wproj/error.hpp"

namespace wproj {

namespace {

bool same_base(const DiscreteMeasure& p0, const TangentField& field) {
  return field.base && field.base->identical_to(p0);
}

}  // namespace

void TangentField::check() const {
  if (!base) throw Error(ErrorCode::BaseMismatch, "tangent field has no base measure");
  const Matrix& x = base->support();
  if (map_values.rows() != x.rows() || map_values.cols() != x.cols() || displacement.rows() != x.rows() ||
      displacement.cols() != x.cols()) {
    throw Error(ErrorCode::BaseMismatch, "tangent field shape differs from its base");
  }
  if (!map_values.allFinite() || !displacement.allFinite()) {
    throw Error(ErrorCode::NonFinite, "tangent field has NaN or Inf values");
  }
  constexpr double ulp = std::numeric_limits<double>::epsilon();
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index k = 0; k < x.cols(); ++k) {
      const double drift = std::abs(map_values(i, k) - displacement(i, k) - x(i, k));
      const double scale = std::max({std::abs(map_values(i, k)), std::abs(x(i, k)), 1e-300});
      if (drift > 4.0 * ulp * scale) {
        throw Error(ErrorCode::BaseMismatch, "map - displacement drifted from the base support");
      }
    }
  }
}

double TangentField::squared_norm() const { return l2_inner(base->weights(), displacement, displacement); }

double l2_inner(const Vector& weights, const Matrix& f, const Matrix& g) {
  double s = 0.0;
  for (Index i = 0; i < f.rows(); ++i) s += weights[i] * f.row(i).dot(g.row(i));
  return s;
}

TangentField field_from_map(std::shared_ptr<const DiscreteMeasure> p0, Matrix map_values, PlanMethod method) {
  if (!p0) throw Error(ErrorCode::BaseMismatch, "null base measure");
  TangentField field;
  field.displacement = map_values - p0->support();
  field.map_values = std::move(map_values);
  field.base = std::move(p0);
  field.source_plan_method = method;
  field.check();
  return field;
}

TangentField barycentric_projection(const TransportPlan& plan, std::shared_ptr<const DiscreteMeasure> p0,
                                    const DiscreteMeasure& pj) {
  if (!p0) throw Error(ErrorCode::BaseMismatch, "null base measure");
  if (plan.rows() != p0->size() || plan.cols() != pj.size()) {
    throw Error(ErrorCode::DimensionMismatch, "plan shape " + std::to_string(plan.rows()) + "x" +
                                                  std::to_string(plan.cols()) + " does not match the measures");
  }
  if (p0->dim() != pj.dim()) throw Error(ErrorCode::DimensionMismatch, "measures differ in dimension");
  const Vector mass = plan.row_sums();
  Matrix values = plan.times(pj.support());
  for (Index i = 0; i < values.rows(); ++i) {
    if (!(mass[i] > 0.0)) {
      throw Error(ErrorCode::ZeroRowMass, "plan row " + std::to_string(i) + " carries no mass");
    }
    values.row(i) /= mass[i];
  }
  return field_from_map(std::move(p0), std::move(values), plan.method);
}

DiscreteMeasure exp_map(const DiscreteMeasure& p0, const TangentField& field, double t) {
  if (!same_base(p0, field)) throw Error(ErrorCode::BaseMismatch, "field is based at a different measure");
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorCode::OutOfRange, "t must lie in [0, 1]");
  if (t == 0.0) return p0;
  if (t == 1.0) return with_support(p0, field.map_values);
  return with_support(p0, p0.support() + t * field.displacement);
}

Matrix combined_displacement(std::span<const TangentField> fields, const Vector& lambda) {
  if (fields.empty()) throw Error(ErrorCode::EmptyInput, "no tangent fields");
  if (static_cast<Index>(fields.size()) != lambda.size()) {
    throw Error(ErrorCode::BadWeights, "weight count differs from field count");
  }
  Matrix out = Matrix::Zero(fields.front().displacement.rows(), fields.front().displacement.cols());
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (lambda[static_cast<Index>(j)] != 0.0) out += lambda[static_cast<Index>(j)] * fields[j].displacement;
  }
  return out;
}

DiscreteMeasure hull_point(const DiscreteMeasure& p0, std::span<const TangentField> fields, const Vector& lambda) {
  if (fields.empty()) throw Error(ErrorCode::EmptyInput, "no tangent fields");
  if (static_cast<Index>(fields.size()) != lambda.size()) {
    throw Error(ErrorCode::BadWeights, "weight count differs from field count");
  }
  for (const auto& f : fields) {
    if (!same_base(p0, f)) throw Error(ErrorCode::BaseMismatch, "field is based at a different measure");
  }
  require_simplex(lambda, kSimplexTol, "hull weights");
  // A vertex of the simplex reproduces that control's map exactly.
  for (Index j = 0; j < lambda.size(); ++j) {
    if (lambda[j] == 1.0) return with_support(p0, fields[static_cast<std::size_t>(j)].map_values);
  }
  Matrix map = Matrix::Zero(p0.size(), p0.dim());
  for (std::size_t j = 0; j < fields.size(); ++j) {
    const double w = lambda[static_cast<Index>(j)];
    if (w != 0.0) map += w * fields[j].map_values;
  }
  return with_support(p0, std::move(map));
}

}  // namespace wproj
