#include <algorithm>
#include <cmath>

#include "wproj/error.hpp"
#include "wproj/projection.hpp"

namespace wproj {

GramSystem assemble_gram(std::span<const TangentField> fields, const Vector& p0_weights, double scale) {
  if (fields.empty()) throw Error(ErrorCode::EmptyInput, "no tangent fields");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::OutOfRange, "gram scale must be positive");
  const auto& base = fields.front().base;
  for (const auto& f : fields) {
    if (!f.base || !base || !(f.base == base || f.base->identical_to(*base))) {
      throw Error(ErrorCode::BaseMismatch, "fields are based at different measures");
    }
    if (f.displacement.rows() != p0_weights.size()) {
      throw Error(ErrorCode::BaseMismatch, "field size differs from the weight vector");
    }
  }
  const auto count = static_cast<Index>(fields.size());
  const Index n = p0_weights.size();
  const Index d = fields.front().displacement.cols();
  GramSystem gram;
  gram.scale = scale;
  gram.matrix.resize(count, count);
  // Fixed summation order: atoms outer, coordinates inner.
  for (Index j = 0; j < count; ++j) {
    const Matrix& dj = fields[static_cast<std::size_t>(j)].displacement;
    for (Index k = j; k < count; ++k) {
      const Matrix& dk = fields[static_cast<std::size_t>(k)].displacement;
      double s = 0.0;
      for (Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Index c = 0; c < d; ++c) row += (scale * dj(i, c)) * (scale * dk(i, c));
        s += p0_weights[i] * row;
      }
      gram.matrix(j, k) = s;
      gram.matrix(k, j) = s;
    }
  }
  return gram;
}

GramSystem assemble_gram(std::span<const TangentField> fields, const Vector& p0_weights) {
  double largest = 0.0;
  for (const auto& f : fields) {
    if (f.displacement.rows() == p0_weights.size()) {
      largest = std::max(largest, std::sqrt(l2_inner(p0_weights, f.displacement, f.displacement)));
    }
  }
  return assemble_gram(fields, p0_weights, 1.0 / std::max(1.0, largest));
}

}  // namespace wproj
