#pragma once

#include <cstddef>
#include <string>

#include "wproj/error.hpp"
#include "wproj/measure.hpp"

namespace wproj::detail {

inline void require_same_dim(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "measures live in R^" + std::to_string(a.dim()) + " and R^" + std::to_string(b.dim()));
  }
}

inline void require_budget(const DiscreteMeasure& a, const DiscreteMeasure& b, std::size_t budget) {
  const double entries = static_cast<double>(a.size()) * static_cast<double>(b.size());
  if (entries > static_cast<double>(budget)) {
    throw Error(ErrorCode::SizeBudgetExceeded, std::to_string(a.size()) + " x " + std::to_string(b.size()) +
                                                   " exceeds the budget of " + std::to_string(budget) + " entries");
  }
}

}  // namespace wproj::detail
