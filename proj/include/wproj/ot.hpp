#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>

#include <Eigen/SparseCore>

#include "wproj/measure.hpp"
#include "wproj/types.hpp"

namespace wproj {

/// Default ceiling on n0 * n1 for any single transport problem.
inline constexpr std::size_t kDefaultSizeBudget = 500'000'000;

/// Squared Euclidean costs |x_i - y_j|^2 between the atoms of two measures.
struct CostMatrix {
  Matrix values;

  Index source_n() const noexcept { return values.rows(); }
  Index target_n() const noexcept { return values.cols(); }
};

CostMatrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b,
                       std::size_t size_budget = kDefaultSizeBudget);

enum class PlanMethod { Exact, Entropic, Oracle };

std::string_view to_string(PlanMethod method) noexcept;

using SparseCoupling = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

/// Coupling between a source measure (rows) and a target measure (columns).
///
/// Exact and oracle plans are stored sparse (a vertex of the transport
/// polytope has at most n0 + n1 - 1 nonzeros); entropic plans are dense.
struct TransportPlan {
  std::variant<Matrix, SparseCoupling> coupling;
  double cost = 0.0;  // <coupling, |x - y|^2>, always the unregularised cost
  PlanMethod method = PlanMethod::Exact;
  double epsilon = 0.0;  // entropic regularisation, 0 otherwise
  double marginal_residual = 0.0;
  bool converged = true;
  long iterations = 0;

  Index rows() const;
  Index cols() const;
  Vector row_sums() const;
  Vector col_sums() const;
  Matrix dense() const;
  /// Gamma * rhs, with rhs having one row per target atom.
  Matrix times(const Matrix& rhs) const;
  /// Calls fn(i, j, mass) for every stored entry with mass > 0, row-major.
  template <class Fn>
  void for_each_nonzero(Fn&& fn) const;
};

/// Max deviation of plan marginals from the measures' weights.
double marginal_residual(const TransportPlan& plan, const DiscreteMeasure& a, const DiscreteMeasure& b);

struct ExactOptions {
  std::size_t size_budget = kDefaultSizeBudget;
  /// Problems with n0 * n1 up to this size get every arc up front; larger
  /// ones are solved by pricing arcs in blocks and adding violated ones.
  std::size_t dense_arc_limit = 4096;
  int initial_arcs_per_row = 8;
  int added_arcs_per_row = 8;
  int max_pricing_rounds = 200;
};

/// Exact discrete OT via the primal network simplex.
TransportPlan solve_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactOptions& options = {});

struct EntropicOptions {
  /// Absolute regularisation. Defaults to 0.05 * median(cost).
  std::optional<double> epsilon;
  long max_iter = 10000;
  double tol = 1e-9;  // on the max marginal residual
  /// Anneal epsilon geometrically from the cost scale down to the target.
  bool epsilon_scaling = true;
  std::size_t size_budget = kDefaultSizeBudget;
};

/// Entropic OT by stabilised Sinkhorn scaling. The kernel is kept in
/// log-absorbed form so no exponent underflows; NotConverged is reported via
/// `converged == false` with the last iterate returned.
TransportPlan solve_entropic(const DiscreteMeasure& a, const DiscreteMeasure& b, const EntropicOptions& options = {});

/// Exhaustive minimum over permutation couplings; test oracle only.
/// Requires equal sizes n <= 8 and uniform weights.
TransportPlan brute_force_assignment(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// sqrt(plan.cost). For entropic plans the value is only an upper bound on
/// W2 and a warning is logged.
double w2_distance(const TransportPlan& plan);

/// Convenience: exact W2 between two measures.
double w2_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactOptions& options = {});

template <class Fn>
void TransportPlan::for_each_nonzero(Fn&& fn) const {
  if (const auto* dense_ptr = std::get_if<Matrix>(&coupling)) {
    const Matrix& m = *dense_ptr;
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) > 0.0) fn(i, j, m(i, j));
      }
    }
  } else {
    const auto& s = std::get<SparseCoupling>(coupling);
    for (Index i = 0; i < s.outerSize(); ++i) {
      for (SparseCoupling::InnerIterator it(s, i); it; ++it) {
        if (it.value() > 0.0) fn(i, static_cast<Index>(it.col()), it.value());
      }
    }
  }
}

}  // namespace wproj
