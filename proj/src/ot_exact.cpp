#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "network_simplex.hpp"
#include "ot_checks.hpp"
#include "wproj/error.hpp"
#include "wproj/log.hpp"
#include "wproj/ot.hpp"
#include "wproj/rng.hpp"

namespace wproj {

std::string_view to_string(PlanMethod method) noexcept {
  switch (method) {
    case PlanMethod::Exact: return "exact";
    case PlanMethod::Entropic: return "entropic";
    case PlanMethod::Oracle: return "oracle";
  }
  return "unknown";
}

namespace {

using detail::require_budget;
using detail::require_same_dim;

double squared_distance(const Matrix& x, Index i, const Matrix& y, Index j) {
  double s = 0.0;
  for (Index k = 0; k < x.cols(); ++k) {
    const double diff = x(i, k) - y(j, k);
    s += diff * diff;
  }
  return s;
}

SparseCoupling to_sparse(Index rows, Index cols, std::vector<Eigen::Triplet<double, std::int64_t>>& triplets) {
  SparseCoupling s(rows, cols);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

double plan_cost(const SparseCoupling& s, const Matrix& x, const Matrix& y) {
  double total = 0.0;
  for (Index i = 0; i < s.outerSize(); ++i) {
    for (SparseCoupling::InnerIterator it(s, i); it; ++it) {
      total += it.value() * squared_distance(x, i, y, static_cast<Index>(it.col()));
    }
  }
  return total;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct ArcSet {
  std::vector<std::int32_t> source;
  std::vector<std::int32_t> target;
  std::vector<double> cost;
};

/// Runs the network simplex and converts the flow to a sparse plan.
struct SolvedArcs {
  SparseCoupling coupling;
  std::vector<double> potential;  // node potentials, size n0 + n1
  double rc_tol = 0.0;
  long pivots = 0;
};

SolvedArcs collect(const detail::NetworkSimplex& ns, Index n0, Index n1, const std::vector<std::int32_t>& src,
                   const std::vector<std::int32_t>& tgt) {
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  triplets.reserve(static_cast<std::size_t>(n0 + n1));
  for (std::int64_t e = 0; e < ns.arc_count(); ++e) {
    const double f = ns.flow(e);
    if (f > 0.0) triplets.emplace_back(src[e], tgt[e] - static_cast<std::int32_t>(n0), f);
  }
  SolvedArcs out;
  out.coupling = to_sparse(n0, n1, triplets);
  out.potential.resize(static_cast<std::size_t>(n0 + n1));
  for (Index u = 0; u < n0 + n1; ++u) out.potential[u] = ns.potential(static_cast<std::int32_t>(u));
  out.rc_tol = ns.reduced_cost_tolerance();
  out.pivots = ns.pivots();
  return out;
}

void require_optimal(detail::NetworkSimplex::Status status) {
  if (status != detail::NetworkSimplex::Status::Optimal) {
    throw Error(ErrorCode::Infeasible, "network simplex did not reach an optimal basis");
  }
}

/// Support translated so that its weighted mean is zero. Translating each
/// measure separately changes |x - y|^2 only by terms that depend on i or j
/// alone, so the optimal plans are unchanged.
Matrix centred_support(const DiscreteMeasure& m) {
  const Eigen::RowVectorXd mean = m.weights().transpose() * m.support();
  return m.support().rowwise() - mean;
}

/// Row and column reductions u, v with c_ij - u_i - v_j >= 0; they shift
/// the objective by a constant and keep the reduced costs small.
void reductions_dense(const Matrix& c, Vector& u, Vector& v) {
  u = c.rowwise().minCoeff();
  v = Vector::Constant(c.cols(), std::numeric_limits<double>::infinity());
  for (Index i = 0; i < c.rows(); ++i) {
    for (Index j = 0; j < c.cols(); ++j) v[j] = std::min(v[j], c(i, j) - u[i]);
  }
}

TransportPlan solve_dense(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const Index n0 = a.size();
  const Index n1 = b.size();
  const Matrix x = centred_support(a);
  const Matrix y = centred_support(b);
  Matrix c(n0, n1);
  for (Index i = 0; i < n0; ++i) {
    for (Index j = 0; j < n1; ++j) c(i, j) = squared_distance(x, i, y, j);
  }
  Vector u, v;
  reductions_dense(c, u, v);
  ArcSet arcs;
  const auto m = static_cast<std::size_t>(n0 * n1);
  arcs.source.reserve(m);
  arcs.target.reserve(m);
  arcs.cost.reserve(m);
  for (Index i = 0; i < n0; ++i) {
    for (Index j = 0; j < n1; ++j) {
      arcs.source.push_back(static_cast<std::int32_t>(i));
      arcs.target.push_back(static_cast<std::int32_t>(n0 + j));
      arcs.cost.push_back(std::max(0.0, c(i, j) - u[i] - v[j]));
    }
  }
  detail::NetworkSimplex ns(to_std(a.weights()), to_std(b.weights()), arcs.source, arcs.target, arcs.cost);
  require_optimal(ns.run());
  SolvedArcs solved = collect(ns, n0, n1, arcs.source, arcs.target);
  TransportPlan plan;
  plan.cost = plan_cost(solved.coupling, a.support(), b.support());
  plan.iterations = solved.pivots;
  plan.coupling = std::move(solved.coupling);
  plan.method = PlanMethod::Exact;
  return plan;
}

/// Shifted squared distances |x_i - y_j|^2 - a_i - b_j for a block of
/// source rows against every target, as one product of augmented matrices
/// [x, |x|^2 - a, 1] [-2y, 1, |y|^2 - b]'.
class BlockCosts {
 public:
  BlockCosts(const Matrix& x, const Matrix& y) {
    const Index d = x.cols();
    xsq_ = x.rowwise().squaredNorm();
    ysq_ = y.rowwise().squaredNorm();
    scale_ = xsq_.maxCoeff() + ysq_.maxCoeff();
    xa_.resize(x.rows(), d + 2);
    ya_.resize(y.rows(), d + 2);
    xa_.leftCols(d) = x;
    xa_.col(d + 1).setOnes();
    ya_.leftCols(d) = -2.0 * y;
    ya_.col(d).setOnes();
    set_shifts(Vector::Zero(x.rows()), Vector::Zero(y.rows()));
  }

  void set_shifts(const Vector& a, const Vector& b) {
    const Index d = xa_.cols() - 2;
    xa_.col(d) = xsq_ - a;
    ya_.col(d + 1) = ysq_ - b;
  }

  /// Fills out (rows x n1) for source rows [r0, r0 + rows).
  void compute(Index r0, Index rows, Matrix& out) const {
    out.noalias() = xa_.middleRows(r0, rows) * ya_.transpose();
  }

  double scale() const { return scale_; }

 private:
  Matrix xa_, ya_;
  Vector xsq_, ysq_;
  double scale_ = 0.0;
};

constexpr Index kBlockRows = 256;

/// Keeps the k smallest (value, index) pairs seen.
class TopK {
 public:
  explicit TopK(int k) : k_(k) {}
  void offer(double value, std::int32_t index) {
    if (static_cast<int>(items_.size()) < k_) {
      items_.emplace_back(value, index);
      if (static_cast<int>(items_.size()) == k_) std::make_heap(items_.begin(), items_.end());
      return;
    }
    if (value >= items_.front().first) return;
    std::pop_heap(items_.begin(), items_.end());
    items_.back() = {value, index};
    std::push_heap(items_.begin(), items_.end());
  }
  const std::vector<std::pair<double, std::int32_t>>& items() const { return items_; }

 private:
  int k_;
  std::vector<std::pair<double, std::int32_t>> items_;
};

/// Exact solution on an explicit pair of supports, with dual potentials f, g
/// satisfying |x_i - y_j|^2 - f_i - g_j >= -tol for every pair.
struct PricedSolution {
  SparseCoupling coupling;
  Vector f, g;
  long pivots = 0;
};

// Below this size the initial duals come from plain row and column minima.
constexpr Index kCoarseMin = 1024;
constexpr Index kCoarseRatio = 4;

/// Deterministic subsample of m of the indices [0, n), in increasing order.
std::vector<Index> subsample(Index n, Index m, std::uint64_t stream) {
  Rng rng = Rng::stream(0x5eed, stream);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index k = 0; k < m; ++k) {
    const Index pick = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick)]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

PricedSolution solve_priced(const Matrix& x, const Vector& wa, const Matrix& y, const Vector& wb,
                            const ExactOptions& options, int depth);

/// Row potentials for the full problem from a solution on subsamples: the
/// c-transform u_i = min_t (c_it - g_t) over the subsampled targets.
Vector coarse_row_potentials(const Matrix& x, const Vector& wa, const Matrix& y, const Vector& wb,
                             const ExactOptions& options, int depth) {
  const std::vector<Index> rows = subsample(x.rows(), x.rows() / kCoarseRatio, 2 * depth);
  const std::vector<Index> cols = subsample(y.rows(), y.rows() / kCoarseRatio, 2 * depth + 1);
  const Matrix xs = x(rows, Eigen::all);
  const Matrix ys = y(cols, Eigen::all);
  Vector ws = wa(rows);
  Vector wt = wb(cols);
  ws /= ws.sum();
  wt /= wt.sum();
  const PricedSolution coarse = solve_priced(xs, ws, ys, wt, options, depth + 1);
  BlockCosts costs(x, ys);
  costs.set_shifts(Vector::Zero(x.rows()), coarse.g);
  Vector u(x.rows());
  Matrix block;
  for (Index r0 = 0; r0 < x.rows(); r0 += kBlockRows) {
    const Index n = std::min(kBlockRows, x.rows() - r0);
    block.resize(n, ys.rows());
    costs.compute(r0, n, block);
    u.segment(r0, n) = block.rowwise().minCoeff();
  }
  return u;
}

PricedSolution solve_priced(const Matrix& x, const Vector& wa, const Matrix& y, const Vector& wb,
                            const ExactOptions& options, int depth) {
  const Index n0 = x.rows();
  const Index n1 = y.rows();
  BlockCosts costs(x, y);
  Matrix block;

  auto for_each_block = [&](auto&& fn) {
    for (Index r0 = 0; r0 < n0; r0 += kBlockRows) {
      const Index rows = std::min(kBlockRows, n0 - r0);
      block.resize(rows, n1);
      costs.compute(r0, rows, block);
      fn(r0, rows, block);
    }
  };

  // Initial duals: u from a coarse solve (or row minima), then v as the
  // c-transform of u, so that c - u - v >= 0 on every pair.
  Vector u(n0);
  if (std::min(n0, n1) >= kCoarseMin) {
    u = coarse_row_potentials(x, wa, y, wb, options, depth);
  } else {
    for_each_block([&](Index r0, Index rows, const Matrix& c) { u.segment(r0, rows) = c.rowwise().minCoeff(); });
  }
  Vector v = Vector::Constant(n1, std::numeric_limits<double>::infinity());
  costs.set_shifts(u, Vector::Zero(n1));
  for_each_block([&](Index, Index rows, const Matrix& c) {
    for (Index r = 0; r < rows; ++r) v = v.cwiseMin(c.row(r).transpose());
  });
  costs.set_shifts(u, v);

  std::vector<std::int64_t> keys;
  {
    std::vector<TopK> col_best(static_cast<std::size_t>(n1), TopK(options.initial_arcs_per_row));
    for_each_block([&](Index r0, Index rows, const Matrix& c) {
      for (Index r = 0; r < rows; ++r) {
        const Index i = r0 + r;
        TopK row_best(options.initial_arcs_per_row);
        for (Index j = 0; j < n1; ++j) {
          const double rc = c(r, j);
          row_best.offer(rc, static_cast<std::int32_t>(j));
          col_best[j].offer(rc, static_cast<std::int32_t>(i));
        }
        for (const auto& item : row_best.items()) keys.push_back(i * n1 + item.second);
      }
    });
    for (Index j = 0; j < n1; ++j) {
      for (const auto& item : col_best[j].items()) keys.push_back(static_cast<std::int64_t>(item.second) * n1 + j);
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  ArcSet arcs;
  auto append_arcs = [&](const std::vector<std::int64_t>& chosen) {
    arcs.source.clear();
    arcs.target.clear();
    arcs.cost.clear();
    for (std::int64_t key : chosen) {
      const Index i = key / n1;
      const Index j = key % n1;
      arcs.source.push_back(static_cast<std::int32_t>(i));
      arcs.target.push_back(static_cast<std::int32_t>(n0 + j));
      arcs.cost.push_back(std::max(0.0, squared_distance(x, i, y, j) - u[i] - v[j]));
    }
  };
  // c_ij <= 2 (|x_i|^2 + |y_j|^2) bounds every reduced cost c - u - v.
  const double cost_bound = 2.0 * costs.scale() - std::min(0.0, u.minCoeff()) - std::min(0.0, v.minCoeff());
  append_arcs(keys);
  detail::NetworkSimplex ns(to_std(wa), to_std(wb), arcs.source, arcs.target, arcs.cost, cost_bound);
  std::vector<std::int32_t> all_source = arcs.source;
  std::vector<std::int32_t> all_target = arcs.target;

  const double price_tol = 1e-11 * costs.scale();
  const double tol = std::max(price_tol, 10.0 * ns.reduced_cost_tolerance());
  Vector row_shift(n0), col_shift(n1);
  for (int round = 0; round < options.max_pricing_rounds; ++round) {
    require_optimal(ns.run());
    for (Index i = 0; i < n0; ++i) row_shift[i] = u[i] - ns.potential(static_cast<std::int32_t>(i));
    for (Index j = 0; j < n1; ++j) col_shift[j] = v[j] + ns.potential(static_cast<std::int32_t>(n0 + j));
    costs.set_shifts(row_shift, col_shift);

    std::vector<std::int64_t> added;
    for_each_block([&](Index r0, Index rows, const Matrix& c) {
      for (Index r = 0; r < rows; ++r) {
        const Index i = r0 + r;
        TopK worst(options.added_arcs_per_row);
        const double* rc = c.row(r).data();
        for (Index j = 0; j < n1; ++j) {
          if (rc[j] < -tol) worst.offer(rc[j], static_cast<std::int32_t>(j));
        }
        for (const auto& item : worst.items()) {
          // Confirm with the direct distance before admitting the arc.
          const Index j = item.second;
          const double exact_rc = std::max(0.0, squared_distance(x, i, y, j) - u[i] - v[j]) -
                                  (row_shift[i] - u[i]) - (col_shift[j] - v[j]);
          if (exact_rc < -tol) added.push_back(i * n1 + j);
        }
      }
    });
    std::sort(added.begin(), added.end());
    std::vector<std::int64_t> fresh;
    std::set_difference(added.begin(), added.end(), keys.begin(), keys.end(), std::back_inserter(fresh));
    log_debug("exact OT pricing (level " + std::to_string(depth) + ", " + std::to_string(n0) + " x " +
              std::to_string(n1) + ") round " + std::to_string(round) + ": " + std::to_string(keys.size()) +
              " arcs, " + std::to_string(fresh.size()) + " added, " + std::to_string(ns.pivots()) + " pivots");
    if (fresh.empty()) {
      SolvedArcs solved = collect(ns, n0, n1, all_source, all_target);
      return PricedSolution{std::move(solved.coupling), row_shift, col_shift, solved.pivots};
    }
    append_arcs(fresh);
    ns.add_arcs(arcs.source, arcs.target, arcs.cost);
    all_source.insert(all_source.end(), arcs.source.begin(), arcs.source.end());
    all_target.insert(all_target.end(), arcs.target.begin(), arcs.target.end());
    std::vector<std::int64_t> merged;
    merged.reserve(keys.size() + fresh.size());
    std::merge(keys.begin(), keys.end(), fresh.begin(), fresh.end(), std::back_inserter(merged));
    keys = std::move(merged);
  }
  throw Error(ErrorCode::Infeasible, "arc pricing did not settle within the round limit");
}

TransportPlan solve_by_pricing(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactOptions& options) {
  PricedSolution solved =
      solve_priced(centred_support(a), a.weights(), centred_support(b), b.weights(), options, 0);
  TransportPlan plan;
  plan.cost = plan_cost(solved.coupling, a.support(), b.support());
  plan.coupling = std::move(solved.coupling);
  plan.iterations = solved.pivots;
  plan.method = PlanMethod::Exact;
  return plan;
}

}  // namespace

CostMatrix cost_matrix(const DiscreteMeasure& a, const DiscreteMeasure& b, std::size_t size_budget) {
  require_same_dim(a, b);
  require_budget(a, b, size_budget);
  CostMatrix cm;
  cm.values.resize(a.size(), b.size());
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) cm.values(i, j) = squared_distance(a.support(), i, b.support(), j);
  }
  return cm;
}

Index TransportPlan::rows() const {
  return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, coupling);
}

Index TransportPlan::cols() const {
  return std::visit([](const auto& m) { return static_cast<Index>(m.cols()); }, coupling);
}

Vector TransportPlan::row_sums() const {
  Vector s = Vector::Zero(rows());
  for_each_nonzero([&](Index i, Index, double m) { s[i] += m; });
  return s;
}

Vector TransportPlan::col_sums() const {
  Vector s = Vector::Zero(cols());
  for_each_nonzero([&](Index, Index j, double m) { s[j] += m; });
  return s;
}

Matrix TransportPlan::dense() const {
  if (const auto* d = std::get_if<Matrix>(&coupling)) return *d;
  return Matrix(std::get<SparseCoupling>(coupling));
}

Matrix TransportPlan::times(const Matrix& rhs) const {
  if (rhs.rows() != cols()) throw Error(ErrorCode::DimensionMismatch, "plan/rhs shape mismatch");
  if (const auto* d = std::get_if<Matrix>(&coupling)) return (*d) * rhs;
  return std::get<SparseCoupling>(coupling) * rhs;
}

double marginal_residual(const TransportPlan& plan, const DiscreteMeasure& a, const DiscreteMeasure& b) {
  const Vector r = plan.row_sums() - a.weights();
  const Vector c = plan.col_sums() - b.weights();
  return std::max(r.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff());
}

TransportPlan solve_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactOptions& options) {
  require_same_dim(a, b);
  require_budget(a, b, options.size_budget);
  const double arcs = static_cast<double>(a.size()) * static_cast<double>(b.size());
  TransportPlan plan = arcs <= static_cast<double>(options.dense_arc_limit) ? solve_dense(a, b)
                                                                            : solve_by_pricing(a, b, options);
  plan.marginal_residual = marginal_residual(plan, a, b);
  if (plan.marginal_residual > 1e-7) {
    throw Error(ErrorCode::Infeasible,
                "exact plan violates marginals by " + std::to_string(plan.marginal_residual));
  }
  plan.converged = true;
  return plan;
}

TransportPlan brute_force_assignment(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  require_same_dim(a, b);
  const Index n = a.size();
  if (b.size() != n || n > 8) {
    throw Error(ErrorCode::OracleSizeExceeded, "oracle needs equal sizes n <= 8");
  }
  const double uniform = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    if (std::abs(a.weights()[i] - uniform) > 1e-12 || std::abs(b.weights()[i] - uniform) > 1e-12) {
      throw Error(ErrorCode::OracleSizeExceeded, "oracle needs uniform weights");
    }
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (Index i = 0; i < n; ++i) c += squared_distance(a.support(), i, b.support(), perm[i]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  for (Index i = 0; i < n; ++i) triplets.emplace_back(i, best[i], uniform);
  TransportPlan plan;
  plan.coupling = to_sparse(n, n, triplets);
  plan.cost = best_cost * uniform;
  plan.method = PlanMethod::Oracle;
  plan.marginal_residual = marginal_residual(plan, a, b);
  return plan;
}

double w2_distance(const TransportPlan& plan) {
  if (plan.method == PlanMethod::Entropic) {
    log_warning("W2 from an entropic plan is an upper bound, not the exact distance");
  }
  return std::sqrt(std::max(plan.cost, 0.0));
}

double w2_exact(const DiscreteMeasure& a, const DiscreteMeasure& b, const ExactOptions& options) {
  return w2_distance(solve_exact(a, b, options));
}

}  // namespace wproj
