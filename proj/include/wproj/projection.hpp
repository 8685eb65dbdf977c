#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wproj/measure.hpp"
#include "wproj/ot.hpp"
#include "wproj/tangent.hpp"

namespace wproj {

/// J x J Gram matrix of L2(P0) inner products between (scaled)
/// displacement fields: G[j][k] = scale^2 * sum_i w_i <d_j(x_i), d_k(x_i)>.
struct GramSystem {
  Eigen::MatrixXd matrix;
  double scale = 1.0;

  Index size() const noexcept { return matrix.rows(); }
  double trace() const { return matrix.trace(); }
};

/// Assembles the Gram system. The stabilising scale is
/// 1 / max(1, max_j ||d_j||_{L2(P0)}); it changes G by a positive factor and
/// leaves the minimiser over the simplex untouched.
GramSystem assemble_gram(std::span<const TangentField> fields, const Vector& p0_weights);

/// Same, with an explicit scale (1.0 reproduces the raw inner products).
GramSystem assemble_gram(std::span<const TangentField> fields, const Vector& p0_weights, double scale);

struct QpOptions {
  /// KKT tolerance relative to trace(G).
  double relative_tol = 1e-9;
  long max_iter = 100000;
  /// Curvature (relative to trace) below which the optimal face counts as flat.
  double uniqueness_rel_tol = 1e-9;
};

struct QpResult {
  Vector lambda;
  double objective = 0.0;  // lambda' G lambda
  double kkt_gap = 0.0;    // lambda' G lambda - min_k (G lambda)_k
  bool converged = false;
  bool unique = true;
  long iterations = 0;
};

/// Minimises lambda' G lambda over the probability simplex.
///
/// Fully corrective Frank-Wolfe: each outer step adds the vertex with the
/// smallest gradient (lowest index on ties) and then re-optimises exactly
/// over the face spanned by the active vertices, dropping vertices whose
/// weight reaches zero (the away step). Starts at the barycentre.
QpResult solve_simplex_qp(const GramSystem& gram, const QpOptions& options = {});

enum class SolverKind { Exact, Entropic };

struct ProjectOptions {
  SolverKind solver = SolverKind::Exact;
  ExactOptions exact;
  EntropicOptions entropic;
  QpOptions qp;
  unsigned threads = 1;
  bool keep_plans = false;
};

/// Solve statistics of one transport plan, kept even when the plan is not.
struct PlanSummary {
  double cost = 0.0;
  double marginal_residual = 0.0;
  bool converged = true;
  long iterations = 0;
  double epsilon = 0.0;
};

struct ProjectionResult {
  Vector lambda;
  /// ||sum_j lambda_j (b_j - id)||_{L2(P0)} in the data's own units.
  double objective = 0.0;
  double kkt_gap = 0.0;  // in scaled Gram units
  bool converged = false;  // QP and every transport solve
  bool unique = true;
  DiscreteMeasure projected;
  Vector per_control_w2;  // exact W2(P0, Pj); upper bounds when entropic
  std::string method;
  Index n0 = 0;
  Index controls = 0;
  GramSystem gram;
  std::vector<TangentField> fields;
  std::vector<PlanSummary> plan_summaries;  // empty for project_fields
  std::vector<TransportPlan> plans;  // filled only with keep_plans
  long qp_iterations = 0;
};

/// Lifts every control to the tangent space at p0 through an optimal plan,
/// solves the simplex QP and pushes p0 forward through the optimal
/// combination of barycentric maps.
ProjectionResult project(const DiscreteMeasure& p0, std::span<const DiscreteMeasure> controls,
                         const ProjectOptions& options = {});

/// Same, from precomputed fields (all based at p0).
ProjectionResult project_fields(const DiscreteMeasure& p0, std::vector<TangentField> fields,
                                const QpOptions& options = {});

struct VariationalReport {
  Vector slack;  // <id - f*, b_j - f*>_{L2(P0)} per control
  double max_slack = 0.0;
  bool pass = false;
};

/// Checks the metric-projection inequality of f* = sum_j lambda_j b_j
/// against every vertex b_j, computed from the map values directly.
VariationalReport variational_inequality_check(const DiscreteMeasure& p0, std::span<const TangentField> fields,
                                               const Vector& lambda, double tol);

/// Weights below this are shown as exact zeros in user-facing output.
inline constexpr double kDisplayZero = 1e-6;

}  // namespace wproj
