#include "wproj/projection.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "wproj/error.hpp"
#include "wproj/parallel.hpp"

namespace wproj {

namespace {

TransportPlan solve_pair(const DiscreteMeasure& p0, const DiscreteMeasure& pj, const ProjectOptions& options) {
  if (options.solver == SolverKind::Exact) return solve_exact(p0, pj, options.exact);
  return solve_entropic(p0, pj, options.entropic);
}

}  // namespace

ProjectionResult project_fields(const DiscreteMeasure& p0, std::vector<TangentField> fields,
                                const QpOptions& options) {
  if (fields.empty()) throw Error(ErrorCode::EmptyInput, "no controls");
  for (const auto& f : fields) {
    if (!f.base || !f.base->identical_to(p0)) {
      throw Error(ErrorCode::BaseMismatch, "field is based at a different measure");
    }
  }
  GramSystem gram = assemble_gram(fields, p0.weights());
  const QpResult qp = solve_simplex_qp(gram, options);
  DiscreteMeasure projected = hull_point(p0, fields, qp.lambda);
  const double objective = std::sqrt(std::max(qp.objective, 0.0)) / gram.scale;
  const auto count = static_cast<Index>(fields.size());
  return ProjectionResult{
      .lambda = qp.lambda,
      .objective = objective,
      .kkt_gap = qp.kkt_gap,
      .converged = qp.converged,
      .unique = qp.unique,
      .projected = std::move(projected),
      .per_control_w2 = Vector::Constant(count, std::nan("")),
      .method = std::string(to_string(fields.front().source_plan_method)),
      .n0 = p0.size(),
      .controls = count,
      .gram = std::move(gram),
      .fields = std::move(fields),
      .plan_summaries = {},
      .plans = {},
      .qp_iterations = qp.iterations,
  };
}

ProjectionResult project(const DiscreteMeasure& p0, std::span<const DiscreteMeasure> controls,
                         const ProjectOptions& options) {
  if (controls.empty()) throw Error(ErrorCode::EmptyInput, "no controls");
  for (const auto& c : controls) {
    if (c.dim() != p0.dim()) throw Error(ErrorCode::DimensionMismatch, "control dimension differs from target");
  }
  auto base = std::make_shared<const DiscreteMeasure>(p0);
  const std::size_t count = controls.size();
  std::vector<std::optional<TangentField>> fields(count);
  std::vector<std::optional<TransportPlan>> plans(count);
  std::vector<PlanSummary> summaries(count);
  Vector w2(static_cast<Index>(count));

  parallel_for(count, options.threads, [&](std::size_t j) {
    try {
      TransportPlan plan = solve_pair(*base, controls[j], options);
      w2[static_cast<Index>(j)] = std::sqrt(std::max(plan.cost, 0.0));
      summaries[j] = {plan.cost, plan.marginal_residual, plan.converged, plan.iterations, plan.epsilon};
      fields[j] = barycentric_projection(plan, base, controls[j]);
      if (options.keep_plans) plans[j] = std::move(plan);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::PartialFailure, "control " + std::to_string(j) + ": " + e.what());
    }
  });

  std::vector<TangentField> lifted;
  lifted.reserve(count);
  for (auto& f : fields) lifted.push_back(std::move(*f));
  ProjectionResult result = project_fields(*base, std::move(lifted), options.qp);
  result.per_control_w2 = w2;
  for (const auto& s : summaries) result.converged = result.converged && s.converged;
  result.plan_summaries = std::move(summaries);
  result.method = options.solver == SolverKind::Exact ? "exact" : "entropic";
  if (options.keep_plans) {
    for (auto& p : plans) result.plans.push_back(std::move(*p));
  }
  return result;
}

VariationalReport variational_inequality_check(const DiscreteMeasure& p0, std::span<const TangentField> fields,
                                               const Vector& lambda, double tol) {
  require_simplex(lambda, 1e-8, "lambda");
  if (static_cast<Index>(fields.size()) != lambda.size()) {
    throw Error(ErrorCode::BadWeights, "weight count differs from field count");
  }
  Matrix combined = Matrix::Zero(p0.size(), p0.dim());
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (!fields[j].base || !fields[j].base->identical_to(p0)) {
      throw Error(ErrorCode::BaseMismatch, "field is based at a different measure");
    }
    combined += lambda[static_cast<Index>(j)] * fields[j].map_values;
  }
  const Matrix to_identity = p0.support() - combined;
  VariationalReport report;
  report.slack.resize(lambda.size());
  for (std::size_t j = 0; j < fields.size(); ++j) {
    report.slack[static_cast<Index>(j)] = l2_inner(p0.weights(), to_identity, fields[j].map_values - combined);
  }
  report.max_slack = report.slack.maxCoeff();
  report.pass = report.max_slack <= tol;
  return report;
}

}  // namespace wproj
