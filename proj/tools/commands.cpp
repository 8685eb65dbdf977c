#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "wproj/error.hpp"
#include "wproj/io.hpp"
#include "wproj/log.hpp"
#include "wproj/ot.hpp"
#include "wproj/rng.hpp"
#include "wproj/simulate.hpp"
#include "wproj/synthctl.hpp"

namespace wproj::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << value.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

/// Keeps file names portable: anything outside [A-Za-z0-9._-] becomes '_'.
std::string file_token(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const Vector& v) {
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(finite_or_null(v[k]));
  return out;
}

Transform parse_transform(const std::string& s) { return s == "log" ? Transform::Log : Transform::Identity; }

CsvSchema csv_schema(const json& source) {
  CsvSchema schema;
  if (source.contains("columns")) schema.columns = source["columns"].get<std::vector<std::string>>();
  if (source.contains("transforms")) {
    for (const auto& t : source["transforms"]) schema.transforms.push_back(parse_transform(t.get<std::string>()));
    if (schema.transforms.size() != schema.columns.size()) {
      throw Error(ErrorCode::Config, "transforms need an explicit columns list of the same length");
    }
  }
  if (source.contains("weight_column")) schema.weight_column = source["weight_column"].get<std::string>();
  return schema;
}

CovarianceSpec covariance_spec(const json& cov, Index dim) {
  CovarianceSpec spec;
  spec.variance = cov["variance"].get<double>();
  spec.covariance = cov["covariance"].get<double>();
  if (cov.contains("matrix")) {
    const auto& rows = cov["matrix"];
    if (static_cast<Index>(rows.size()) != dim) throw Error(ErrorCode::Config, "/cov/matrix must have dim rows");
    Eigen::MatrixXd m(dim, dim);
    for (Index r = 0; r < dim; ++r) {
      if (static_cast<Index>(rows[r].size()) != dim) throw Error(ErrorCode::Config, "/cov/matrix must be square");
      for (Index c = 0; c < dim; ++c) m(r, c) = rows[r][c].get<double>();
    }
    spec.matrix = std::move(m);
  }
  return spec;
}

json weights_json(const ProjectionResult& r, std::uint64_t seed, const std::vector<std::string>& names) {
  return json{
      {"lambda", to_json(r.lambda)},
      {"objective", r.objective},
      {"kkt_gap", r.kkt_gap},
      {"unique", r.unique},
      {"converged", r.converged},
      {"per_control_w2", to_json(r.per_control_w2)},
      {"n0", r.n0},
      {"J", r.controls},
      {"method", r.method},
      {"seed", seed},
      {"controls", names},
  };
}

json diagnostics_json(const std::string& command, const ProjectionResult& r, double runtime, unsigned threads,
                      const std::vector<std::string>& names) {
  json plans = json::array();
  for (std::size_t j = 0; j < r.plan_summaries.size(); ++j) {
    const auto& s = r.plan_summaries[j];
    plans.push_back({{"control", names.at(j)},
                     {"cost", s.cost},
                     {"marginal_residual", s.marginal_residual},
                     {"converged", s.converged},
                     {"iterations", s.iterations},
                     {"epsilon", s.epsilon}});
  }
  json gram = json::array();
  for (Index a = 0; a < r.gram.matrix.rows(); ++a) {
    json row = json::array();
    for (Index b = 0; b < r.gram.matrix.cols(); ++b) row.push_back(r.gram.matrix(a, b));
    gram.push_back(std::move(row));
  }
  return json{{"command", command},         {"runtime_seconds", runtime}, {"qp_iterations", r.qp_iterations},
              {"threads", threads},         {"gram", gram},               {"gram_scale", r.gram.scale},
              {"plans", plans}};
}

/// Sparse JSON dump of every kept plan: (row, col, mass) triples plus metadata.
void write_plans(RunDirectory& dir, const ProjectionResult& r) {
  for (std::size_t j = 0; j < r.plans.size(); ++j) {
    const TransportPlan& plan = r.plans[j];
    json entries = json::array();
    plan.for_each_nonzero([&](Index i, Index k, double m) { entries.push_back(json::array({i, k, m})); });
    write_json(dir.file("plan_" + std::to_string(j + 1) + ".json"),
               json{{"rows", plan.rows()},
                    {"cols", plan.cols()},
                    {"method", std::string(to_string(plan.method))},
                    {"epsilon", plan.epsilon},
                    {"cost", plan.cost},
                    {"marginal_residual", plan.marginal_residual},
                    {"converged", plan.converged},
                    {"entries", std::move(entries)}});
  }
}

/// Common artifacts of every projection command.
void write_projection(RunDirectory& dir, const CommandContext& ctx, const std::string& command,
                      const ProjectionResult& r, const std::vector<std::string>& control_names,
                      const std::vector<std::string>& variable_names, double runtime, json extra_diagnostics = {}) {
  write_json(dir.file("weights.json"), weights_json(r, ctx.config["seed"].get<std::uint64_t>(), control_names));
  json diag = diagnostics_json(command, r, runtime, ctx.threads, control_names);
  if (!extra_diagnostics.is_null()) diag.update(extra_diagnostics);
  write_json(dir.file("diagnostics.json"), diag);
  write_measure_csv(dir.file("projected.csv").string(), r.projected, variable_names);
  write_plans(dir, r);
}

void print_lambda(std::ostream* out, const ProjectionResult& r, const std::vector<std::string>& names) {
  if (!out) return;
  *out << std::fixed << std::setprecision(4);
  for (Index j = 0; j < r.lambda.size(); ++j) {
    const double shown = r.lambda[j] < kDisplayZero ? 0.0 : r.lambda[j];
    *out << "lambda[" << names[j] << "] = " << shown << '\n';
  }
  *out << std::defaultfloat;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t count) {
  std::vector<std::string> out;
  for (std::size_t j = 1; j <= count; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

/// Per-coordinate means: target, each control, sum_j lambda_j mean_j and the
/// projected measure.
void write_means_table(const fs::path& path, const DiscreteMeasure& target, std::span<const DiscreteMeasure> controls,
                       const ProjectionResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out << "coordinate,target";
  for (std::size_t j = 0; j < controls.size(); ++j) out << ",control_" << j + 1;
  out << ",weighted,projected\n" << std::setprecision(17);
  const Eigen::RowVectorXd t = target.mean();
  const Eigen::RowVectorXd p = r.projected.mean();
  std::vector<Eigen::RowVectorXd> c;
  Eigen::RowVectorXd weighted = Eigen::RowVectorXd::Zero(target.dim());
  for (std::size_t j = 0; j < controls.size(); ++j) {
    c.push_back(controls[j].mean());
    weighted += r.lambda[static_cast<Index>(j)] * c.back();
  }
  for (Index k = 0; k < target.dim(); ++k) {
    out << k + 1 << ',' << t[k];
    for (const auto& m : c) out << ',' << m[k];
    out << ',' << weighted[k] << ',' << p[k] << '\n';
  }
}

bool run_scenario(const CommandContext& ctx, RunDirectory& dir, const std::string& command, ScenarioSamples samples) {
  const auto start = Clock::now();
  const DiscreteMeasure target = from_samples(samples.target);
  std::vector<DiscreteMeasure> controls;
  for (const auto& m : samples.controls) controls.push_back(from_samples(m));
  samples = {};
  ProjectOptions options = project_options(ctx.config, ctx.threads);
  const ProjectionResult r = project(target, controls, options);
  const auto names = numbered("control_", controls.size());
  write_projection(dir, ctx, command, r, names, numbered("x", static_cast<std::size_t>(target.dim())),
                   seconds_since(start));
  write_means_table(dir.file("means.csv"), target, controls, r);
  print_lambda(ctx.out, r, names);
  return r.converged;
}

}  // namespace

std::string CommandContext::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (base_dir / p).string();
}

ProjectOptions project_options(const json& config, unsigned threads) {
  ProjectOptions options;
  const json& s = config["solver"];
  options.solver = s["method"] == "entropic" ? SolverKind::Entropic : SolverKind::Exact;
  options.exact.dense_arc_limit = s["dense_arc_limit"].get<std::size_t>();
  options.exact.size_budget = s["size_budget"].get<std::size_t>();
  options.entropic.size_budget = options.exact.size_budget;
  if (s.contains("epsilon")) options.entropic.epsilon = s["epsilon"].get<double>();
  options.entropic.tol = s["tol"].get<double>();
  options.entropic.max_iter = s["max_iter"].get<long>();
  options.entropic.epsilon_scaling = s["epsilon_scaling"].get<bool>();
  options.qp.relative_tol = config["qp"]["relative_tol"].get<double>();
  options.qp.max_iter = config["qp"]["max_iter"].get<long>();
  options.threads = threads;
  options.keep_plans = config["dump_plans"].get<bool>();
  return options;
}

bool cmd_project(const CommandContext& ctx, RunDirectory& dir) {
  const auto start = Clock::now();
  const json& c = ctx.config;
  json dropped = json::object();
  auto load = [&](const json& source) {
    const std::string path = ctx.resolve(source["csv"].get<std::string>());
    CsvTable table = read_csv(path, csv_schema(source));
    dropped[path] = table.dropped_missing + table.dropped_nonpositive;
    return table;
  };
  const CsvTable target_table = load(c["target"]);
  const DiscreteMeasure target = table_to_measure(target_table);
  std::vector<DiscreteMeasure> controls;
  std::vector<std::string> names;
  for (const auto& source : c["controls"]) {
    const CsvTable table = load(source);
    if (table.columns != target_table.columns) {
      throw Error(ErrorCode::DimensionMismatch, "control '" + source["csv"].get<std::string>() +
                                                    "' has different columns than the target");
    }
    controls.push_back(table_to_measure(table));
    names.push_back(fs::path(source["csv"].get<std::string>()).stem().string());
  }
  const ProjectionResult r = project(target, controls, project_options(c, ctx.threads));
  write_projection(dir, ctx, "project", r, names, target_table.columns, seconds_since(start),
                   json{{"dropped_rows", dropped}});
  print_lambda(ctx.out, r, names);
  return r.converged;
}

bool cmd_simulate_gaussian(const CommandContext& ctx, RunDirectory& dir) {
  const json& c = ctx.config;
  GaussianScenario scenario;
  scenario.dim = c["dim"].get<Index>();
  scenario.means = c["means"].get<std::vector<double>>();
  scenario.cov = covariance_spec(c["cov"], scenario.dim);
  scenario.n = c["n"].get<Index>();
  scenario.seed = c["seed"].get<std::uint64_t>();
  return run_scenario(ctx, dir, "simulate-gaussian", sample_gaussian(scenario));
}

bool cmd_simulate_mixture(const CommandContext& ctx, RunDirectory& dir) {
  const json& c = ctx.config;
  MixtureScenario scenario;
  scenario.dim = c["dim"].get<Index>();
  scenario.component_means = c["component_means"].get<std::vector<double>>();
  scenario.coefficients = c["coefficients"].get<std::vector<std::vector<double>>>();
  for (std::size_t r = 0; r < scenario.coefficients.size(); ++r) {
    const auto& row = scenario.coefficients[r];
    if (row.size() != scenario.component_means.size()) {
      throw Error(ErrorCode::Config, "/coefficients/" + std::to_string(r) + " needs one entry per component");
    }
    double total = 0.0;
    for (const double p : row) total += p;
    if (std::abs(total - 1.0) > kSimplexTol) {
      throw Error(ErrorCode::Config, "/coefficients/" + std::to_string(r) + " must sum to 1");
    }
  }
  scenario.labels = c["labels"] == "stratified" ? LabelSampling::Stratified : LabelSampling::Random;
  scenario.cov = covariance_spec(c["cov"], scenario.dim);
  scenario.n = c["n"].get<Index>();
  scenario.seed = c["seed"].get<std::uint64_t>();
  return run_scenario(ctx, dir, "simulate-mixture", sample_mixture(scenario));
}

bool cmd_image_project(const CommandContext& ctx, RunDirectory& dir) {
  const auto start = Clock::now();
  const json& c = ctx.config;
  const int factor = c["downsample"].get<int>();
  const Image target_image = downsample(read_image(ctx.resolve(c["target_image"].get<std::string>())), factor);
  const DiscreteMeasure target = image_to_measure(target_image);
  std::vector<DiscreteMeasure> controls;
  std::vector<std::string> names;
  for (const auto& path : c["control_images"]) {
    controls.push_back(image_to_measure(downsample(read_image(ctx.resolve(path.get<std::string>())), factor)));
    names.push_back(fs::path(path.get<std::string>()).stem().string());
  }
  const ProjectionResult r = project(target, controls, project_options(c, ctx.threads));
  write_projection(dir, ctx, "image-project", r, names, {"row", "col"}, seconds_since(start));
  Image rendered = render_measure(r.projected, target_image.rows(), target_image.cols());
  const double peak = rendered.maxCoeff();
  if (peak > 0.0) rendered /= peak;
  write_image(dir.file("projected.pgm").string(), rendered, ImageEncoding::Pgm16);
  write_image(dir.file("projected.png").string(), rendered, ImageEncoding::Png8);
  print_lambda(ctx.out, r, names);
  return r.converged;
}

bool cmd_synth(const CommandContext& ctx, RunDirectory& dir) {
  const auto start = Clock::now();
  const json& c = ctx.config;
  auto period_label = [](const json& p) { return p.is_string() ? p.get<std::string>() : p.dump(); };
  PanelConfig panel_config;
  panel_config.treated = c["treated"].get<std::string>();
  panel_config.controls = c["controls"].get<std::vector<std::string>>();
  for (const auto& p : c["pre_periods"]) panel_config.pre_periods.push_back(period_label(p));
  for (const auto& p : c["post_periods"]) panel_config.post_periods.push_back(period_label(p));
  for (const auto& v : c["variables"]) {
    panel_config.schema.columns.push_back(v["name"].get<std::string>());
    panel_config.schema.transforms.push_back(parse_transform(v["transform"].get<std::string>()));
  }
  if (c.contains("weight_column")) panel_config.schema.weight_column = c["weight_column"].get<std::string>();
  if (c.contains("path_template")) panel_config.path_template = ctx.resolve(c["path_template"].get<std::string>());
  if (c.contains("files")) {
    for (const auto& [unit, periods] : c["files"].items()) {
      for (const auto& [period, path] : periods.items()) {
        panel_config.files[unit][period] = ctx.resolve(path.get<std::string>());
      }
    }
  }
  if (c.contains("fit_sample_size")) panel_config.fit_sample_size = c["fit_sample_size"].get<Index>();
  panel_config.seed = c["seed"].get<std::uint64_t>();
  panel_config.time_mode = c["time_mode"] == "stacked" ? TimeMode::Stacked : TimeMode::Pooled;
  panel_config.jitter = c["jitter"].get<double>();

  const Panel panel = load_panel(panel_config, ctx.threads);
  const ProjectOptions options = project_options(c, ctx.threads);
  const ProjectionResult r = fit(panel, options);
  const auto& variables = panel.treated().variable_names;
  std::vector<std::string> fit_variables = variables;
  if (panel_config.time_mode == TimeMode::Stacked) fit_variables.push_back("period_index");

  CounterfactualOptions cf_options;
  cf_options.w2_budget = c["w2_budget"].get<std::size_t>();
  cf_options.exact = options.exact;
  PretrendOptions pre_options;
  pre_options.counterfactual = cf_options;
  pre_options.flag_threshold = c["flag_threshold"].get<double>();
  const auto pretrend = pretrend_check(panel, r.lambda, pre_options);

  json periods = json::array();
  for (const auto& e : pretrend) {
    json entry{{"period", e.period},
               {"mean_gap", to_json(e.mean_gap)},
               {"standardized_gap", to_json(e.standardized_gap)},
               {"ks", to_json(e.ks)},
               {"flagged", e.flagged}};
    if (e.w2) entry["w2"] = *e.w2;
    periods.push_back(std::move(entry));
  }
  write_json(dir.file("pretrend.json"),
             json{{"variables", variables}, {"flag_threshold", pre_options.flag_threshold}, {"periods", periods}});

  std::ofstream means(dir.file("means.csv"), std::ios::binary);
  means << "period,phase,variable,actual,counterfactual,difference\n" << std::setprecision(17);
  std::vector<std::pair<std::string, std::string>> all_periods;
  for (const auto& t : panel_config.pre_periods) all_periods.emplace_back(t, "pre");
  for (const auto& t : panel_config.post_periods) all_periods.emplace_back(t, "post");
  for (const auto& [t, phase] : all_periods) {
    const CounterfactualPeriod cf = counterfactual(panel, r.lambda, t, cf_options);
    write_measure_csv(dir.file("counterfactual_" + file_token(t) + ".csv").string(), cf.counterfactual, variables);
    for (std::size_t k = 0; k < variables.size(); ++k) {
      means << t << ',' << phase << ',' << variables[k] << ',' << cf.actual_mean[k] << ','
            << cf.counterfactual_mean[k] << ',' << cf.mean_difference[k] << '\n';
      if (cf.cdfs.empty()) continue;
      const VariableCdf& cdf = cf.cdfs[k];
      std::ofstream out(dir.file("cdf_" + file_token(variables[k]) + "_" + file_token(t) + ".csv"), std::ios::binary);
      out << "value,F_actual,F_counterfactual\n" << std::setprecision(17);
      for (Index q = 0; q < cdf.grid.size(); ++q) {
        out << cdf.grid[q] << ',' << cdf.actual[q] << ',' << cdf.counterfactual[q] << '\n';
      }
      if (!out) throw Error(ErrorCode::Io, "cannot write CDF file");
    }
  }
  if (!means) throw Error(ErrorCode::Io, "cannot write means.csv");

  write_json(dir.file("weights.json"), weights_json(r, panel_config.seed, panel_config.controls));
  write_json(dir.file("diagnostics.json"),
             diagnostics_json("synth", r, seconds_since(start), ctx.threads, panel_config.controls));
  write_measure_csv(dir.file("projected.csv").string(), r.projected, fit_variables);
  write_plans(dir, r);
  print_lambda(ctx.out, r, panel_config.controls);
  for (const auto& e : pretrend) {
    if (e.flagged) log_warning("pre-period '" + e.period + "' is flagged: counterfactual means differ from actual");
  }
  return r.converged;
}

bool cmd_oracle_check(const CommandContext& ctx, RunDirectory& dir) {
  const auto start = Clock::now();
  const json& c = ctx.config;
  const long instances = c["instances"].get<long>();
  const auto max_n = c["max_n"].get<std::uint64_t>();
  const auto max_d = c["max_d"].get<std::uint64_t>();
  const double tol = c["tolerance"].get<double>();
  Rng rng(c["seed"].get<std::uint64_t>());
  ExactOptions exact = project_options(c, ctx.threads).exact;
  long failures = 0;
  double worst = 0.0;
  for (long k = 0; k < instances; ++k) {
    const auto n = static_cast<Index>(1 + rng.below(max_n));
    const auto d = static_cast<Index>(1 + rng.below(max_d));
    const DiscreteMeasure a = from_samples(standard_normal(rng, n, d));
    const DiscreteMeasure b = from_samples(standard_normal(rng, n, d));
    const double want = brute_force_assignment(a, b).cost;
    const double got = solve_exact(a, b, exact).cost;
    const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
    worst = std::max(worst, rel);
    if (!(rel <= tol)) ++failures;
  }
  write_json(dir.file("oracle.json"), json{{"instances", instances},
                                           {"failures", failures},
                                           {"max_relative_error", worst},
                                           {"runtime_seconds", seconds_since(start)}});
  if (ctx.out) *ctx.out << instances - failures << " of " << instances << " instances match the permutation oracle\n";
  return failures == 0;
}

}  // namespace wproj::cli
