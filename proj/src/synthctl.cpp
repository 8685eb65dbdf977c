#include "wproj/synthctl.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "wproj/error.hpp"
#include "wproj/log.hpp"
#include "wproj/parallel.hpp"
#include "wproj/rng.hpp"

namespace wproj {

namespace {

// Stream ids under the panel seed.
constexpr std::uint64_t kSubsampleStream = 0;
constexpr std::uint64_t kJitterStream = 1ULL << 32;

Error missing_period(const std::string& unit, const std::string& period) {
  return Error(ErrorCode::MissingPeriodData, "no data for unit '" + unit + "' in period '" + period + "'");
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

const CsvTable& period_table(const UnitPanel& unit, const std::string& period) {
  const auto it = unit.periods.find(period);
  if (it == unit.periods.end()) throw missing_period(unit.unit_id, period);
  return it->second;
}

DiscreteMeasure period_measure(const UnitPanel& unit, const std::string& period) {
  return table_to_measure(period_table(unit, period));
}

}  // namespace

void PanelConfig::validate() const {
  if (treated.empty()) throw Error(ErrorCode::Config, "treated unit is not set");
  if (controls.empty()) throw Error(ErrorCode::Config, "at least one control unit is required");
  std::set<std::string> seen{treated};
  for (const auto& c : controls) {
    if (c == treated) throw Error(ErrorCode::Config, "treated unit '" + c + "' is also a control");
    if (!seen.insert(c).second) throw Error(ErrorCode::Config, "control '" + c + "' is listed twice");
  }
  if (pre_periods.empty()) throw Error(ErrorCode::Config, "at least one pre-period is required");
  const std::set<std::string> pre(pre_periods.begin(), pre_periods.end());
  if (pre.size() != pre_periods.size()) throw Error(ErrorCode::Config, "pre-periods contain duplicates");
  for (const auto& t : post_periods) {
    if (pre.count(t)) throw Error(ErrorCode::Config, "period '" + t + "' is both pre and post");
  }
  if (fit_sample_size && *fit_sample_size < 1) throw Error(ErrorCode::Config, "fit_sample_size must be positive");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw Error(ErrorCode::Config, "jitter must be nonnegative");
}

std::string PanelConfig::path_for(const std::string& unit, const std::string& period) const {
  if (const auto u = files.find(unit); u != files.end()) {
    if (const auto p = u->second.find(period); p != u->second.end()) return p->second;
  }
  if (path_template.empty()) return {};
  return replace_all(replace_all(path_template, "{unit}", unit), "{period}", period);
}

Panel load_panel(const PanelConfig& config, unsigned threads) {
  config.validate();
  Panel panel{config, {}};
  std::vector<std::string> ids{config.treated};
  ids.insert(ids.end(), config.controls.begin(), config.controls.end());
  std::vector<std::string> periods = config.pre_periods;
  periods.insert(periods.end(), config.post_periods.begin(), config.post_periods.end());

  panel.units.resize(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t u) {
    UnitPanel& unit = panel.units[u];
    unit.unit_id = ids[u];
    for (const auto& t : periods) {
      const std::string path = config.path_for(unit.unit_id, t);
      if (path.empty() || !std::filesystem::exists(path)) continue;
      CsvTable table = read_csv(path, config.schema);
      if (unit.variable_names.empty()) {
        unit.variable_names = table.columns;
      } else if (unit.variable_names != table.columns) {
        throw Error(ErrorCode::DimensionMismatch, "'" + path + "' has different columns than other periods");
      }
      unit.periods.emplace(t, std::move(table));
    }
    unit.variable_transforms = config.schema.transforms;
    if (unit.variable_transforms.empty()) unit.variable_transforms.assign(unit.variable_names.size(), Transform::Identity);
  });
  for (const auto& unit : panel.units) {
    if (!unit.variable_names.empty() && unit.variable_names != panel.units.front().variable_names) {
      throw Error(ErrorCode::DimensionMismatch, "unit '" + unit.unit_id + "' has different columns");
    }
  }
  return panel;
}

DiscreteMeasure fit_measure(const Panel& panel, std::size_t index) {
  const PanelConfig& config = panel.config;
  const UnitPanel& unit = panel.units.at(index);
  const bool stacked = config.time_mode == TimeMode::Stacked;

  Index rows = 0;
  Index d = -1;
  bool weighted = false;
  for (const auto& t : config.pre_periods) {
    const CsvTable& table = period_table(unit, t);
    rows += table.samples.rows();
    d = table.samples.cols();
    weighted = weighted || table.weights.has_value();
  }
  const Index dim = d + (stacked ? 1 : 0);
  Matrix samples(rows, dim);
  Vector raw = Vector::Ones(rows);
  Index r = 0;
  for (std::size_t p = 0; p < config.pre_periods.size(); ++p) {
    const CsvTable& table = period_table(unit, config.pre_periods[p]);
    const Index n = table.samples.rows();
    samples.block(r, 0, n, d) = table.samples;
    if (stacked) samples.block(r, d, n, 1).setConstant(static_cast<double>(p));
    if (table.weights) raw.segment(r, n) = *table.weights;
    r += n;
  }

  if (config.fit_sample_size && *config.fit_sample_size < rows) {
    const Index keep = *config.fit_sample_size;
    Rng rng = Rng::stream(config.seed, kSubsampleStream + index);
    std::vector<Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Index{0});
    for (Index k = 0; k < keep; ++k) {
      const auto pick = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(rows - k)));
      std::swap(order[k], order[pick]);
    }
    order.resize(static_cast<std::size_t>(keep));
    std::sort(order.begin(), order.end());
    Matrix sub(keep, dim);
    Vector sub_raw(keep);
    for (Index k = 0; k < keep; ++k) {
      sub.row(k) = samples.row(order[k]);
      sub_raw[k] = raw[order[k]];
    }
    samples = std::move(sub);
    raw = std::move(sub_raw);
  }

  if (config.jitter > 0.0) {
    Rng rng = Rng::stream(config.seed, kJitterStream + index);
    for (Index i = 0; i < samples.rows(); ++i) {
      for (Index k = 0; k < d; ++k) samples(i, k) += config.jitter * (rng.uniform() - 0.5);
    }
  }

  if (samples.rows() < dim + 1) {
    throw Error(ErrorCode::InsufficientSamples, "unit '" + unit.unit_id + "' has " + std::to_string(samples.rows()) +
                                                    " pre-period samples; at least " + std::to_string(dim + 1) +
                                                    " are needed");
  }
  return weighted ? from_weighted_samples(samples, raw) : from_samples(samples);
}

ProjectionResult fit(const Panel& panel, const ProjectOptions& options) {
  std::vector<std::optional<DiscreteMeasure>> built(panel.units.size());
  parallel_for(panel.units.size(), options.threads, [&](std::size_t u) { built[u] = fit_measure(panel, u); });
  std::vector<DiscreteMeasure> controls;
  controls.reserve(panel.control_count());
  for (std::size_t u = 1; u < built.size(); ++u) controls.push_back(std::move(*built[u]));
  log_info("fitting on " + std::to_string(built.front()->size()) + " treated atoms and " +
           std::to_string(controls.size()) + " controls");
  return project(*built.front(), controls, options);
}

VariableCdf compare_cdfs(const DiscreteMeasure& actual, const DiscreteMeasure& counterfactual, Index k) {
  if (k < 0 || k >= actual.dim() || k >= counterfactual.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "coordinate index out of range");
  }
  auto sorted = [k](const DiscreteMeasure& m) {
    std::vector<std::pair<double, double>> v(static_cast<std::size_t>(m.size()));
    for (Index i = 0; i < m.size(); ++i) v[i] = {m.support()(i, k), m.weights()[i]};
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = sorted(actual);
  const auto c = sorted(counterfactual);
  std::vector<double> grid;
  grid.reserve(a.size() + c.size());
  for (const auto& p : a) grid.push_back(p.first);
  for (const auto& p : c) grid.push_back(p.first);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  VariableCdf out;
  const auto g = static_cast<Index>(grid.size());
  out.grid = Eigen::Map<const Vector>(grid.data(), g);
  out.actual.resize(g);
  out.counterfactual.resize(g);
  std::size_t ia = 0;
  std::size_t ic = 0;
  double fa = 0.0;
  double fc = 0.0;
  for (Index q = 0; q < g; ++q) {
    while (ia < a.size() && a[ia].first <= grid[q]) fa += a[ia++].second;
    while (ic < c.size() && c[ic].first <= grid[q]) fc += c[ic++].second;
    out.actual[q] = fa;
    out.counterfactual[q] = fc;
    out.ks = std::max(out.ks, std::abs(fa - fc));
  }
  // Absorb summation drift so the grid ends exactly at one.
  if (g > 0) {
    out.actual[g - 1] = 1.0;
    out.counterfactual[g - 1] = 1.0;
  }
  return out;
}

CounterfactualPeriod counterfactual(const Panel& panel, const Vector& lambda, const std::string& period,
                                    const CounterfactualOptions& options) {
  if (lambda.size() != static_cast<Index>(panel.control_count())) {
    throw Error(ErrorCode::DimensionMismatch, "lambda has " + std::to_string(lambda.size()) + " entries for " +
                                                  std::to_string(panel.control_count()) + " controls");
  }
  require_simplex(lambda, kSimplexTol, "lambda");
  std::vector<DiscreteMeasure> parts;
  parts.reserve(panel.control_count());
  for (std::size_t j = 0; j < panel.control_count(); ++j) {
    parts.push_back(period_measure(panel.control(j), period));
  }
  DiscreteMeasure cf = pool(parts, lambda);
  const Index d = cf.dim();

  std::optional<DiscreteMeasure> actual;
  if (panel.treated().periods.count(period)) {
    actual = period_measure(panel.treated(), period);
  } else if (options.require_actual) {
    throw missing_period(panel.treated().unit_id, period);
  }

  CounterfactualPeriod out{period, cf, actual, cf.mean().transpose(), Vector::Constant(d, std::nan("")),
                           Vector::Constant(d, std::nan("")), {}, std::nullopt};
  if (actual) {
    out.actual_mean = actual->mean().transpose();
    out.mean_difference = out.actual_mean - out.counterfactual_mean;
    for (Index k = 0; k < d; ++k) out.cdfs.push_back(compare_cdfs(*actual, cf, k));
    const auto pairs = static_cast<std::size_t>(actual->size()) * static_cast<std::size_t>(cf.size());
    if (options.w2_budget > 0 && pairs <= options.w2_budget) out.w2 = w2_exact(*actual, cf, options.exact);
  }
  return out;
}

std::vector<PretrendEntry> pretrend_check(const Panel& panel, const Vector& lambda, const PretrendOptions& options) {
  CounterfactualOptions cf_options = options.counterfactual;
  cf_options.require_actual = true;
  std::vector<PretrendEntry> report;
  for (const auto& t : panel.config.pre_periods) {
    const CounterfactualPeriod cf = counterfactual(panel, lambda, t, cf_options);
    PretrendEntry entry;
    entry.period = t;
    entry.mean_gap = cf.mean_difference;
    const Index d = entry.mean_gap.size();
    entry.standardized_gap.resize(d);
    entry.ks.resize(d);
    const Matrix centred = cf.actual->support().rowwise() - cf.actual->mean();
    for (Index k = 0; k < d; ++k) {
      double var = 0.0;
      for (Index i = 0; i < centred.rows(); ++i) var += cf.actual->weights()[i] * centred(i, k) * centred(i, k);
      const double sd = std::sqrt(var);
      const double gap = entry.mean_gap[k];
      entry.standardized_gap[k] = sd > 0.0 ? gap / sd : (gap == 0.0 ? 0.0 : std::copysign(
                                                                                   std::numeric_limits<double>::infinity(), gap));
      entry.ks[k] = cf.cdfs[k].ks;
      entry.flagged = entry.flagged || std::abs(entry.standardized_gap[k]) > options.flag_threshold;
    }
    entry.w2 = cf.w2;
    report.push_back(std::move(entry));
  }
  return report;
}

}  // namespace wproj
