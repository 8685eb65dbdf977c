#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wproj/io.hpp"
#include "wproj/measure.hpp"
#include "wproj/projection.hpp"

namespace wproj {

/// Outcome samples of one unit, keyed by period label.
struct UnitPanel {
  std::string unit_id;
  std::map<std::string, CsvTable> periods;
  std::vector<std::string> variable_names;
  std::vector<Transform> variable_transforms;
};

/// How pre-period samples are combined into one measure per unit.
/// Stacked appends the period's position in `pre_periods` as a coordinate.
enum class TimeMode { Pooled, Stacked };

struct PanelConfig {
  std::string treated;
  std::vector<std::string> controls;
  std::vector<std::string> pre_periods;
  std::vector<std::string> post_periods;
  CsvSchema schema;
  /// File for (unit, period): an explicit entry wins over the template,
  /// in which "{unit}" and "{period}" are substituted.
  std::string path_template;
  std::map<std::string, std::map<std::string, std::string>> files;
  std::optional<Index> fit_sample_size;
  std::uint64_t seed = 0;
  TimeMode time_mode = TimeMode::Pooled;
  /// Width of optional uniform jitter added to fit samples (0 disables it).
  double jitter = 0.0;

  /// Throws Config on overlapping periods, empty controls or a treated
  /// unit listed among the controls.
  void validate() const;
  std::string path_for(const std::string& unit, const std::string& period) const;
};

/// Loaded panel: the treated unit first, then the controls in order.
struct Panel {
  PanelConfig config;
  std::vector<UnitPanel> units;

  const UnitPanel& treated() const { return units.front(); }
  const UnitPanel& control(std::size_t j) const { return units.at(j + 1); }
  std::size_t control_count() const { return units.size() - 1; }
};

/// Reads every (unit, period) file that exists. Absent files are left out
/// and reported by the operation that needs them.
Panel load_panel(const PanelConfig& config, unsigned threads = 1);

/// Pooled (or stacked) pre-period fit measure of unit `index` (0 = treated).
DiscreteMeasure fit_measure(const Panel& panel, std::size_t index);

/// Pools pre-period samples per unit and projects treated onto controls.
/// Throws MissingPeriodData or InsufficientSamples.
ProjectionResult fit(const Panel& panel, const ProjectOptions& options = {});

struct VariableCdf {
  Vector grid;  // sorted union of both measures' values
  Vector actual;
  Vector counterfactual;
  double ks = 0.0;  // sup |actual - counterfactual| over the grid
};

struct CounterfactualPeriod {
  std::string period;
  DiscreteMeasure counterfactual;
  std::optional<DiscreteMeasure> actual;  // absent when the treated file is
  Vector counterfactual_mean;
  Vector actual_mean;      // NaN without actual data
  Vector mean_difference;  // actual - counterfactual
  std::vector<VariableCdf> cdfs;
  std::optional<double> w2;
};

struct CounterfactualOptions {
  /// W2(actual, counterfactual) is computed when n_actual * n_cf is at most
  /// this; 0 disables it.
  std::size_t w2_budget = 50'000'000;
  ExactOptions exact;
  /// Treated data is required (pre-trend checks) or optional (post periods).
  bool require_actual = false;
};

/// Mixture sum_j lambda_j * control_j(t). Throws MissingPeriodData.
CounterfactualPeriod counterfactual(const Panel& panel, const Vector& lambda, const std::string& period,
                                    const CounterfactualOptions& options = {});

/// CDFs of two measures along coordinate `k` on their merged atom grid.
VariableCdf compare_cdfs(const DiscreteMeasure& actual, const DiscreteMeasure& counterfactual, Index k);

struct PretrendEntry {
  std::string period;
  Vector mean_gap;        // actual - counterfactual
  Vector standardized_gap;  // mean_gap / sd of the actual variable
  Vector ks;
  std::optional<double> w2;
  bool flagged = false;
};

struct PretrendOptions {
  CounterfactualOptions counterfactual;
  /// A period is flagged when any |standardized gap| exceeds this.
  double flag_threshold = 0.25;
};

std::vector<PretrendEntry> pretrend_check(const Panel& panel, const Vector& lambda,
                                          const PretrendOptions& options = {});

}  // namespace wproj
