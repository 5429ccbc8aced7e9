#pragma once

#include "toolsmith/scoring.hpp"
#include "toolsmith/workspace.hpp"

#include <optional>
#include <set>

namespace toolsmith {

struct RunMetrics {
  std::string task_id;
  std::string model;  // grouping key, usually the backend id
  RunMode mode = RunMode::ZeroShot;
  int run = 1;
  double time_min = 0;
  double cost_usd = 0;
  int iterations = 0;
  RubricScore score;
};

// Throws InvalidArgument for negative metrics.
void validate_run(const RunMetrics& r);

struct Stat {
  size_t n = 0;
  double mean = 0;
  std::optional<double> std;  // sample (n - 1) deviation; absent for n == 1
};

// Throws EmptyGroup.
Stat summarize(const std::vector<double>& values);

struct GroupRow {
  std::string model;
  RunMode mode = RunMode::ZeroShot;
  Stat time;
  Stat cost;
  Stat score;  // combined score
  Stat iterations;
};

// One row per (model, mode), models in order of first appearance.
std::vector<GroupRow> aggregate(const std::vector<RunMetrics>& runs);

// 100 * (tr - zs) / zs. Throws ZeroBaseline.
double delta_pct(double tr, double zs);

struct RadarPoint {
  std::string label;
  std::map<std::string, double> values;  // axis -> raw value
};

/// Rescales every axis to [0.1, 0.9] independently. Axes listed in
/// `lower_is_better` are inverted first, so the best point always maps to
/// 0.9. A constant axis maps to 0.5 and adds a warning.
std::vector<RadarPoint> normalize_radar(const std::vector<RadarPoint>& points,
                                        const std::set<std::string>& lower_is_better = {"time", "cost"},
                                        std::vector<std::string>* warnings = nullptr);

// Half away from zero, then fixed decimals.
std::string format_fixed(double v, int decimals);

enum class TableFormat { Markdown, Csv };

/// Per-model table: Time, Cost and Score groups with ZS / TR / Δ% / EO
/// columns (no Δ% for scores). Δ% cells are empty unless both ZS and TR
/// are present. 1 dp for minutes and percentages, 2 dp for USD.
std::string emit_tables(const std::vector<GroupRow>& rows, TableFormat format);

// "label,<axis>,..." with 3 decimals, axes sorted by name.
std::string emit_radar_csv(const std::vector<RadarPoint>& points);

}  // namespace toolsmith
