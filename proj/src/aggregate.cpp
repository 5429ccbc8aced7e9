#include "toolsmith/aggregate.hpp"

#include "toolsmith/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace toolsmith {

void validate_run(const RunMetrics& r) {
  if (r.time_min < 0 || r.cost_usd < 0 || r.iterations < 0 || r.run < 0) {
    throw Error(ErrorCode::InvalidArgument, "run metrics must be nonnegative (" + r.model + " run " + std::to_string(r.run) + ")");
  }
}

Stat summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyGroup, "no runs in group");
  Stat s;
  s.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n >= 2) {
    double sq = 0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(s.n - 1));
  }
  return s;
}

std::vector<GroupRow> aggregate(const std::vector<RunMetrics>& runs) {
  std::vector<std::string> models;
  std::map<std::pair<std::string, RunMode>, std::vector<const RunMetrics*>> groups;
  for (const auto& r : runs) {
    validate_run(r);
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    groups[{r.model, r.mode}].push_back(&r);
  }
  std::vector<GroupRow> rows;
  for (const auto& model : models) {
    for (RunMode mode : {RunMode::ZeroShot, RunMode::ToolReuse, RunMode::EvaluatorOnly}) {
      const auto it = groups.find({model, mode});
      if (it == groups.end()) continue;
      std::vector<double> t, c, s, n;
      for (const auto* r : it->second) {
        t.push_back(r->time_min);
        c.push_back(r->cost_usd);
        s.push_back(r->score.combined);
        n.push_back(r->iterations);
      }
      rows.push_back({model, mode, summarize(t), summarize(c), summarize(s), summarize(n)});
    }
  }
  return rows;
}

double delta_pct(double tr, double zs) {
  if (zs == 0) throw Error(ErrorCode::ZeroBaseline, "zero-shot baseline is 0");
  return 100.0 * (tr - zs) / zs;
}

std::vector<RadarPoint> normalize_radar(const std::vector<RadarPoint>& points, const std::set<std::string>& lower_is_better,
                                        std::vector<std::string>* warnings) {
  std::set<std::string> axes;
  for (const auto& p : points) {
    for (const auto& [axis, v] : p.values) axes.insert(axis);
  }
  std::vector<RadarPoint> out;
  for (const auto& p : points) out.push_back({p.label, {}});
  for (const auto& axis : axes) {
    const bool invert = lower_is_better.count(axis) > 0;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& p : points) {
      const auto it = p.values.find(axis);
      if (it == p.values.end()) throw Error(ErrorCode::InvalidArgument, p.label + " has no value on axis " + axis);
      const double v = invert ? -it->second : it->second;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const bool degenerate = !(hi > lo);
    if (degenerate && warnings) warnings->push_back("axis " + axis + " is constant; mapped to 0.5");
    for (size_t i = 0; i < points.size(); ++i) {
      const double v = invert ? -points[i].values.at(axis) : points[i].values.at(axis);
      out[i].values[axis] = degenerate ? 0.5 : 0.1 + 0.8 * (v - lo) / (hi - lo);
    }
  }
  return out;
}

std::string format_fixed(double v, int decimals) {
  const double p = std::pow(10.0, decimals);
  // The nudge keeps values like 2.675 (stored as 2.67499...) rounding up.
  double r = std::round(v * p + (v >= 0 ? 1e-7 : -1e-7)) / p;
  if (r == 0) r = 0;  // no "-0.0"
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(decimals);
  os << r;
  return os.str();
}

namespace {

struct Metric {
  const char* title;
  const char* key;
  Stat GroupRow::*field;
  double scale;
  int decimals;
  bool delta;
};

const Metric kMetrics[] = {
    {"Time (min)", "time", &GroupRow::time, 1.0, 1, true},
    {"Cost (USD)", "cost", &GroupRow::cost, 1.0, 2, true},
    {"Score (%)", "score", &GroupRow::score, 100.0, 1, false},
};

std::string signed_pct(double v) {
  auto s = format_fixed(v, 1);
  if (s[0] != '-') s = "+" + s;
  return s + "%";
}

}  // namespace

std::string emit_tables(const std::vector<GroupRow>& rows, TableFormat format) {
  std::vector<std::string> models;
  std::map<std::pair<std::string, RunMode>, const GroupRow*> index;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    index[{r.model, r.mode}] = &r;
  }
  std::ostringstream os;
  const bool md = format == TableFormat::Markdown;

  // Header.
  std::vector<std::string> header{"Model"};
  for (const auto& m : kMetrics) {
    for (const char* col : {"ZS", "TR", "Δ%", "EO"}) {
      if (!m.delta && std::string_view(col) == "Δ%") continue;
      if (md) {
        header.push_back(std::string(m.title) + " " + col);
      } else if (std::string_view(col) == "Δ%") {
        header.push_back(std::string(m.key) + "_delta_pct");
      } else {
        const std::string base = std::string(m.key) + "_" + (col[0] == 'Z' ? "zs" : col[0] == 'T' ? "tr" : "eo");
        header.push_back(base + "_mean");
        header.push_back(base + "_std");
      }
    }
  }
  auto emit_row = [&](const std::vector<std::string>& cells) {
    if (md) {
      os << "|";
      for (const auto& c : cells) os << " " << c << " |";
    } else {
      for (size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    }
    os << "\n";
  };
  emit_row(header);
  if (md) {
    os << "|";
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "---:|" : "---|");
    os << "\n";
  }

  for (const auto& model : models) {
    std::vector<std::string> cells{model};
    for (const auto& m : kMetrics) {
      const GroupRow* zs = index.count({model, RunMode::ZeroShot}) ? index[{model, RunMode::ZeroShot}] : nullptr;
      const GroupRow* tr = index.count({model, RunMode::ToolReuse}) ? index[{model, RunMode::ToolReuse}] : nullptr;
      const GroupRow* eo = index.count({model, RunMode::EvaluatorOnly}) ? index[{model, RunMode::EvaluatorOnly}] : nullptr;
      auto stat_cells = [&](const GroupRow* g) {
        if (!g) {
          if (md) {
            cells.push_back("-");
          } else {
            cells.push_back("");
            cells.push_back("");
          }
          return;
        }
        const Stat& s = g->*m.field;
        const auto mean = format_fixed(s.mean * m.scale, m.decimals);
        const auto sd = s.std ? format_fixed(*s.std * m.scale, m.decimals) : std::string();
        if (md) {
          cells.push_back(s.std ? mean + " ± " + sd : mean);
        } else {
          cells.push_back(mean);
          cells.push_back(sd);
        }
      };
      stat_cells(zs);
      stat_cells(tr);
      if (m.delta) {
        std::string d;
        if (zs && tr && (zs->*m.field).mean != 0) {
          const double v = delta_pct((tr->*m.field).mean, (zs->*m.field).mean);
          d = md ? signed_pct(v) : format_fixed(v, 1);
        }
        cells.push_back(md && d.empty() ? "-" : d);
      }
      stat_cells(eo);
    }
    emit_row(cells);
  }
  return os.str();
}

std::string emit_radar_csv(const std::vector<RadarPoint>& points) {
  std::set<std::string> axes;
  for (const auto& p : points) {
    for (const auto& [axis, v] : p.values) axes.insert(axis);
  }
  std::ostringstream os;
  os << "label";
  for (const auto& a : axes) os << "," << a;
  os << "\n";
  for (const auto& p : points) {
    os << p.label;
    for (const auto& a : axes) {
      const auto it = p.values.find(a);
      os << "," << (it == p.values.end() ? "" : format_fixed(it->second, 3));
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace toolsmith
