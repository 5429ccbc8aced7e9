#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toolsmith {

enum class CriterionKind { ToleranceBand, ExactMatch, MadThreshold, RangeCheck, RelativeErrorBand, Judged };

std::string_view to_string(CriterionKind k) noexcept;

/// One accuracy criterion. Only the parameters of its kind are meaningful.
struct Criterion {
  std::string id;
  CriterionKind kind = CriterionKind::ToleranceBand;
  std::string description;

  double ref = 0;  // tolerance_band, relative_error_band
  double full = 0;
  std::optional<double> partial;  // no partial credit when absent
  std::string ref_text;           // exact_match
  bool case_sensitive = true;
  std::vector<double> refs;  // mad_threshold
  double lo = 0, hi = 0;     // range_check
  std::string verdict;       // judged: verdict id, defaults to the criterion id
};

// Checks per-kind invariants (full <= partial, lo <= hi, ref != 0 for
// relative bands). Throws InvalidArgument.
void validate_criterion(const Criterion& c);

// Throws InvalidArgument, including for an unknown kind.
Criterion parse_criterion(const nlohmann::json& j);

/// 1, 0.5 or 0. A null `observed` scores 0. Throws TypeMismatch when the
/// observed value has the wrong shape and MissingVerdict for judged
/// criteria without an entry.
double score_criterion(const Criterion& c, const nlohmann::json* observed, const std::map<std::string, bool>& verdicts);

// Mean over criteria; `observed` is an object keyed by criterion id.
double score_accuracy(const std::vector<Criterion>& criteria, const nlohmann::json& observed,
                      const std::map<std::string, bool>& verdicts, std::vector<std::string>* warnings = nullptr);

struct MethodologyStage {
  std::string id;
  std::string description;
  double weight = 0;  // in (0, 1]
  double score = 0;   // in [0, 10]
};

// Sum of weight * score / 10. Throws WeightSumViolation, InvalidArgument.
double score_methodology(const std::vector<MethodologyStage>& stages);

struct RubricScore {
  double accuracy = 0;
  double methodology = 0;
  double combined = 0;
};

double combined(double accuracy, double methodology);

struct Rubric {
  std::string id;
  std::vector<Criterion> criteria;
  std::vector<MethodologyStage> stages;  // scores unset
};

/// {"id", "criteria": [{id, kind, ...}], "methodology": [{id, description, weight}]}
Rubric parse_rubric(const nlohmann::json& j);

/// Observed values for one run:
/// {"observed": {criterion id: value}, "verdicts": {id: bool}, "methodology": {stage id: 0..10}}
struct RunResults {
  nlohmann::json observed = nlohmann::json::object();
  std::map<std::string, bool> verdicts;
  std::map<std::string, double> stage_scores;
};

RunResults parse_results(const nlohmann::json& j);

// Missing observations and stage scores count as 0 and add a warning.
RubricScore score_run(const Rubric& rubric, const RunResults& results, std::vector<std::string>* warnings = nullptr);

}  // namespace toolsmith
