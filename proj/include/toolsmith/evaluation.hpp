#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace toolsmith {

inline constexpr std::string_view kCompletionSentinel = "Task complete; no further action needed";

struct EvaluationResult {
  bool bug_need_fix = false;
  bool script_complete = false;
  bool further_simulation_needed = false;
  bool result_complete = false;
  bool next_step_needed = true;
  std::string next_step_plan;

  // True only when all four condition flags say the task is done.
  bool conditions_met() const {
    return !bug_need_fix && script_complete && !further_simulation_needed && result_complete;
  }
  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

nlohmann::json to_json(const EvaluationResult& e);

/// Strict parse of an evaluation.json document. All six fields are required
/// and must be booleans (plan: string); extra keys are ignored. Throws
/// ParseFailure, or InconsistentFlags when next_step_needed disagrees with
/// the four condition flags. A finished evaluation whose plan is not the
/// completion sentinel is normalized to it with a warning.
EvaluationResult parse_evaluation(std::string_view bytes);

// Forces result_complete=false (and therefore a follow-up step) when the
// report is missing.
EvaluationResult apply_missing_report_override(EvaluationResult e);

enum class DecisionKind { StopComplete, Continue, StopFailed };

struct Decision {
  DecisionKind kind;
  std::string plan;  // Continue only
  friend bool operator==(const Decision&, const Decision&) = default;
};

std::string_view to_string(DecisionKind k) noexcept;

Decision decide_next(const EvaluationResult& eval, int iteration, int max_iterations);

}  // namespace toolsmith
