#include "toolsmith/evaluation.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"

namespace toolsmith {
namespace {

constexpr std::string_view kMissingReportPlan =
    "report.md was not found in the workspace. Produce report.md with the final results and "
    "the evidence supporting them.";

bool required_bool(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::ParseFailure, std::string("evaluation: missing field ") + key);
  if (!it->is_boolean()) throw Error(ErrorCode::ParseFailure, std::string("evaluation: ") + key + " must be a boolean");
  return it->get<bool>();
}

}  // namespace

nlohmann::json to_json(const EvaluationResult& e) {
  return {{"bug_need_fix", e.bug_need_fix},
          {"script_complete", e.script_complete},
          {"further_simulation_needed", e.further_simulation_needed},
          {"result_complete", e.result_complete},
          {"next_step_needed", e.next_step_needed},
          {"next_step_plan", e.next_step_plan}};
}

EvaluationResult parse_evaluation(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, std::string("evaluation: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "evaluation: document must be an object");

  EvaluationResult r;
  r.bug_need_fix = required_bool(j, "bug_need_fix");
  r.script_complete = required_bool(j, "script_complete");
  r.further_simulation_needed = required_bool(j, "further_simulation_needed");
  r.result_complete = required_bool(j, "result_complete");
  r.next_step_needed = required_bool(j, "next_step_needed");
  auto plan = j.find("next_step_plan");
  if (plan == j.end()) throw Error(ErrorCode::ParseFailure, "evaluation: missing field next_step_plan");
  if (!plan->is_string()) throw Error(ErrorCode::ParseFailure, "evaluation: next_step_plan must be a string");
  r.next_step_plan = plan->get<std::string>();

  if (r.next_step_needed == r.conditions_met()) {
    throw Error(ErrorCode::InconsistentFlags,
                "evaluation: next_step_needed=" + std::string(r.next_step_needed ? "true" : "false") +
                    " contradicts the condition flags",
                j);
  }
  if (!r.next_step_needed && r.next_step_plan != kCompletionSentinel) {
    log::warn("evaluation: completed evaluation carried a non-sentinel plan; normalized");
    r.next_step_plan = std::string(kCompletionSentinel);
  }
  if (r.next_step_needed && r.next_step_plan.empty()) {
    throw Error(ErrorCode::ParseFailure, "evaluation: next_step_needed=true with an empty plan");
  }
  return r;
}

EvaluationResult apply_missing_report_override(EvaluationResult e) {
  e.result_complete = false;
  if (!e.next_step_needed) {
    e.next_step_needed = true;
    e.next_step_plan = std::string(kMissingReportPlan);
  }
  return e;
}

std::string_view to_string(DecisionKind k) noexcept {
  switch (k) {
    case DecisionKind::StopComplete: return "stop_complete";
    case DecisionKind::Continue: return "continue";
    case DecisionKind::StopFailed: return "stop_failed";
  }
  return "unknown";
}

Decision decide_next(const EvaluationResult& eval, int iteration, int max_iterations) {
  if (!eval.next_step_needed) return {DecisionKind::StopComplete, {}};
  if (iteration < max_iterations) return {DecisionKind::Continue, eval.next_step_plan};
  return {DecisionKind::StopFailed, {}};
}

}  // namespace toolsmith
