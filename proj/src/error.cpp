#include "toolsmith/error.hpp"

namespace toolsmith {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::WorkspaceExists: return "workspace-exists";
    case ErrorCode::IoFailure: return "io-failure";
    case ErrorCode::ValidationFailed: return "validation-failed";
    case ErrorCode::NameConflict: return "name-conflict";
    case ErrorCode::NoSuchCategory: return "no-such-category";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::Ambiguous: return "ambiguous";
    case ErrorCode::InputSchemaViolation: return "input-schema-violation";
    case ErrorCode::ToolError: return "tool-error";
    case ErrorCode::OutputSchemaViolation: return "output-schema-violation";
    case ErrorCode::ExecutorFailure: return "executor-failure";
    case ErrorCode::SpawnFailure: return "spawn-failure";
    case ErrorCode::SubmitFailure: return "submit-failure";
    case ErrorCode::PollTimeout: return "poll-timeout";
    case ErrorCode::BackendFailure: return "backend-failure";
    case ErrorCode::BackendUnavailable: return "backend-unavailable";
    case ErrorCode::SessionTimeout: return "session-timeout";
    case ErrorCode::PlaybookMiss: return "playbook-miss";
    case ErrorCode::ParseFailure: return "parse-failure";
    case ErrorCode::DuplicateModel: return "duplicate-model";
    case ErrorCode::PlanParseFailure: return "plan-parse-failure";
    case ErrorCode::DanglingReuse: return "dangling-reuse";
    case ErrorCode::RequirementCollision: return "requirement-collision";
    case ErrorCode::BudgetExhausted: return "budget-exhausted";
    case ErrorCode::PreconditionViolation: return "precondition-violation";
    case ErrorCode::InvalidPlan: return "invalid-plan";
    case ErrorCode::InvalidProposal: return "invalid-proposal";
    case ErrorCode::EmbedderFailure: return "embedder-failure";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::MissingEvaluationFile: return "missing-evaluation-file";
    case ErrorCode::InconsistentFlags: return "inconsistent-flags";
    case ErrorCode::EmptyPlan: return "empty-plan";
    case ErrorCode::UnknownStage: return "unknown-stage";
    case ErrorCode::TypeMismatch: return "type-mismatch";
    case ErrorCode::MissingVerdict: return "missing-verdict";
    case ErrorCode::WeightSumViolation: return "weight-sum-violation";
    case ErrorCode::EmptyGroup: return "empty-group";
    case ErrorCode::ZeroBaseline: return "zero-baseline";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown-error";
}

}  // namespace toolsmith
