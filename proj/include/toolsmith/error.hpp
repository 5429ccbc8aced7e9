#pragma once

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace toolsmith {

enum class ErrorCode {
  // workspace
  WorkspaceExists,
  IoFailure,
  // registry
  ValidationFailed,
  NameConflict,
  NoSuchCategory,
  NotFound,
  Ambiguous,
  InputSchemaViolation,
  ToolError,
  OutputSchemaViolation,
  // executor
  ExecutorFailure,
  SpawnFailure,
  SubmitFailure,
  PollTimeout,
  // backends
  BackendFailure,
  BackendUnavailable,
  SessionTimeout,
  PlaybookMiss,
  ParseFailure,
  DuplicateModel,
  // forge
  PlanParseFailure,
  DanglingReuse,
  RequirementCollision,
  BudgetExhausted,
  PreconditionViolation,
  // optimizer
  InvalidPlan,
  InvalidProposal,
  EmbedderFailure,
  DimensionMismatch,
  // evaluator
  MissingEvaluationFile,
  InconsistentFlags,
  // workflow
  EmptyPlan,
  UnknownStage,
  // scoring
  TypeMismatch,
  MissingVerdict,
  WeightSumViolation,
  EmptyGroup,
  ZeroBaseline,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable code and optional structured detail.
///
/// Every fallible operation in the engine reports failure by throwing this
/// type; callers switch on code() rather than parsing what().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace toolsmith
