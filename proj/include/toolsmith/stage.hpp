#pragma once

#include "toolsmith/usage.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace toolsmith {

// Session kinds. The first five are the workflow stages; the rest are the
// auxiliary sessions spawned by the forge validator and the optimizer.
enum class Stage {
  ToolAnalysis,
  ToolGeneration,
  ToolReview,
  TaskExecution,
  Evaluation,
  RequirementValidation,
  ToolsetReorg,
  ToolMerge,
};

std::string_view to_string(Stage s) noexcept;
std::optional<Stage> stage_from_string(std::string_view s) noexcept;

// One spawned session as recorded in an IterationRecord.
struct StageSession {
  Stage stage = Stage::TaskExecution;
  std::string session_id;
  std::string backend;
  std::string model;
  TokenUsage usage;
  Usd cost;
  bool ok = true;
  friend bool operator==(const StageSession&, const StageSession&) = default;
};

void to_json(nlohmann::json& j, const StageSession& s);
void from_json(const nlohmann::json& j, StageSession& s);

}  // namespace toolsmith
