#include "toolsmith/stage.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/pricing.hpp"

#include <array>
#include <utility>

namespace toolsmith {
namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 8> kStageNames{{
    {Stage::ToolAnalysis, "tool-analysis"},
    {Stage::ToolGeneration, "tool-generation"},
    {Stage::ToolReview, "tool-review"},
    {Stage::TaskExecution, "task-execution"},
    {Stage::Evaluation, "evaluation"},
    {Stage::RequirementValidation, "requirement-validation"},
    {Stage::ToolsetReorg, "toolset-reorg"},
    {Stage::ToolMerge, "tool-merge"},
}};

}  // namespace

std::string_view to_string(Stage s) noexcept {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view s) noexcept {
  for (const auto& [stage, name] : kStageNames) {
    if (name == s) return stage;
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const StageSession& s) {
  j = {{"stage", to_string(s.stage)}, {"session_id", s.session_id}, {"backend", s.backend},
       {"model", s.model},           {"usage", s.usage},             {"cost_usd", s.cost.to_string()},
       {"cost_nano_usd", s.cost.nano()}, {"ok", s.ok}};
}

void from_json(const nlohmann::json& j, StageSession& s) {
  const auto stage = stage_from_string(j.at("stage").get<std::string>());
  if (!stage) throw Error(ErrorCode::ParseFailure, "unknown stage " + j.at("stage").dump());
  s.stage = *stage;
  s.session_id = j.at("session_id").get<std::string>();
  s.backend = j.value("backend", "");
  s.model = j.value("model", "");
  s.usage = j.at("usage").get<TokenUsage>();
  s.cost = Usd::from_nano(j.value("cost_nano_usd", int64_t{0}));
  s.ok = j.value("ok", true);
}

}  // namespace toolsmith
