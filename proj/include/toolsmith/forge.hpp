#pragma once

#include "toolsmith/agent.hpp"
#include "toolsmith/prompts.hpp"
#include "toolsmith/registry.hpp"
#include "toolsmith/workspace.hpp"

#include <optional>

namespace toolsmith {

struct ToolRequirement {
  std::string name;
  std::string description;
  std::string method_hint;
  std::vector<ParamSpec> inputs;
  std::vector<ParamSpec> outputs;
  friend bool operator==(const ToolRequirement&, const ToolRequirement&) = default;
};

void to_json(nlohmann::json& j, const ToolRequirement& r);

struct AnalysisPlan {
  std::string task_analysis;
  std::vector<std::string> reuse;
  std::vector<ToolRequirement> requirements;
};

// Shape checks only; reuse and collision checks need a registry. Throws
// PlanParseFailure.
AnalysisPlan parse_plan(const nlohmann::json& payload);

// Everything a forge-side session needs besides its own arguments.
struct ForgeContext {
  WorkspacePaths ws;
  SessionContext session;
  const JobExecutor* executor = nullptr;
  const PromptSet* prompts = &PromptSet::defaults();
  std::string generated_by = "mock";
};

/// Spawns the analyzer session with the question and root listing. Reuse
/// names must resolve (DanglingReuse) and new requirement names must be
/// free (RequirementCollision).
AnalysisPlan analyze_task(const TaskSpec& task, const Registry& registry, const ForgeContext& ctx);

struct RequirementVerdict {
  bool accept = false;
  std::string reason;
};

// Deterministic floor: no inputs and no outputs, or the task id appearing
// as a whole token in the description.
std::optional<std::string> requirement_rule_violation(const ToolRequirement& req, const std::string& task_id);

/// Rule check first (a rule rejection skips the backend), then the
/// validator session. Either rejection rejects.
RequirementVerdict validate_requirement(const ToolRequirement& req, const ForgeContext& ctx);

struct TestOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ReviewRecord {
  int iteration = 1;
  bool approved = false;
  std::vector<std::string> issues;
  std::vector<std::string> fixes_applied;
};

nlohmann::json to_json(const ReviewRecord& r);
// Throws ParseFailure, including for approvals that leave issues unfixed.
ReviewRecord parse_review(const nlohmann::json& payload, int iteration);

struct DraftArtifact {
  ToolRequirement requirement;
  fs::path sandbox_dir;
  ToolManifest manifest;
  std::string source;
  std::vector<TestOutcome> test_results;
  std::vector<ReviewRecord> reviews;
  int rounds = 0;

  bool tests_passed() const;
  bool approved() const { return !reviews.empty() && reviews.back().approved; }
};

// `tool_smith/task_<id>/<requirement>/`.
fs::path sandbox_dir_for(const WorkspacePaths& ws, const std::string& task_id, const std::string& requirement);

// Runs every script under `<sandbox>/tests/` (sh for .sh, python3 for .py,
// directly otherwise); pass is exit status 0. No tests is a failure.
std::vector<TestOutcome> run_sandbox_tests(const fs::path& sandbox, const JobExecutor& executor);

/// Draft, test, feed failures back; at most max_rounds generator sessions.
/// Throws BudgetExhausted carrying {"rounds": n} when tests never pass.
DraftArtifact forge_tool(const ToolRequirement& req, const ForgeContext& ctx, int max_rounds = 3);

/// Reviewer sessions until approval; a revision re-runs the tests before
/// the next review. Records are written as review_iter_<n>.json in the
/// sandbox. Throws BudgetExhausted after max_reviews without approval.
DraftArtifact review_tool(DraftArtifact draft, const ForgeContext& ctx, int max_reviews = 2);

// Registers the approved draft at the toolset root. PreconditionViolation
// for unapproved or failing drafts.
RegisterOutcome promote_tool(const DraftArtifact& draft, Registry& registry);

struct ContractVerdict {
  bool pass = true;
  std::vector<std::string> reasons;
};

/// Behavioral lint: a schema-violating call must come back as a structured
/// error; the probe input, when given, must produce conforming output.
ContractVerdict contract_check(const std::string& name, const Registry& registry, const ToolRuntime& runtime,
                               const std::optional<nlohmann::json>& probe = std::nullopt);

// Schema-violating input for a tool: the first required input mistyped, or
// a non-object document when there are no inputs.
nlohmann::json invalid_input_for(const ToolManifest& m);

}  // namespace toolsmith
