#pragma once

#include "toolsmith/evaluator.hpp"
#include "toolsmith/forge.hpp"
#include "toolsmith/optimizer.hpp"
#include "toolsmith/pricing.hpp"

namespace toolsmith {

struct ForgeBudgets {
  int max_rounds = 3;
  int max_reviews = 2;
};

struct RunConfig {
  RunMode mode = RunMode::ZeroShot;
  int max_iterations = 5;
  ForgeBudgets forge;
  OptimizerSettings optimizer;
  std::vector<PricingEntry> pricing = default_pricing();
  CacheTtl cache_ttl = CacheTtl::FiveMinutes;
  bool overwrite_workspace = true;
  std::vector<fs::path> skills;
};

// Throws InvalidArgument.
void validate_config(const RunConfig& config);

enum class RunStatus { Complete, FailedBudget, Error };
std::string_view to_string(RunStatus s) noexcept;

struct RunOutcome {
  std::string task_id;
  RunMode mode = RunMode::ZeroShot;
  RunStatus status = RunStatus::Error;
  std::string error_detail;
  std::vector<IterationRecord> iterations;
  std::vector<StageSession> pre_task_sessions;  // optimizer sessions before the task
  Usd total_cost;
  TokenUsage total_usage;
  std::chrono::milliseconds total_time{0};
  bool final_report_present = false;
  fs::path workspace;
};

void to_json(nlohmann::json& j, const RunOutcome& o);
void from_json(const nlohmann::json& j, RunOutcome& o);

struct RunContext {
  fs::path base_dir;  // workspaces are created here
  const BackendSet* backends = nullptr;
  const JobExecutor* executor = nullptr;
  std::vector<std::string> shim_command = default_shim_command();
  const PromptSet* prompts = &PromptSet::defaults();
  EmbeddingProvider* embedder = nullptr;  // merges only
};

// Cost of one session; unknown models cost nothing and log a warning.
Usd session_cost(const StageSession& s, const std::vector<PricingEntry>& pricing, CacheTtl ttl);

/// One task through the four-stage loop. Failures inside the loop end the
/// run with status Error rather than throwing; the outcome is also written
/// to run_outcome.json in the workspace.
RunOutcome run_task(const TaskSpec& task, const RunConfig& config, const std::optional<fs::path>& toolset_root,
                    const RunContext& ctx);

/// Tasks in the given order against one persistent toolset, running the
/// optimizer before each. A failing task does not stop the curriculum.
std::vector<RunOutcome> run_curriculum(const std::vector<TaskSpec>& tasks, const RunConfig& config,
                                       const fs::path& shared_toolset, const RunContext& ctx);

// Appends the plan as a delimited section; throws EmptyPlan.
TaskSpec compose_next_question(const TaskSpec& task, const std::string& plan);

// Stage sequence of one iteration in this mode, for --dry-run.
std::vector<Stage> stage_plan(RunMode mode);

}  // namespace toolsmith
