#include "toolsmith/workflow.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"

#include <mutex>
#include <set>

namespace toolsmith {
namespace {

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds since(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t);
}

void attach_toolset(const WorkspacePaths& ws, const fs::path& toolset_root) {
  std::error_code ec;
  fs::create_directories(toolset_root, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create toolset " + toolset_root.string() + ": " + ec.message());
  fs::remove(ws.tools_dir, ec);  // freshly created and empty
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + ws.tools_dir.string() + ": " + ec.message());
  fs::create_directory_symlink(fs::absolute(toolset_root), ws.tools_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot link toolset into " + ws.root.string() + ": " + ec.message());
}

void forge_requirement(const ToolRequirement& req, const ForgeContext& fctx, const ForgeBudgets& budgets,
                       Registry& registry, IterationRecord& rec) {
  const auto verdict = validate_requirement(req, fctx);
  if (!verdict.accept) {
    rec.forge.push_back({req.name, "rejected", verdict.reason});
    return;
  }
  DraftArtifact draft;
  try {
    draft = forge_tool(req, fctx, budgets.max_rounds);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BudgetExhausted) throw;
    rec.forge.push_back({req.name, "forge_failed", e.what()});
    return;
  }
  try {
    draft = review_tool(std::move(draft), fctx, budgets.max_reviews);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BudgetExhausted) throw;
    rec.forge.push_back({req.name, "review_failed", e.what()});
    return;
  }
  const auto outcome = promote_tool(draft, registry);
  rec.forge.push_back({req.name, "promoted", outcome == RegisterOutcome::Unchanged ? "unchanged" : ""});
}

void finalize(RunOutcome& out, const WorkspacePaths& ws, Clock::time_point start) {
  out.total_cost = {};
  out.total_usage = {};
  for (const auto& s : out.pre_task_sessions) {
    out.total_cost += s.cost;
    out.total_usage += s.usage;
  }
  for (const auto& it : out.iterations) {
    for (const auto& s : it.stage_sessions) {
      out.total_cost += s.cost;
      out.total_usage += s.usage;
    }
  }
  out.total_time = since(start);
  out.final_report_present = fs::exists(ws.report);
  out.workspace = ws.root;
  write_file(ws.outcome_file(), nlohmann::json(out).dump(2) + "\n");
}

}  // namespace

void validate_config(const RunConfig& c) {
  if (c.max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  if (c.forge.max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be >= 1");
  if (c.forge.max_reviews < 1) throw Error(ErrorCode::InvalidArgument, "max_reviews must be >= 1");
  if (c.optimizer.threshold < 1) throw Error(ErrorCode::InvalidArgument, "optimizer threshold must be >= 1");
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Complete: return "complete";
    case RunStatus::FailedBudget: return "failed_budget";
    case RunStatus::Error: return "error";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const RunOutcome& o) {
  j = {{"task_id", o.task_id},
       {"mode", to_string(o.mode)},
       {"status", to_string(o.status)},
       {"error", o.status == RunStatus::Error ? nlohmann::json(o.error_detail) : nlohmann::json(nullptr)},
       {"iterations", o.iterations},
       {"pre_task_sessions", o.pre_task_sessions},
       {"total_cost_usd", o.total_cost.to_string()},
       {"total_cost_nano_usd", o.total_cost.nano()},
       {"total_usage", o.total_usage},
       {"total_time_ms", o.total_time.count()},
       {"final_report_present", o.final_report_present},
       {"workspace", o.workspace.string()}};
}

void from_json(const nlohmann::json& j, RunOutcome& o) {
  o.task_id = j.at("task_id").get<std::string>();
  o.mode = run_mode_from_string(j.at("mode").get<std::string>()).value_or(RunMode::ZeroShot);
  const auto status = j.at("status").get<std::string>();
  o.status = status == "complete" ? RunStatus::Complete : status == "failed_budget" ? RunStatus::FailedBudget : RunStatus::Error;
  o.error_detail = j.at("error").is_null() ? "" : j.at("error").get<std::string>();
  o.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
  o.pre_task_sessions = j.value("pre_task_sessions", std::vector<StageSession>{});
  o.total_cost = Usd::from_nano(j.at("total_cost_nano_usd").get<int64_t>());
  o.total_usage = j.at("total_usage").get<TokenUsage>();
  o.total_time = std::chrono::milliseconds(j.at("total_time_ms").get<int64_t>());
  o.final_report_present = j.at("final_report_present").get<bool>();
  o.workspace = j.value("workspace", "");
}

Usd session_cost(const StageSession& s, const std::vector<PricingEntry>& pricing, CacheTtl ttl) {
  const auto price = select_price(pricing, s.model, s.usage.prompt_tokens());
  if (!price) {
    if (s.usage != TokenUsage{}) {
      static std::mutex m;
      static std::set<std::string> warned;
      std::lock_guard guard(m);
      if (warned.insert(s.model).second) log::warn("no pricing entry for model \"" + s.model + "\"; its sessions cost 0");
    }
    return {};
  }
  return account_cost(s.usage, *price, ttl);
}

TaskSpec compose_next_question(const TaskSpec& task, const std::string& plan) {
  bool blank = true;
  for (char c : plan) blank = blank && std::isspace(static_cast<unsigned char>(c));
  if (blank) throw Error(ErrorCode::EmptyPlan, "next-step plan is empty");
  TaskSpec next = task;
  next.prompt += "\n\n---\n\n## Next-step plan from evaluation\n\n" + plan;
  if (plan.back() != '\n') next.prompt += "\n";
  return next;
}

std::vector<Stage> stage_plan(RunMode mode) {
  switch (mode) {
    case RunMode::ZeroShot:
      return {Stage::ToolAnalysis, Stage::RequirementValidation, Stage::ToolGeneration, Stage::ToolReview,
              Stage::TaskExecution, Stage::Evaluation};
    case RunMode::ToolReuse: return {Stage::ToolAnalysis, Stage::TaskExecution, Stage::Evaluation};
    case RunMode::EvaluatorOnly: return {Stage::TaskExecution, Stage::Evaluation};
  }
  return {};
}

RunOutcome run_task(const TaskSpec& task, const RunConfig& config, const std::optional<fs::path>& toolset_root,
                    const RunContext& ctx) {
  validate_config(config);
  if (!ctx.backends || !ctx.executor) throw Error(ErrorCode::InvalidArgument, "run context needs backends and an executor");
  const auto start = Clock::now();
  RunOutcome out;
  out.task_id = task.id;
  out.mode = config.mode;

  const WorkspacePaths ws = init_workspace(task, ctx.base_dir, config.overwrite_workspace);
  std::optional<Registry> registry;
  try {
    if (config.mode != RunMode::EvaluatorOnly) {
      if (toolset_root) {
        attach_toolset(ws, *toolset_root);
        registry.emplace(*toolset_root);
      } else if (config.mode == RunMode::ToolReuse) {
        throw Error(ErrorCode::PreconditionViolation, "tool_reuse needs a seed toolset");
      } else {
        registry.emplace(ws.tools_dir);
      }
    }
  } catch (const Error& e) {
    out.status = RunStatus::Error;
    out.error_detail = e.what();
    finalize(out, ws, start);
    return out;
  }

  ToolRuntime runtime;
  runtime.shim_command = ctx.shim_command;
  runtime.executor = ctx.executor;
  runtime.logs_dir = ws.logs_dir;

  TaskSpec current = task;
  for (int i = 1; i <= config.max_iterations; ++i) {
    const auto iter_start = Clock::now();
    IterationRecord rec;
    rec.index = i;
    SessionContext sctx;
    sctx.task_id = task.id;
    sctx.iteration = i;
    sctx.backends = ctx.backends;
    sctx.attachments = config.skills;
    sctx.sink = [&](const StageSession& s) {
      StageSession priced = s;
      priced.cost = session_cost(s, config.pricing, config.cache_ttl);
      rec.stage_sessions.push_back(std::move(priced));
    };
    ForgeContext fctx{ws, sctx, ctx.executor, ctx.prompts, "mock"};

    std::optional<Decision> decision;
    try {
      if (i > 1) write_file(ws.question, current.prompt);
      fctx.generated_by = ctx.backends->for_stage(Stage::ToolGeneration).id();

      if (config.mode != RunMode::EvaluatorOnly) {
        const auto plan = analyze_task(current, *registry, fctx);
        rec.reused_tools = plan.reuse;
        if (config.mode == RunMode::ZeroShot) {
          for (const auto& req : plan.requirements) forge_requirement(req, fctx, config.forge, *registry, rec);
        }
      }

      const fs::path tools_root = registry ? registry->root() : ws.tools_dir;
      const auto before = snapshot_dir(tools_root);
      {
        PromptInputs in;
        in.question = current.prompt;
        AgentRequest req;
        req.stage = Stage::TaskExecution;
        req.workspace_root = ws.root;
        req.iteration = i;
        if (registry) {
          req.disclosure = std::make_shared<Disclosure>(&*registry);
          in.listing = req.disclosure->open_text({});
          const fs::path index = registry->root() / std::string(kIndexFile);
          if (fs::exists(index)) req.attachments.push_back(ws.tools_dir / std::string(kIndexFile));
        }
        req.prompt = select_stage_prompt(Stage::TaskExecution, in, *ctx.prompts);
        run_stage_session(std::move(req), sctx);
      }
      rec.edit_stats = diff_tool_edits(before, snapshot_dir(tools_root));

      rec.evaluation = evaluate(ws, sctx, *ctx.prompts);
      decision = decide_next(*rec.evaluation, i, config.max_iterations);
    } catch (const std::exception& e) {
      rec.error = e.what();
      out.status = RunStatus::Error;
      out.error_detail = e.what();
    }
    rec.wall_time = since(iter_start);
    archive_iteration(ws, i, rec);
    out.iterations.push_back(std::move(rec));

    if (!decision) break;
    if (decision->kind == DecisionKind::StopComplete) {
      out.status = RunStatus::Complete;
      break;
    }
    if (decision->kind == DecisionKind::StopFailed) {
      out.status = RunStatus::FailedBudget;
      break;
    }
    current = compose_next_question(current, decision->plan);
  }
  finalize(out, ws, start);
  return out;
}

std::vector<RunOutcome> run_curriculum(const std::vector<TaskSpec>& tasks, const RunConfig& config,
                                       const fs::path& shared_toolset, const RunContext& ctx) {
  validate_config(config);
  std::error_code ec;
  fs::create_directories(shared_toolset, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create toolset " + shared_toolset.string() + ": " + ec.message());

  HashEmbedder fallback_embedder;
  EmbeddingProvider& embedder = ctx.embedder ? *ctx.embedder : fallback_embedder;
  std::vector<RunOutcome> outcomes;
  for (const auto& task : tasks) {
    std::vector<StageSession> pre;
    std::string optimizer_error;
    if (config.optimizer.enabled && config.mode != RunMode::EvaluatorOnly) {
      try {
        Registry registry(shared_toolset);
        SessionContext sctx;
        sctx.task_id = task.id;
        sctx.iteration = 0;
        sctx.backends = ctx.backends;
        sctx.sink = [&](const StageSession& s) {
          StageSession priced = s;
          priced.cost = session_cost(s, config.pricing, config.cache_ttl);
          pre.push_back(std::move(priced));
        };
        ForgeContext fctx{WorkspacePaths::at(shared_toolset), sctx, ctx.executor, ctx.prompts, "optimizer"};
        ToolRuntime runtime{ctx.shim_command, ctx.executor, shared_toolset / ".optimizer_logs"};
        optimize(registry, config.optimizer, fctx, runtime, embedder);
      } catch (const std::exception& e) {
        optimizer_error = e.what();
        log::warn("optimizer before " + task.id + " failed: " + optimizer_error);
      }
    }
    RunOutcome o;
    try {
      o = run_task(task, config, shared_toolset, ctx);
    } catch (const std::exception& e) {
      o.task_id = task.id;
      o.mode = config.mode;
      o.status = RunStatus::Error;
      o.error_detail = e.what();
    }
    o.pre_task_sessions = std::move(pre);
    for (const auto& s : o.pre_task_sessions) {
      o.total_cost += s.cost;
      o.total_usage += s.usage;
    }
    if (!o.workspace.empty()) write_file(o.workspace / "run_outcome.json", nlohmann::json(o).dump(2) + "\n");
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

}  // namespace toolsmith
