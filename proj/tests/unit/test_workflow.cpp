#include "test_support.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/log.hpp"
#include "toolsmith/workflow.hpp"

#include <doctest.h>

using namespace toolsmith;
using namespace testsupport;

namespace {

TaskSpec task(const std::string& id, RunMode mode = RunMode::ZeroShot) {
  TaskSpec t;
  t.id = id;
  t.prompt = "Compute the answer for " + id + ".";
  t.mode = mode;
  return t;
}

RunConfig config(RunMode mode) {
  RunConfig c;
  c.mode = mode;
  return c;
}

json playbook(std::vector<json> sessions, const std::string& model = "mock") {
  return {{"model", model}, {"sessions", sessions}};
}

std::vector<json> joined(std::vector<json> a, const std::vector<json>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("workflow") {
  TEST_CASE("config validation and stage plans") {
    RunConfig c;
    CHECK_NOTHROW(validate_config(c));
    c.max_iterations = 0;
    CHECK_THROWS_AS(validate_config(c), Error);
    c = {};
    c.optimizer.threshold = 0;
    CHECK_THROWS_AS(validate_config(c), Error);
    CHECK(stage_plan(RunMode::EvaluatorOnly) == std::vector<Stage>{Stage::TaskExecution, Stage::Evaluation});
    CHECK(stage_plan(RunMode::ToolReuse).front() == Stage::ToolAnalysis);
    CHECK(stage_plan(RunMode::ZeroShot).size() == 6);
  }

  TEST_CASE("next question composition") {
    const auto t = task("q01");
    const auto next = compose_next_question(t, "Rerun with a larger basis.");
    CHECK(next.prompt == t.prompt + "\n\n---\n\n## Next-step plan from evaluation\n\nRerun with a larger basis.\n");
    CHECK(compose_next_question(t, "x\n").prompt.ends_with("\n\nx\n"));
    try {
      compose_next_question(t, " \n\t");
      FAIL("expected EmptyPlan");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyPlan);
    }
  }

  TEST_CASE("a clean zero-shot run forges, executes and stops") {
    Harness h(playbook(task_sessions("q01", {"scale"}), "Claude Sonnet 4.6"));
    const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::Complete);
    REQUIRE(out.iterations.size() == 1);
    const auto& it = out.iterations[0];
    CHECK(it.forge == std::vector<ForgeEvent>{{"scale", "promoted", ""}});
    std::vector<std::string> ids;
    for (const auto& s : it.stage_sessions) ids.push_back(s.session_id);
    CHECK(ids == std::vector<std::string>{"q01-i1-tool-analysis-a1", "q01-i1-requirement-validation-scale-a1",
                                          "q01-i1-tool-generation-scale-a1", "q01-i1-tool-review-scale-a1",
                                          "q01-i1-task-execution-a1", "q01-i1-evaluation-a1"});
    CHECK(Registry(out.workspace / "tools").find("scale"));
    CHECK(out.final_report_present);
    // Generation used 1000 input + 100 output at Sonnet rates: 0.003 + 0.0015.
    CHECK(out.total_cost.nano() == 4'500'000);
    CHECK(out.total_usage == TokenUsage{1000, 0, 0, 100});
    const auto saved = json::parse(read_file(out.workspace / "run_outcome.json"));
    CHECK(saved["status"] == "complete");
    CHECK(saved.get<RunOutcome>().iterations.size() == 1);
    CHECK(fs::exists(out.workspace / "iterations/1/record.json"));
    CHECK(fs::exists(out.workspace / "iterations/1/evaluation.json"));
  }

  TEST_CASE("a refinement loop that never finishes exhausts the budget") {
    auto sessions = task_sessions("q01");
    sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", 1}, {"evaluation", eval_more("Step 1.")}}));
    for (int i = 2; i <= 5; ++i) {
      sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", i}, {"evaluation", eval_more("Step " + std::to_string(i) + ".")}}));
    }
    Harness h(playbook(sessions));
    const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::FailedBudget);
    CHECK(out.iterations.size() == 5);
    const auto q = read_file(out.workspace / "question.md");
    CHECK(q.find("Step 1.") != std::string::npos);
    CHECK(q.find("Step 4.") != std::string::npos);
    CHECK(q.find("Step 5.") == std::string::npos);
    CHECK(read_file(out.workspace / "iterations/1/question.md") == task("q01").prompt);
    CHECK(read_file(out.workspace / "iterations/2/question.md").ends_with("Step 1.\n"));
  }

  TEST_CASE("pass on iteration k yields exactly k iterations") {
    for (int k = 1; k <= 3; ++k) {
      auto sessions = task_sessions("q01");
      for (int i = 1; i < k; ++i) {
        sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", i}, {"evaluation", eval_more()}}));
      }
      Harness h(playbook(sessions));
      const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
      CHECK(out.status == RunStatus::Complete);
      CHECK(out.iterations.size() == static_cast<size_t>(k));
    }
  }

  TEST_CASE("a missing report keeps the loop going") {
    auto sessions = task_sessions("q01");
    sessions.push_back(session("task-execution", {{"task", "q01"}, {"iteration", 1}}));
    Harness h(playbook(sessions));
    RunConfig c = config(RunMode::ZeroShot);
    const auto out = run_task(task("q01"), c, std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::Complete);
    REQUIRE(out.iterations.size() == 2);
    CHECK_FALSE(out.iterations[0].evaluation->result_complete);
    CHECK(read_file(out.workspace / "question.md").find("report.md was not found") != std::string::npos);
  }

  TEST_CASE("mode gating") {
    TempDir seed;
    {
      Registry r(seed / "toolset");
      install_strict_corpus(r);
    }
    auto sessions = joined(task_sessions("q01", {"scale", "shift"}), task_sessions("q02", {"norm"}));
    Harness h(playbook(sessions));

    SUBCASE("zero shot generates once per requirement") {
      run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
      run_task(task("q02"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
      CHECK(h.backend->count(Stage::ToolGeneration) == 3);
      CHECK(h.backend->count(Stage::ToolAnalysis) == 2);
    }
    SUBCASE("tool reuse never generates") {
      const auto out = run_task(task("q01"), config(RunMode::ToolReuse), seed / "toolset", h.ctx);
      CHECK(out.status == RunStatus::Complete);
      CHECK(h.backend->count(Stage::ToolGeneration) == 0);
      CHECK(h.backend->count(Stage::RequirementValidation) == 0);
      CHECK(h.backend->count(Stage::ToolAnalysis) == 1);
    }
    SUBCASE("evaluator only skips analysis and generation") {
      const auto out = run_task(task("q01"), config(RunMode::EvaluatorOnly), seed / "toolset", h.ctx);
      CHECK(out.status == RunStatus::Complete);
      CHECK(h.backend->count(Stage::ToolGeneration) == 0);
      CHECK(h.backend->count(Stage::ToolAnalysis) == 0);
      CHECK(h.backend->count(Stage::TaskExecution) == 1);
      CHECK(fs::is_directory(out.workspace / "tools"));
      CHECK_FALSE(fs::is_symlink(out.workspace / "tools"));
    }
    SUBCASE("tool reuse without a toolset is an error") {
      const auto out = run_task(task("q01"), config(RunMode::ToolReuse), std::nullopt, h.ctx);
      CHECK(out.status == RunStatus::Error);
      CHECK(out.iterations.empty());
      CHECK(out.error_detail.find("seed toolset") != std::string::npos);
    }
  }

  TEST_CASE("execution edits are counted per iteration") {
    TempDir seed;
    {
      Registry r(seed / "toolset");
      install_strict_corpus(r);
    }
    auto sessions = task_sessions("q01");
    sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", 1}, {"evaluation", eval_more()}}));
    sessions.push_back(session("task-execution",
                               {{"task", "q01"},
                                {"iteration", 2},
                                {"report", "# fixed\n"},
                                {"writes",
                                 {{{"path", "tools/add.py"}, {"content", "# add, fixed\n"}},
                                  {{"path", "tools/convert_units.py"}, {"content", "# new helper\n"}},
                                  {{"path", "scratch/run.py"}, {"content", "print(1)\n"}}}}}));
    sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", 2}, {"evaluation", eval_more()}}));
    Harness h(playbook(sessions));
    const auto out = run_task(task("q01"), config(RunMode::ToolReuse), seed / "toolset", h.ctx);
    REQUIRE(out.iterations.size() == 3);
    CHECK(out.iterations[0].edit_stats == EditStats{0, 0});
    CHECK(out.iterations[1].edit_stats == EditStats{1, 1});
    CHECK(out.iterations[2].edit_stats == EditStats{0, 0});
    CHECK(read_file(seed / "toolset/add.py") == "# add, fixed\n");
  }

  TEST_CASE("execution sessions see the root listing and the index attachment") {
    TempDir seed;
    {
      Registry r(seed / "toolset");
      install(r, make_manifest("top", "Top tool.", {param("x", SemanticType::Integer)}, {param("y", SemanticType::Integer)}));
      install(r, make_manifest("hidden_deep", "Deep tool.", {param("x", SemanticType::Integer)}, {param("y", SemanticType::Integer)}),
              {"geom", "opt"});
      r.generate_index();
    }
    Harness h(playbook(task_sessions("q01")));
    run_task(task("q01"), config(RunMode::ToolReuse), seed / "toolset", h.ctx);
    for (const auto& s : h.backend->sessions()) {
      if (s.stage != Stage::TaskExecution) continue;
      CHECK(s.prompt.find("geom/\ntop: Top tool.") != std::string::npos);
      CHECK(s.prompt.find("hidden_deep") == std::string::npos);
      CHECK(s.visited == std::set<CategoryPath>{{}});
    }
  }

  TEST_CASE("a backend error ends the run with status error") {
    auto sessions = task_sessions("q01");
    sessions.erase(sessions.begin() + 2);  // no evaluation entry
    Harness h(playbook(sessions));
    const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::Error);
    REQUIRE(out.iterations.size() == 1);
    REQUIRE(out.iterations[0].error);
    CHECK(out.iterations[0].error->find("playbook-miss") != std::string::npos);
    CHECK(json::parse(read_file(out.workspace / "run_outcome.json"))["error"].get<std::string>().find("playbook-miss") !=
          std::string::npos);
  }

  TEST_CASE("an evaluation session that writes nothing is an error") {
    auto sessions = task_sessions("q01");
    sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", 1}}));
    Harness h(playbook(sessions));
    const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::Error);
    CHECK(out.error_detail.find("missing-evaluation-file") != std::string::npos);
  }

  TEST_CASE("forge failures are recorded without stopping the iteration") {
    auto sessions = task_sessions("q01", {"good"});
    json plan = sessions[0];
    plan["payload"]["requirements"] = {requirement("good"), requirement("bad_tests"), requirement("rejected_one")};
    sessions[0] = plan;
    sessions.push_back(session("requirement-validation", {{"subject", "bad_tests"}, {"payload", {{"accept", true}}}}));
    sessions.push_back(session("tool-generation",
                               {{"subject", "bad_tests"},
                                {"writes", {{{"path", "bad_tests.py"}, {"content", "x"}}, {{"path", "tests/t.sh"}, {"content", "exit 1\n"}}}},
                                {"payload", {{"source", "bad_tests.py"}}}}));
    sessions.push_back(session("requirement-validation",
                               {{"subject", "rejected_one"}, {"payload", {{"accept", false}, {"reason", "too narrow"}}}}));
    Harness h(playbook(sessions));
    RunConfig c = config(RunMode::ZeroShot);
    c.forge.max_rounds = 2;
    const auto out = run_task(task("q01"), c, std::nullopt, h.ctx);
    CHECK(out.status == RunStatus::Complete);
    const auto& forge = out.iterations.at(0).forge;
    REQUIRE(forge.size() == 3);
    CHECK(forge[0].outcome == "promoted");
    CHECK(forge[1].outcome == "forge_failed");
    CHECK(forge[2] == ForgeEvent{"rejected_one", "rejected", "too narrow"});
  }

  TEST_CASE("later iterations reuse a tool forged earlier") {
    auto sessions = task_sessions("q01", {"scale"});
    sessions.push_back(session("evaluation", {{"task", "q01"}, {"iteration", 1}, {"evaluation", eval_more()}}));
    json second_plan = sessions[0];
    second_plan["iteration"] = 2;
    second_plan["payload"]["requirements"] = json::array();
    second_plan["payload"]["reuse"] = {"scale"};
    sessions.push_back(second_plan);
    Harness h(playbook(sessions));
    const auto out = run_task(task("q01"), config(RunMode::ZeroShot), std::nullopt, h.ctx);
    REQUIRE(out.iterations.size() == 2);
    CHECK(out.iterations[1].reused_tools == std::vector<std::string>{"scale"});
    CHECK(out.iterations[1].forge.empty());
  }

  TEST_CASE("unknown models cost nothing and warn once") {
    std::vector<std::string> warnings;
    auto prev = log::set_sink([&](const std::string& level, const std::string& msg) {
      if (level == "warn") warnings.push_back(msg);
    });
    StageSession s;
    s.model = "model-without-price-xyz";
    s.usage = {100, 0, 0, 10};
    CHECK(session_cost(s, default_pricing(), CacheTtl::FiveMinutes).nano() == 0);
    CHECK(session_cost(s, default_pricing(), CacheTtl::FiveMinutes).nano() == 0);
    log::set_sink(prev);
    CHECK(warnings.size() == 1);
    s.model = "Claude Opus 4.6";
    s.usage = {100'000, 0, 0, 10'000};
    CHECK(session_cost(s, default_pricing(), CacheTtl::FiveMinutes).to_string() == "0.75");
  }

  TEST_CASE("curriculum shares one toolset and optimizes before each task") {
    Harness h(playbook(joined(task_sessions("q01", {"scale"}), task_sessions("q02", {}, {"scale"}))));
    const fs::path shared = h.dir / "shared";
    RunConfig c = config(RunMode::ZeroShot);
    const auto outs = run_curriculum({task("q01"), task("q02")}, c, shared, h.ctx);
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].status == RunStatus::Complete);
    CHECK(outs[1].status == RunStatus::Complete);
    CHECK(outs[1].iterations[0].reused_tools == std::vector<std::string>{"scale"});
    CHECK(Registry(shared).find("scale"));
    CHECK(fs::is_symlink(outs[0].workspace / "tools"));
    CHECK(fs::exists(shared / "INDEX.md"));
  }

  TEST_CASE("curriculum runs the reorganizer on the shared toolset") {
    Harness h(playbook({}));
    const fs::path shared = h.dir / "shared";
    std::vector<std::string> names;
    {
      Registry r(shared);
      names = install_fillers(r, 12);
    }
    json subs = {{{"name", "group"}, {"members", std::vector<std::string>(names.begin(), names.begin() + 6)}}};
    auto sessions = task_sessions("q01");
    sessions.push_back(session("toolset-reorg", {{"subject", "root"}, {"usage", {{"input", 1000}}}, {"payload", {{"subcategories", subs}}}}));
    h.reset(playbook(sessions, "Claude Opus 4.6"));
    const auto outs = run_curriculum({task("q01")}, config(RunMode::ToolReuse), shared, h.ctx);
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].status == RunStatus::Complete);
    REQUIRE(outs[0].pre_task_sessions.size() == 1);
    CHECK(outs[0].pre_task_sessions[0].session_id == "q01-i0-toolset-reorg-root-a1");
    CHECK(outs[0].total_cost.nano() == 5'000'000);
    CHECK(Registry(shared).list_children({"group"}).tools.size() == 6);
    CHECK(json::parse(read_file(outs[0].workspace / "run_outcome.json"))["pre_task_sessions"].size() == 1);
  }

  TEST_CASE("a failing task does not stop the curriculum") {
    auto sessions = task_sessions("q02");
    Harness h(playbook(sessions));
    const auto outs = run_curriculum({task("q01"), task("q02")}, config(RunMode::ZeroShot), h.dir / "shared", h.ctx);
    REQUIRE(outs.size() == 2);
    CHECK(outs[0].status == RunStatus::Error);
    CHECK(outs[1].status == RunStatus::Complete);
  }

  TEST_CASE("outcome json round trip") {
    RunOutcome o;
    o.task_id = "q01";
    o.mode = RunMode::ToolReuse;
    o.status = RunStatus::FailedBudget;
    o.total_cost = Usd::from_nano(123'456);
    o.total_usage = {1, 2, 3, 4};
    o.total_time = std::chrono::milliseconds(99);
    o.final_report_present = true;
    IterationRecord rec;
    rec.stage_sessions.push_back({Stage::Evaluation, "q01-i1-evaluation-a1", "mock", "m", {1, 0, 0, 1}, Usd::from_nano(5), true});
    o.iterations.push_back(rec);
    const json j = o;
    CHECK(j["error"].is_null());
    CHECK(j["total_cost_usd"] == Usd::from_nano(123'456).to_string());
    const auto back = j.get<RunOutcome>();
    CHECK(back.status == RunStatus::FailedBudget);
    CHECK(back.mode == RunMode::ToolReuse);
    CHECK(back.total_cost == o.total_cost);
    CHECK(back.iterations.at(0).stage_sessions == rec.stage_sessions);
  }
}
