#include "test_support.hpp"

#include "toolsmith/cli_backend.hpp"
#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/mock_backend.hpp"

#include <doctest.h>

#include <random>

using namespace toolsmith;
using namespace testsupport;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoFailure;
}

AgentRequest request(const fs::path& root, Stage stage = Stage::TaskExecution) {
  AgentRequest r;
  r.stage = stage;
  r.prompt = "do it";
  r.workspace_root = root;
  r.task_id = "q01";
  return r;
}

// Three-level tree: chem/{dft/{opt, sp}, md}, quantum/{gates}, plus root tools.
void build_hierarchy(Registry& r) {
  using T = SemanticType;
  auto tool = [&](const std::string& name, const CategoryPath& cat) {
    install(r, make_manifest(name, "Tool " + name + ".", {param("x", T::Integer)}, {param("y", T::Integer)}), cat);
  };
  tool("root_a", {});
  tool("root_b", {});
  tool("chem_util", {"chem"});
  tool("dft_driver", {"chem", "dft"});
  tool("opt_bfgs", {"chem", "dft", "opt"});
  tool("opt_fire", {"chem", "dft", "opt"});
  tool("sp_energy", {"chem", "dft", "sp"});
  tool("md_langevin", {"chem", "md"});
  tool("q_helper", {"quantum"});
  tool("gate_cx", {"quantum", "gates"});
}

}  // namespace

TEST_SUITE("agent") {
  TEST_CASE("session ids") {
    AgentRequest r;
    r.task_id = "q07";
    r.iteration = 3;
    r.stage = Stage::ToolReview;
    r.subject = "geom/opt";
    r.attempt = 2;
    CHECK(session_id_for(r) == "q07-i3-tool-review-geom.opt-a2");
    r.subject.clear();
    r.stage = Stage::Evaluation;
    r.attempt = 1;
    CHECK(session_id_for(r) == "q07-i3-evaluation-a1");
  }

  TEST_CASE("disclosure requires walking down from the root") {
    TempDir t;
    Registry r(t.path);
    build_hierarchy(r);
    Disclosure d(&r);
    CHECK(code_of([&] { d.open({"chem"}); }) == ErrorCode::PreconditionViolation);
    CHECK(d.open_text({}) == "chem/\nquantum/\nroot_a: Tool root_a.\nroot_b: Tool root_b.\n");
    CHECK(d.open({"chem"}).subcategories == std::vector<std::string>{"dft", "md"});
    CHECK(code_of([&] { d.open({"chem", "dft", "opt"}); }) == ErrorCode::PreconditionViolation);
    CHECK(code_of([&] { d.open({"chem", "nope"}); }) == ErrorCode::NoSuchCategory);
    CHECK(d.visited() == std::set<CategoryPath>{{}, {"chem"}});
    Disclosure none(nullptr);
    CHECK_FALSE(none.available());
    CHECK(code_of([&] { none.open({}); }) == ErrorCode::PreconditionViolation);
  }

  TEST_CASE("property: disclosed listings stay inside the visited prefix closure") {
    TempDir t;
    Registry r(t.path);
    build_hierarchy(r);
    const auto categories = r.categories();
    std::map<std::string, CategoryPath> home;
    for (const auto& tool : r.tools()) home[tool.manifest.name] = tool.manifest.category_path;

    std::mt19937 rng(3);
    for (int round = 0; round < 300; ++round) {
      // A random walk: each step opens a random category, which may or may
      // not be reachable from what has been opened so far.
      Disclosure d(&r);
      std::string seen;
      const int steps = std::uniform_int_distribution<int>(1, 8)(rng);
      for (int s = 0; s < steps; ++s) {
        const auto& target = categories[std::uniform_int_distribution<size_t>(0, categories.size() - 1)(rng)];
        try {
          seen += d.open_text(target);
        } catch (const Error& e) {
          CHECK(e.code() == ErrorCode::PreconditionViolation);
        }
      }
      for (const auto& [name, cat] : home) {
        if (seen.find(name + ":") != std::string::npos) CHECK_MESSAGE(d.visited().contains(cat), name);
      }
      for (const auto& v : d.visited()) {
        for (size_t k = 0; k < v.size(); ++k) CHECK(d.visited().contains(CategoryPath(v.begin(), v.begin() + k)));
      }
    }
  }

  TEST_CASE("playbook matching prefers the most specific entry, then the earliest") {
    const auto pb = parse_playbook({{"sessions",
                                     {session("task-execution", {{"report", "generic"}}),
                                      session("task-execution", {{"iteration", 2}, {"report", "second"}}),
                                      session("task-execution", {{"iteration", 2}, {"report", "second-dup"}}),
                                      session("task-execution", {{"task", "q01"}, {"iteration", 2}, {"report", "q01-second"}})}}});
    AgentRequest r;
    r.stage = Stage::TaskExecution;
    r.task_id = "q02";
    r.iteration = 1;
    CHECK(*pb.match(r)->report == "generic");
    r.iteration = 2;
    CHECK(*pb.match(r)->report == "second");
    r.task_id = "q01";
    CHECK(*pb.match(r)->report == "q01-second");
    r.stage = Stage::Evaluation;
    CHECK(pb.match(r) == nullptr);
  }

  TEST_CASE("playbook parse errors") {
    CHECK(code_of([] { parse_playbook(nlohmann::json::array()); }) == ErrorCode::ParseFailure);
    CHECK(code_of([] { parse_playbook({{"sessions", {{{"stage", "dance"}}}}}); }) == ErrorCode::ParseFailure);
    CHECK(code_of([] { parse_playbook({{"sessions", {{{"commands", {{{"argv", nlohmann::json::array()}}}}}}}}); }) ==
          ErrorCode::ParseFailure);
    CHECK(code_of([] { parse_playbook({{"sessions", {{{"writes", {{{"path", 1}}}}}}}}); }) == ErrorCode::ParseFailure);
  }

  TEST_CASE("mock backend performs writes, report, evaluation and commands") {
    TempDir t;
    JobExecutor ex;
    MockBackend mock(parse_playbook({{"model", "claude-sonnet-4"},
                                     {"sessions",
                                      {session("task-execution",
                                               {{"writes", {{{"path", "run.sh"}, {"content", "echo hi > out.txt\n"}}}},
                                                {"commands", {{{"argv", {"sh", "run.sh"}}, {"label", "run"}}}},
                                                {"report", "# done\n"},
                                                {"evaluation", eval_done()},
                                                {"payload", {{"k", 1}}},
                                                {"usage", {{"input", 10}, {"output", 2}}}})}}}),
                     &ex);
    const auto resp = spawn_session(request(t.path), mock);
    CHECK(resp.session_id == "q01-i1-task-execution-a1");
    CHECK(resp.ok);
    CHECK(resp.usage == TokenUsage{10, 0, 0, 2});
    CHECK(resp.payload == nlohmann::json{{"k", 1}});
    CHECK(read_file(t / "out.txt") == "hi\n");
    CHECK(read_file(t / "report.md") == "# done\n");
    CHECK(nlohmann::json::parse(read_file(t / "evaluation.json")) == eval_done());
    CHECK(resp.artifacts_written == std::vector<std::string>{"run.sh", "report.md", "evaluation.json"});
    CHECK(mock.count(Stage::TaskExecution) == 1);
    CHECK(mock.model() == "claude-sonnet-4");
  }

  TEST_CASE("mock backend refuses escaping writes and misses") {
    TempDir t;
    fs::create_directories(t / "ws");
    MockBackend mock(parse_playbook({{"sessions", {session("task-execution", {{"writes", {{{"path", "../x"}, {"content", ""}}}}})}}}),
                     nullptr);
    CHECK(code_of([&] { spawn_session(request(t / "ws"), mock); }) == ErrorCode::BackendFailure);
    CHECK_FALSE(fs::exists(t / "x"));
    CHECK(code_of([&] { spawn_session(request(t / "ws", Stage::Evaluation), mock); }) == ErrorCode::PlaybookMiss);
  }

  TEST_CASE("spawn checks the request") {
    TempDir t;
    MockBackend mock(parse_playbook({{"sessions", {session("task-execution")}}}), nullptr);
    auto r = request(t.path);
    r.prompt.clear();
    CHECK(code_of([&] { spawn_session(r, mock); }) == ErrorCode::InvalidArgument);
    r = request(t / "missing");
    CHECK(code_of([&] { spawn_session(r, mock); }) == ErrorCode::PreconditionViolation);
  }

  TEST_CASE("stage sessions are recorded even when they fail") {
    TempDir t;
    auto mock = std::make_shared<MockBackend>(
        parse_playbook({{"sessions", {session("task-execution", {{"fail", "ran out of ideas"}, {"usage", {{"input", 5}}}})}}}),
        nullptr);
    BackendSet set(mock);
    std::vector<StageSession> seen;
    SessionContext ctx{"q09", 1, &set, [&](const StageSession& s) { seen.push_back(s); }, {}};
    AgentRequest r = request(t.path);
    r.task_id.clear();
    CHECK(code_of([&] { run_stage_session(r, ctx); }) == ErrorCode::BackendFailure);
    REQUIRE(seen.size() == 1);
    CHECK_FALSE(seen[0].ok);
    CHECK(seen[0].session_id == "q09-i1-task-execution-a1");
    CHECK(seen[0].usage.input == 5);
    CHECK(seen[0].backend == "mock");
  }

  TEST_CASE("backend set overrides per stage") {
    auto a = std::make_shared<MockBackend>(Playbook{}, nullptr, "a");
    auto b = std::make_shared<MockBackend>(Playbook{}, nullptr, "b");
    BackendSet set(a);
    set.set(Stage::Evaluation, b);
    CHECK(set.for_stage(Stage::TaskExecution).id() == "a");
    CHECK(set.for_stage(Stage::Evaluation).id() == "b");
    BackendSet empty;
    CHECK(code_of([&] { empty.for_stage(Stage::Evaluation); }) == ErrorCode::BackendUnavailable);
  }

  TEST_CASE("cli output absorption") {
    AgentResponse resp;
    absorb_cli_output("starting\n"
                      "{\"usage\": {\"input\": 100, \"output\": 10}}\n"
                      "{\"usage\": {\"input\": 1, \"cache_read\": 50}}\n"
                      "{\"payload\": {\"v\": 1}}\n"
                      "{\"payload\": {\"v\": 2}}\n"
                      "{\"transcript\": {\"kind\": \"edit\", \"summary\": \"tools/a.py\"}}\n"
                      "{not json\n"
                      "{\"other\": 1}\n",
                      resp);
    CHECK(resp.usage == TokenUsage{101, 0, 50, 10});
    CHECK(resp.payload == nlohmann::json{{"v", 2}});
    REQUIRE(resp.transcript.size() == 4);
    CHECK(resp.transcript[0] == TranscriptStep{"output", "starting"});
    CHECK(resp.transcript[1] == TranscriptStep{"edit", "tools/a.py"});
    CHECK(resp.transcript[2] == TranscriptStep{"output", "{not json"});
    CHECK(resp.transcript[3] == TranscriptStep{"output", "{\"other\": 1}"});
  }

  TEST_CASE("cli backend drives an external agent script") {
    TempDir t;
    fs::create_directories(t / "ws");
    write_file(t / "agent.sh",
               "#!/bin/sh\n"
               "prompt=$(cat)\n"
               "echo \"$prompt\" > prompt_seen.txt\n"
               "echo \"$TOOLSMITH_STAGE\" > stage.txt\n"
               "echo '{\"usage\": {\"input\": 7, \"output\": 3}}'\n"
               "echo '{\"payload\": {\"verdict\": \"approved\"}}'\n");
    CliBackend cli({"agent", "claude-sonnet-4", {"sh", (t / "agent.sh").string()}});
    auto r = request(t / "ws", Stage::ToolReview);
    r.prompt = "review this";
    const auto resp = spawn_session(r, cli);
    CHECK(resp.ok);
    CHECK(resp.usage == TokenUsage{7, 0, 0, 3});
    CHECK(resp.payload == nlohmann::json{{"verdict", "approved"}});
    CHECK(read_file(t / "ws/prompt_seen.txt") == "review this\n");
    CHECK(read_file(t / "ws/stage.txt") == "tool-review\n");
    CHECK(resp.artifacts_written == std::vector<std::string>{"prompt_seen.txt", "stage.txt"});
  }

  TEST_CASE("cli backend failures") {
    TempDir t;
    CliBackend missing({"x", "m", {"no-such-agent-binary"}});
    CHECK(code_of([&] { missing.run(request(t.path)); }) == ErrorCode::BackendUnavailable);

    CliBackend failing({"x", "m", {"sh", "-c", "cat >/dev/null; echo broken >&2; exit 4"}});
    const auto resp = failing.run(request(t.path));
    CHECK_FALSE(resp.ok);
    CHECK(resp.failure_reason.find("code 4") != std::string::npos);
    CHECK(resp.failure_reason.find("broken") != std::string::npos);

    CliBackend slow({"x", "m", {"sleep", "30"}});
    auto r = request(t.path);
    r.session_budget = std::chrono::milliseconds(200);
    CHECK(code_of([&] { slow.run(r); }) == ErrorCode::SessionTimeout);
    CHECK(code_of([] { CliBackend({"x", "m", {}}); }) == ErrorCode::InvalidArgument);
  }
}
