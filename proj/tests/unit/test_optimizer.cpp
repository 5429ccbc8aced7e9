#include "test_support.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/optimizer.hpp"

#include <doctest.h>

#include <algorithm>

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

// Shared toolset plus a mock-backed optimizer context rooted at it.
struct Optimizer {
  TempDir dir;
  JobExecutor executor;
  std::unique_ptr<Registry> registry;
  std::shared_ptr<MockBackend> mock;
  BackendSet backends;
  ForgeContext ctx;
  ToolRuntime runtime;

  Optimizer() {
    registry = std::make_unique<Registry>(dir / "toolset");
    runtime = shim_runtime(executor, dir / "logs");
    ctx.ws = WorkspacePaths::at(registry->root());
    ctx.executor = &executor;
    ctx.generated_by = "optimizer";
    script({{"sessions", json::array()}});
  }
  void script(const json& playbook) {
    mock = std::make_shared<MockBackend>(parse_playbook(playbook), &executor);
    backends = BackendSet(mock);
    ctx.session = SessionContext{"opt", 0, &backends, {}, {}};
  }
};

std::map<std::string, std::string> digests(const Registry& r) {
  std::map<std::string, std::string> out;
  for (const auto& t : r.tools()) out[t.manifest.name] = sha256_hex(read_file(t.source_path));
  return out;
}

json reorg(const std::string& subject, const std::vector<std::pair<std::string, std::vector<std::string>>>& groups) {
  json subs = json::array();
  for (const auto& [name, members] : groups) subs.push_back({{"name", name}, {"members", members}});
  return session("toolset-reorg", {{"subject", subject}, {"payload", {{"subcategories", subs}}}});
}

std::vector<std::string> slice(const std::vector<std::string>& v, size_t from, size_t to) {
  return {v.begin() + from, v.begin() + to};
}

json merge_session(const Registry& r, const std::string& a, const std::string& b, const std::string& unified, int attempt = 1) {
  return session("tool-merge", {{"subject", a + "+" + b}, {"attempt", attempt}, {"payload", merge_payload(r, a, b, unified)}});
}

json review_session(const std::string& unified, const std::string& verdict, int attempt) {
  json payload{{"verdict", verdict}};
  if (verdict == "revise") payload["issues"] = {"unit handling differs between members"};
  return session("tool-review", {{"subject", unified}, {"attempt", attempt}, {"payload", payload}});
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("oversized scan counts tools and subdirectories") {
    Optimizer o;
    install_fillers(*o.registry, 10);
    CHECK(scan_oversized(*o.registry, 10).empty());
    install_fillers(*o.registry, 11);  // one more, re-registering the first ten unchanged
    CHECK(scan_oversized(*o.registry, 10) == std::vector<CategoryPath>{{}});
    CHECK(code_of([&] { scan_oversized(*o.registry, 0); }) == ErrorCode::InvalidArgument);
    install(*o.registry, make_manifest("nested", "n", {}, {param("v", SemanticType::String)}), {"sub"});
    CHECK(o.registry->list_children().subcategories.size() == 1);
    CHECK(scan_oversized(*o.registry, 11) == std::vector<CategoryPath>{{}});
  }

  TEST_CASE("reorg plan validation") {
    Optimizer o;
    const auto names = install_fillers(*o.registry, 6);
    auto plan = [&](std::vector<Subcategory> subs) { return ReorgPlan{{}, std::move(subs), {}}; };
    const auto ok = validate_reorg(plan({{"a", {names[0], names[1]}}, {"b", {names[2]}}}), *o.registry);
    auto rest = slice(names, 3, 6);
    std::sort(rest.begin(), rest.end());
    CHECK(ok.unmoved == rest);
    CHECK(children_after(ok, *o.registry) == 5);
    CHECK(code_of([&] { validate_reorg(plan({{"bad name", {names[0]}}}), *o.registry); }) == ErrorCode::InvalidPlan);
    CHECK(code_of([&] { validate_reorg(plan({{names[1], {names[0]}}}), *o.registry); }) == ErrorCode::InvalidPlan);
    CHECK(code_of([&] { validate_reorg(plan({{"a", {names[0]}}, {"a", {names[1]}}}), *o.registry); }) == ErrorCode::InvalidPlan);
    CHECK(code_of([&] { validate_reorg(plan({{"a", {}}}), *o.registry); }) == ErrorCode::InvalidPlan);
    CHECK(code_of([&] { validate_reorg(plan({{"a", {"ghost"}}}), *o.registry); }) == ErrorCode::InvalidPlan);
    CHECK(code_of([&] { validate_reorg(plan({{"a", {names[0]}}, {"b", {names[0]}}}), *o.registry); }) == ErrorCode::InvalidPlan);
  }

  TEST_CASE("apply_reorg moves tools and regenerates the index") {
    Optimizer o;
    const auto names = install_fillers(*o.registry, 6);
    apply_reorg({{}, {{"group_a", slice(names, 0, 3)}}, {}}, *o.registry);
    CHECK(o.registry->list_children({"group_a"}).tools.size() == 3);
    CHECK(o.registry->resolve(names[0]).manifest.category_path == CategoryPath{"group_a"});
    CHECK(read_file(o.registry->root() / "INDEX.md").find("- group_a/\n") != std::string::npos);
  }

  TEST_CASE("a fault mid-reorganization restores the tree") {
    Optimizer o;
    const auto names = install_fillers(*o.registry, 8);
    o.registry->generate_index();
    const auto before = tree_bytes(o.registry->root());
    const ReorgPlan plan{{}, {{"g1", slice(names, 0, 3)}, {"g2", slice(names, 3, 6)}}, {}};
    for (size_t fail_at : {0u, 2u, 4u, 6u}) {
      auto hook = [&](std::string_view, size_t i) {
        if (i == fail_at) throw std::runtime_error("injected");
      };
      CHECK(code_of([&] { apply_reorg(plan, *o.registry, hook); }) == ErrorCode::IoFailure);
      CHECK(tree_bytes(o.registry->root()) == before);
      CHECK(o.registry->list_children().subcategories.empty());
    }
  }

  TEST_CASE("reorganization of a 25-tool flat toolset") {
    Optimizer o;
    const auto names = install_fillers(*o.registry, 25);
    const auto before = digests(*o.registry);
    o.script({{"sessions",
               {reorg("root", {{"structure", slice(names, 0, 9)},
                               {"dynamics", slice(names, 9, 17)},
                               {"quantum", slice(names, 17, 25)}})}}});
    HashEmbedder e;
    const auto report = optimize(*o.registry, {.threshold = 10}, o.ctx, o.runtime, e);
    CHECK(report.reorgs_applied == 1);
    CHECK(report.tools_before == 25);
    CHECK(report.tools_after == 25);
    CHECK(scan_oversized(*o.registry, 10).empty());
    CHECK(digests(*o.registry) == before);
    for (const auto& n : names) CHECK(invoke_tool(*o.registry, n, {{"value", "v"}}, o.runtime) == json{{"value", "v"}});
    CHECK(o.mock->sessions().at(0).prompt.find("parse_pdb_header(value: string) -> value: string") != std::string::npos);
  }

  TEST_CASE("nested reorganization runs extra passes") {
    Optimizer o;
    const auto names = install_fillers(*o.registry, 24);
    o.script({{"sessions",
               {reorg("root", {{"big", slice(names, 0, 20)}}),
                reorg("big", {{"half_a", slice(names, 0, 10)}, {"half_b", slice(names, 10, 20)}})}}});
    HashEmbedder e;
    const auto report = optimize(*o.registry, {.threshold = 10}, o.ctx, o.runtime, e);
    CHECK(report.reorgs_applied == 2);
    CHECK(scan_oversized(*o.registry, 10).empty());
    CHECK(o.registry->resolve(names[0]).manifest.category_path == CategoryPath{"big", "half_a"});
  }

  TEST_CASE("a plan that makes no progress ends the passes with a warning") {
    Optimizer o;
    install_fillers(*o.registry, 12);
    o.script({{"sessions", {reorg("root", {})}}});
    HashEmbedder e;
    const auto report = optimize(*o.registry, {.threshold = 10}, o.ctx, o.runtime, e);
    CHECK(report.reorgs_applied == 0);
    CHECK(report.warnings.size() == 1);
    CHECK(o.mock->count(Stage::ToolsetReorg) == 1);
  }

  TEST_CASE("signatures") {
    Optimizer o;
    install_strict_corpus(*o.registry);
    const auto s = extract_signatures(*o.registry);
    CHECK(s.front().name == "add");
    CHECK(s.front().text == "add(a: integer, b: integer) -> sum: integer | Add two integers.");
  }

  TEST_CASE("merge payload parsing") {
    Optimizer o;
    install_merge_corpus(*o.registry);
    const MergeCluster c{{"single_point_energy", "single_point_energy_solvated"}, 0.9};
    CHECK_FALSE(parse_merge_payload({{"merge", false}}, c, *o.registry));
    const json good = merge_payload(*o.registry, c.members[0], c.members[1], "single_point");
    const auto p = parse_merge_payload(good, c, *o.registry);
    REQUIRE(p);
    CHECK(p->supersedes == c.members);
    CHECK(p->probe);

    auto broken = [&](auto mutate) {
      json j = good;
      mutate(j);
      return code_of([&] { parse_merge_payload(j, c, *o.registry); });
    };
    CHECK(broken([](json& j) { j.erase("merge"); }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["unified_name"] = "other"; }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["supersedes"] = json::array(); }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["supersedes"] = {"single_point_energy", "thermochemistry"}; }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["supersedes"] = {"single_point_energy", "single_point_energy"}; }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["source"] = ""; }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) {
            j["unified_name"] = "thermochemistry";
            j["manifest"]["name"] = "thermochemistry";
          }) == ErrorCode::InvalidProposal);
    CHECK(broken([](json& j) { j["manifest"]["inputs"] = "nope"; }) == ErrorCode::InvalidProposal);
  }

  TEST_CASE("merging the corpus goes from 18 to 15 tools") {
    Optimizer o;
    const auto pairs = install_merge_corpus(*o.registry);
    json sessions = json::array();
    for (const auto& [a, b] : pairs) {
      sessions.push_back(merge_session(*o.registry, a, b, a + "_unified"));
      sessions.push_back(review_session(a + "_unified", "approved", 1));
    }
    o.script({{"sessions", sessions}});
    HashEmbedder e;
    const auto report = optimize(*o.registry, {.threshold = 100, .merge = true}, o.ctx, o.runtime, e);
    CHECK(report.merges_applied == 3);
    CHECK(report.merges_rolled_back == 0);
    CHECK(report.tools_before == 18);
    CHECK(report.tools_after == 15);
    for (const auto& [a, b] : pairs) {
      CHECK_FALSE(o.registry->find(a));
      CHECK_FALSE(o.registry->find(b));
      const auto u = o.registry->resolve(a + "_unified");
      CHECK(u.manifest.provenance.generated_by == "fixture");
    }
    CHECK_FALSE(fs::exists(o.registry->root() / ".merge_staging"));
    const auto index = read_file(o.registry->root() / "INDEX.md");
    CHECK(index.find("optimize_geometry_unified") != std::string::npos);
    CHECK(index.find("- optimize_geometry_solvated:") == std::string::npos);
  }

  TEST_CASE("verification failing twice restores the originals byte-identically") {
    Optimizer o;
    install_merge_corpus(*o.registry);
    o.registry->generate_index();
    const auto before = tree_bytes(o.registry->root());
    const std::string a = "single_point_energy", b = "single_point_energy_solvated", u = "single_point";
    o.script({{"sessions",
               {merge_session(*o.registry, a, b, u, 1), merge_session(*o.registry, a, b, u, 2), review_session(u, "revise", 1),
                review_session(u, "revise", 2)}}});
    const auto proposal = propose_merge({{a, b}, 0.9}, *o.registry, o.ctx);
    REQUIRE(proposal);
    const auto r = apply_merge_with_rollback(*proposal, *o.registry, o.ctx, o.runtime);
    CHECK_FALSE(r.merged);
    CHECK(r.attempts == 2);
    CHECK(r.reason.find("review requested changes") != std::string::npos);
    CHECK(tree_bytes(o.registry->root()) == before);
    CHECK(o.registry->tool_count() == 18);
    CHECK(fs::is_directory(r.backup.backup_dir));
    CHECK(r.backup.entries.size() == 5);  // two sources, two sidecars, INDEX.md

    const auto sessions = o.mock->sessions();
    // merge 1, review 1, merge 2 with the review feedback, review 2
    REQUIRE(sessions.size() == 4);
    CHECK(sessions[2].stage == Stage::ToolMerge);
    CHECK(sessions[2].attempt == 2);
    CHECK(sessions[2].prompt.find("review requested changes") != std::string::npos);
  }

  TEST_CASE("a silent-fallback unified tool fails verification before review") {
    Optimizer o;
    install_merge_corpus(*o.registry);
    const std::string a = "thermochemistry", b = "vibrational_frequencies", u = "hessian_analysis";
    json first = merge_session(*o.registry, a, b, u, 1);
    first["payload"]["manifest"]["entrypoint"]["callable"] = "silent_fallback";
    json second = merge_session(*o.registry, a, b, u, 2);
    o.script({{"sessions", {first, second, review_session(u, "approved", 2)}}});
    const auto proposal = propose_merge({{a, b}, 0.9}, *o.registry, o.ctx);
    const auto r = apply_merge_with_rollback(*proposal, *o.registry, o.ctx, o.runtime);
    CHECK(r.merged);
    CHECK(r.attempts == 2);
    CHECK(o.mock->count(Stage::ToolReview) == 1);
    CHECK(o.mock->sessions().at(1).prompt.find("silent fallback") != std::string::npos);
    CHECK(o.registry->resolve(u).manifest.entrypoint.callable == "echo");
  }

  TEST_CASE("a fault while swapping restores the originals") {
    Optimizer o;
    install_merge_corpus(*o.registry);
    o.registry->generate_index();
    const auto before = tree_bytes(o.registry->root());
    const std::string a = "optimize_geometry", b = "optimize_geometry_solvated", u = "geometry_optimizer";
    o.script({{"sessions", {merge_session(*o.registry, a, b, u), review_session(u, "approved", 1)}}});
    const auto proposal = propose_merge({{a, b}, 0.9}, *o.registry, o.ctx);
    for (size_t fail_at : {1u, 2u, 3u}) {
      MergeHooks hooks{[&](std::string_view, size_t i) {
        if (i == fail_at) throw std::runtime_error("injected");
      }};
      CHECK(code_of([&] { apply_merge_with_rollback(*proposal, *o.registry, o.ctx, o.runtime, hooks); }) == ErrorCode::IoFailure);
      CHECK(tree_bytes(o.registry->root()) == before);
    }
  }

  TEST_CASE("a withdrawn merge after feedback is rolled back") {
    Optimizer o;
    install_merge_corpus(*o.registry);
    const auto before = tree_bytes(o.registry->root());
    const std::string a = "optimize_geometry", b = "optimize_geometry_solvated", u = "geometry_optimizer";
    o.script({{"sessions",
               {merge_session(*o.registry, a, b, u),
                session("tool-merge", {{"subject", a + "+" + b}, {"attempt", 2}, {"payload", {{"merge", false}}}}),
                review_session(u, "revise", 1)}}});
    const auto proposal = propose_merge({{a, b}, 0.9}, *o.registry, o.ctx);
    const auto r = apply_merge_with_rollback(*proposal, *o.registry, o.ctx, o.runtime);
    CHECK_FALSE(r.merged);
    CHECK(r.reason.starts_with("backend withdrew"));
    CHECK(tree_bytes(o.registry->root()) == before);
  }
}
