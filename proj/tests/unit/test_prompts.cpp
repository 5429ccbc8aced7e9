#include "test_support.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/prompts.hpp"

#include <doctest.h>

using namespace toolsmith;
using testsupport::TempDir;

TEST_SUITE("prompts") {
  TEST_CASE("every stage has a compiled-in template") {
    for (Stage s : {Stage::ToolAnalysis, Stage::ToolGeneration, Stage::ToolReview, Stage::TaskExecution, Stage::Evaluation,
                    Stage::RequirementValidation, Stage::ToolsetReorg, Stage::ToolMerge}) {
      CHECK_FALSE(PromptSet::defaults().template_for(s).empty());
    }
    CHECK(detail::embedded_prompts().size() == 8);
  }

  TEST_CASE("placeholder rendering") {
    CHECK(render_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
    CHECK(render_template("{{missing}}!", {}) == "!");
    CHECK(render_template("open {{ never closed", {{"x", "1"}}) == "open {{ never closed");
    CHECK(render_template("{{x}}{{x}}", {{"x", "{{x}}"}}) == "{{x}}{{x}}");
  }

  TEST_CASE("execution prompt carries the question and the root listing only") {
    PromptInputs in;
    in.question = "Compute the HOMO-LUMO gap of benzene.";
    in.listing = "chem/\nroot_tool: Does a thing.\n";
    const auto p = select_stage_prompt(Stage::TaskExecution, in);
    CHECK(p.find(in.question) != std::string::npos);
    CHECK(p.find("chem/\nroot_tool: Does a thing.\n\n") != std::string::npos);
    CHECK(p.find("tools/INDEX.md") != std::string::npos);
    CHECK(p.find("{{") == std::string::npos);
  }

  TEST_CASE("empty listing and defaulted variables") {
    PromptInputs in;
    in.question = "q";
    CHECK(select_stage_prompt(Stage::ToolAnalysis, in).find("(empty)") != std::string::npos);
    CHECK(select_stage_prompt(Stage::Evaluation, in).find("(none)") != std::string::npos);
    in.vars["feedback"] = "Tests failed: test_basic.sh";
    CHECK(select_stage_prompt(Stage::ToolGeneration, in).find("Tests failed: test_basic.sh") != std::string::npos);
  }

  TEST_CASE("stage names") {
    PromptInputs in;
    in.question = "q";
    CHECK(select_stage_prompt("evaluation", in) == select_stage_prompt(Stage::Evaluation, in));
    try {
      select_stage_prompt("planning", in);
      FAIL("expected UnknownStage");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownStage);
    }
  }

  TEST_CASE("directory overrides replace individual templates") {
    TempDir t;
    write_file(t / "evaluation.md", "Judge: {{question}}");
    const auto set = PromptSet::with_overrides(t.path);
    PromptInputs in;
    in.question = "q1";
    CHECK(select_stage_prompt(Stage::Evaluation, in, set) == "Judge: q1");
    CHECK(set.template_for(Stage::TaskExecution) == PromptSet::defaults().template_for(Stage::TaskExecution));
  }
}
