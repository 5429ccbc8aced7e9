#include "toolsmith/forge.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace toolsmith {
namespace {

std::vector<ParamSpec> param_list(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array()) throw Error(ErrorCode::PlanParseFailure, where + "." + key + " must be an array");
  try {
    return it->get<std::vector<ParamSpec>>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::PlanParseFailure, where + "." + key + ": " + e.what());
  }
}

std::string string_field(const nlohmann::json& j, const char* key, const std::string& where, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw Error(ErrorCode::PlanParseFailure, where + ": missing " + key);
    return {};
  }
  if (!it->is_string()) throw Error(ErrorCode::PlanParseFailure, where + "." + key + " must be a string");
  return it->get<std::string>();
}

std::string describe_requirement(const ToolRequirement& r) {
  std::ostringstream out;
  out << "name: " << r.name << "\n"
      << "description: " << r.description << "\n"
      << "method: " << (r.method_hint.empty() ? "(unspecified)" : r.method_hint) << "\n"
      << "inputs: " << render_params(r.inputs) << "\n"
      << "outputs: " << render_params(r.outputs);
  return out.str();
}

std::string summarize_tests(const std::vector<TestOutcome>& tests) {
  if (tests.empty()) return "no tests found under tests/";
  std::string out;
  for (const auto& t : tests) {
    out += (t.passed ? "PASS " : "FAIL ") + t.name;
    if (!t.passed && !t.detail.empty()) out += "\n" + t.detail;
    out += "\n";
  }
  return out;
}

bool all_passed(const std::vector<TestOutcome>& tests) {
  return !tests.empty() && std::all_of(tests.begin(), tests.end(), [](const TestOutcome& t) { return t.passed; });
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (word) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array()) throw Error(ErrorCode::ParseFailure, std::string("review.") + key + " must be an array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw Error(ErrorCode::ParseFailure, std::string("review.") + key + " must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const ToolRequirement& r) {
  j = {{"name", r.name}, {"description", r.description}, {"method_hint", r.method_hint},
       {"inputs", r.inputs}, {"outputs", r.outputs}};
}

AnalysisPlan parse_plan(const nlohmann::json& payload) {
  if (!payload.is_object()) throw Error(ErrorCode::PlanParseFailure, "plan must be an object");
  AnalysisPlan plan;
  plan.task_analysis = string_field(payload, "task_analysis", "plan", true);

  if (auto it = payload.find("reuse"); it != payload.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::PlanParseFailure, "plan.reuse must be an array");
    for (const auto& n : *it) {
      if (!n.is_string()) throw Error(ErrorCode::PlanParseFailure, "plan.reuse must hold tool names");
      const auto name = n.get<std::string>();
      if (std::find(plan.reuse.begin(), plan.reuse.end(), name) == plan.reuse.end()) plan.reuse.push_back(name);
    }
  }

  std::set<std::string> seen;
  if (auto it = payload.find("requirements"); it != payload.end() && !it->is_null()) {
    if (!it->is_array()) throw Error(ErrorCode::PlanParseFailure, "plan.requirements must be an array");
    for (const auto& r : *it) {
      if (!r.is_object()) throw Error(ErrorCode::PlanParseFailure, "plan.requirements entries must be objects");
      ToolRequirement req;
      req.name = string_field(r, "name", "requirement", true);
      const std::string where = "requirement " + req.name;
      if (!is_tool_name(req.name)) throw Error(ErrorCode::PlanParseFailure, where + ": name is not an identifier");
      if (!seen.insert(req.name).second) throw Error(ErrorCode::PlanParseFailure, where + ": listed twice");
      req.description = string_field(r, "description", where, true);
      req.method_hint = string_field(r, "method_hint", where, false);
      req.inputs = param_list(r, "inputs", where);
      req.outputs = param_list(r, "outputs", where);
      auto problems = validate_params(req.inputs, "inputs");
      for (auto& p : validate_params(req.outputs, "outputs")) problems.push_back(std::move(p));
      if (!problems.empty()) throw Error(ErrorCode::PlanParseFailure, where + ": " + problems.front(), problems);
      plan.requirements.push_back(std::move(req));
    }
  }
  return plan;
}

AnalysisPlan analyze_task(const TaskSpec& task, const Registry& registry, const ForgeContext& ctx) {
  auto disclosure = std::make_shared<Disclosure>(&registry);
  PromptInputs in;
  in.question = task.prompt;
  in.listing = disclosure->open_text({});

  AgentRequest req;
  req.stage = Stage::ToolAnalysis;
  req.prompt = select_stage_prompt(Stage::ToolAnalysis, in, *ctx.prompts);
  req.workspace_root = ctx.ws.root;
  req.task_id = task.id;
  req.iteration = ctx.session.iteration;
  req.disclosure = disclosure;
  const auto resp = run_stage_session(std::move(req), ctx.session);
  if (!resp.payload) throw Error(ErrorCode::PlanParseFailure, "analyzer returned no plan");

  AnalysisPlan plan = parse_plan(*resp.payload);
  for (const auto& name : plan.reuse) {
    if (!registry.find(name)) throw Error(ErrorCode::DanglingReuse, "plan reuses unknown tool " + name);
  }
  for (const auto& r : plan.requirements) {
    if (registry.find(r.name)) throw Error(ErrorCode::RequirementCollision, "requirement " + r.name + " names an existing tool");
  }
  return plan;
}

std::optional<std::string> requirement_rule_violation(const ToolRequirement& req, const std::string& task_id) {
  if (req.inputs.empty() && req.outputs.empty()) return "no inputs and no outputs";
  if (!task_id.empty()) {
    for (const auto& tok : word_tokens(req.description)) {
      if (tok == task_id) return "description names task " + task_id;
    }
  }
  return std::nullopt;
}

RequirementVerdict validate_requirement(const ToolRequirement& req, const ForgeContext& ctx) {
  if (auto why = requirement_rule_violation(req, ctx.session.task_id)) return {false, *why};

  PromptInputs in;
  in.vars["requirement"] = describe_requirement(req);
  AgentRequest ar;
  ar.stage = Stage::RequirementValidation;
  ar.prompt = select_stage_prompt(Stage::RequirementValidation, in, *ctx.prompts);
  ar.workspace_root = ctx.ws.root;
  ar.iteration = ctx.session.iteration;
  ar.subject = req.name;
  const auto resp = run_stage_session(std::move(ar), ctx.session);
  if (!resp.payload || !resp.payload->is_object() || !resp.payload->contains("accept") ||
      !resp.payload->at("accept").is_boolean()) {
    throw Error(ErrorCode::BackendFailure, "validator returned no accept verdict for " + req.name);
  }
  RequirementVerdict v;
  v.accept = resp.payload->at("accept").get<bool>();
  v.reason = resp.payload->value("reason", "");
  return v;
}

nlohmann::json to_json(const ReviewRecord& r) {
  return {{"iteration", r.iteration},
          {"verdict", r.approved ? "approved" : "revise"},
          {"issues", r.issues},
          {"fixes_applied", r.fixes_applied}};
}

ReviewRecord parse_review(const nlohmann::json& payload, int iteration) {
  if (!payload.is_object()) throw Error(ErrorCode::ParseFailure, "review must be an object");
  ReviewRecord r;
  r.iteration = iteration;
  const auto verdict = payload.value("verdict", "");
  if (verdict == "approved") {
    r.approved = true;
  } else if (verdict != "revise") {
    throw Error(ErrorCode::ParseFailure, "review verdict must be approved or revise, got \"" + verdict + "\"");
  }
  r.issues = string_list(payload, "issues");
  r.fixes_applied = string_list(payload, "fixes_applied");
  if (r.approved) {
    for (const auto& issue : r.issues) {
      if (std::find(r.fixes_applied.begin(), r.fixes_applied.end(), issue) == r.fixes_applied.end()) {
        throw Error(ErrorCode::ParseFailure, "approved review leaves issue unfixed: " + issue);
      }
    }
  }
  return r;
}

bool DraftArtifact::tests_passed() const { return all_passed(test_results); }

fs::path sandbox_dir_for(const WorkspacePaths& ws, const std::string& task_id, const std::string& requirement) {
  return ws.tool_smith_dir / ("task_" + task_id) / requirement;
}

std::vector<TestOutcome> run_sandbox_tests(const fs::path& sandbox, const JobExecutor& executor) {
  std::vector<TestOutcome> out;
  const fs::path dir = sandbox / "tests";
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && !e.path().filename().string().starts_with(".")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    JobRequest job;
    const auto ext = f.extension().string();
    if (ext == ".sh") {
      job.command = {"sh", f.string()};
    } else if (ext == ".py") {
      job.command = {"python3", f.string()};
    } else {
      job.command = {f.string()};
    }
    job.working_dir = sandbox;
    job.label = "test_" + f.stem().string();
    job.timeout = std::chrono::minutes(5);
    TestOutcome t{f.filename().string(), false, {}};
    try {
      const auto r = executor.submit(job, sandbox / "logs");
      t.passed = r.exit_code == 0;
      if (!t.passed) {
        t.detail = "exit " + std::to_string(r.exit_code) + (r.timed_out ? " (timed out)" : "");
        const auto err = tail_log(r.stderr_log, 20);
        const auto outp = tail_log(r.stdout_log, 20);
        if (!outp.empty()) t.detail += "\n" + outp;
        if (!err.empty()) t.detail += "\n" + err;
      }
    } catch (const Error& e) {
      t.detail = e.what();
    }
    out.push_back(std::move(t));
  }
  return out;
}

DraftArtifact forge_tool(const ToolRequirement& req, const ForgeContext& ctx, int max_rounds) {
  if (max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max_rounds must be >= 1");
  if (!ctx.executor) throw Error(ErrorCode::InvalidArgument, "forge needs an executor");
  const fs::path sandbox = sandbox_dir_for(ctx.ws, ctx.session.task_id, req.name);
  std::error_code ec;
  fs::create_directories(sandbox / "tests", ec);
  fs::create_directories(sandbox / "logs", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create sandbox " + sandbox.string() + ": " + ec.message());

  std::string feedback;
  std::vector<TestOutcome> last;
  for (int round = 1; round <= max_rounds; ++round) {
    const std::string default_source = req.name + ".py";
    PromptInputs in;
    in.vars = {{"requirement", describe_requirement(req)},
               {"source", default_source},
               {"callable", req.name},
               {"feedback", feedback}};
    AgentRequest ar;
    ar.stage = Stage::ToolGeneration;
    ar.prompt = select_stage_prompt(Stage::ToolGeneration, in, *ctx.prompts);
    ar.workspace_root = ctx.ws.root;
    ar.working_dir = sandbox;
    ar.iteration = ctx.session.iteration;
    ar.subject = req.name;
    ar.attempt = round;
    const auto resp = run_stage_session(std::move(ar), ctx.session);

    Entrypoint entry{default_source, req.name};
    if (resp.payload && resp.payload->is_object()) {
      entry.source = resp.payload->value("source", entry.source);
      entry.callable = resp.payload->value("callable", entry.callable);
    }
    const fs::path source_path = sandbox / entry.source;
    if (entry.source.find('/') != std::string::npos || !entry.source.starts_with(req.name + ".")) {
      last.clear();
      feedback = "source must be a file named " + req.name + ".<ext> in the sandbox, got " + entry.source;
      continue;
    }
    if (!fs::exists(source_path)) {
      last.clear();
      feedback = "source file " + entry.source + " was not written";
      continue;
    }
    last = run_sandbox_tests(sandbox, *ctx.executor);
    if (!all_passed(last)) {
      feedback = summarize_tests(last);
      continue;
    }

    DraftArtifact d;
    d.requirement = req;
    d.sandbox_dir = sandbox;
    d.source = read_file(source_path);
    d.test_results = std::move(last);
    d.rounds = round;
    d.manifest.name = req.name;
    d.manifest.description = req.description;
    d.manifest.inputs = req.inputs;
    d.manifest.outputs = req.outputs;
    d.manifest.entrypoint = entry;
    d.manifest.provenance = {ctx.generated_by, ctx.session.task_id, utc_iso8601()};
    d.manifest.tests_passed = true;
    write_file(sandbox / (req.name + std::string(kManifestSuffix)), manifest_text(d.manifest));
    return d;
  }
  throw Error(ErrorCode::BudgetExhausted,
              req.name + ": tests still failing after " + std::to_string(max_rounds) + " rounds",
              {{"rounds", max_rounds}, {"feedback", feedback}});
}

DraftArtifact review_tool(DraftArtifact draft, const ForgeContext& ctx, int max_reviews) {
  if (max_reviews < 1) throw Error(ErrorCode::InvalidArgument, "max_reviews must be >= 1");
  if (!draft.tests_passed()) throw Error(ErrorCode::PreconditionViolation, draft.requirement.name + ": review needs passing tests");
  const fs::path source_path = draft.sandbox_dir / draft.manifest.entrypoint.source;

  for (int n = 1; n <= max_reviews; ++n) {
    PromptInputs in;
    in.vars = {{"requirement", describe_requirement(draft.requirement)},
               {"source", draft.manifest.entrypoint.source},
               {"feedback", summarize_tests(draft.test_results)}};
    AgentRequest ar;
    ar.stage = Stage::ToolReview;
    ar.prompt = select_stage_prompt(Stage::ToolReview, in, *ctx.prompts);
    ar.workspace_root = ctx.ws.root;
    ar.working_dir = draft.sandbox_dir;
    ar.iteration = ctx.session.iteration;
    ar.subject = draft.requirement.name;
    ar.attempt = n;
    const auto resp = run_stage_session(std::move(ar), ctx.session);
    if (!resp.payload) throw Error(ErrorCode::BackendFailure, "reviewer returned no verdict for " + draft.requirement.name);
    ReviewRecord rec = parse_review(*resp.payload, n);

    // The reviewer may edit the source or the tests in place.
    draft.source = fs::exists(source_path) ? read_file(source_path) : std::string();
    draft.test_results = run_sandbox_tests(draft.sandbox_dir, *ctx.executor);
    if (rec.approved && !draft.tests_passed()) {
      rec.approved = false;
      rec.issues.push_back("tests fail after the reviewer's fixes");
    }
    write_file(draft.sandbox_dir / ("review_iter_" + std::to_string(n) + ".json"), to_json(rec).dump(2) + "\n");
    draft.reviews.push_back(rec);
    if (rec.approved) return draft;
  }
  throw Error(ErrorCode::BudgetExhausted,
              draft.requirement.name + ": not approved after " + std::to_string(max_reviews) + " reviews",
              {{"reviews", max_reviews}});
}

RegisterOutcome promote_tool(const DraftArtifact& draft, Registry& registry) {
  if (!draft.approved()) throw Error(ErrorCode::PreconditionViolation, draft.manifest.name + ": draft not approved");
  if (!draft.tests_passed()) throw Error(ErrorCode::PreconditionViolation, draft.manifest.name + ": draft tests failing");
  ToolManifest m = draft.manifest;
  m.category_path.clear();
  m.tests_passed = true;
  return registry.register_tool(m, draft.source);
}

nlohmann::json invalid_input_for(const ToolManifest& m) {
  const ParamSpec* target = nullptr;
  for (const auto& p : m.inputs) {
    if (p.required) {
      target = &p;
      break;
    }
  }
  if (!target && !m.inputs.empty()) target = &m.inputs.front();
  if (!target) return nlohmann::json::array({"not-a-record"});
  nlohmann::json input = nlohmann::json::object();
  input[target->name] = mistyped_value(*target);
  return input;
}

ContractVerdict contract_check(const std::string& name, const Registry& registry, const ToolRuntime& runtime,
                               const std::optional<nlohmann::json>& probe) {
  const auto tool = registry.resolve(name);
  ContractVerdict v;
  auto fail = [&](std::string why) {
    v.pass = false;
    v.reasons.push_back(std::move(why));
  };

  const auto bad = invoke_raw(tool, invalid_input_for(tool.manifest), runtime);
  if (bad.job.timed_out) {
    fail("timed out on invalid input");
  } else if (!bad.output) {
    fail("no structured error on invalid input: " + bad.wire_error);
  } else if (bad.output->ok) {
    fail("silent fallback on invalid input");
  }

  if (probe) {
    if (auto problems = check_record(tool.manifest.inputs, *probe, "probe"); !problems.empty()) {
      fail("probe input does not match the manifest: " + problems.front());
    } else {
      const auto good = invoke_raw(tool, *probe, runtime);
      if (good.job.timed_out) {
        fail("timed out on the probe input");
      } else if (!good.output) {
        fail("malformed output on the probe input: " + good.wire_error);
      } else if (!good.output->ok) {
        fail("probe input failed: " + good.output->failure.error_type + ": " + good.output->failure.message);
      } else if (auto out = check_record(tool.manifest.outputs, good.output->outputs, "outputs"); !out.empty()) {
        fail("probe output violates the manifest: " + out.front());
      }
    }
  }
  return v;
}

}  // namespace toolsmith
