#include "toolsmith/workspace.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/pricing.hpp"

#include <algorithm>

namespace toolsmith {
namespace {

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + p.string() + ": " + ec.message());
}

void copy_if_present(const fs::path& from, const fs::path& to) {
  std::error_code ec;
  if (!fs::exists(from, ec)) return;
  fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot archive " + from.string() + ": " + ec.message());
}

}  // namespace

std::string_view to_string(RunMode m) noexcept {
  switch (m) {
    case RunMode::ZeroShot: return "zero_shot";
    case RunMode::ToolReuse: return "tool_reuse";
    case RunMode::EvaluatorOnly: return "evaluator_only";
  }
  return "unknown";
}

std::optional<RunMode> run_mode_from_string(std::string_view s) noexcept {
  if (s == "zero_shot" || s == "zs") return RunMode::ZeroShot;
  if (s == "tool_reuse" || s == "tr") return RunMode::ToolReuse;
  if (s == "evaluator_only" || s == "eo") return RunMode::EvaluatorOnly;
  return std::nullopt;
}

void validate_task(const TaskSpec& task) {
  if (!is_safe_identifier(task.id)) throw Error(ErrorCode::InvalidArgument, "task id \"" + task.id + "\" is not filesystem-safe");
  if (task.prompt.empty()) throw Error(ErrorCode::InvalidArgument, "task " + task.id + ": empty prompt");
  for (const auto& f : task.input_files) {
    const fs::path rel(f.path);
    if (f.path.empty() || rel.is_absolute() || !is_within(fs::path("ws"), rel) ||
        rel.lexically_normal() == fs::path(".") || rel.lexically_normal().filename().empty()) {
      throw Error(ErrorCode::InvalidArgument, "task " + task.id + ": input file path \"" + f.path + "\" escapes the workspace");
    }
  }
}

void to_json(nlohmann::json& j, const TaskSpec& t) {
  j = {{"id", t.id}, {"prompt", t.prompt}, {"mode", to_string(t.mode)}};
  auto files = nlohmann::json::array();
  for (const auto& f : t.input_files) files.push_back({{"path", f.path}, {"content", f.bytes}});
  j["input_files"] = std::move(files);
  if (t.rubric_ref) j["rubric_ref"] = *t.rubric_ref;
}

void from_json(const nlohmann::json& j, TaskSpec& t) {
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "task: expected an object");
  try {
    t.id = j.at("id").get<std::string>();
    t.prompt = j.at("prompt").get<std::string>();
    t.mode = RunMode::ZeroShot;
    if (auto m = j.find("mode"); m != j.end()) {
      auto mode = run_mode_from_string(m->get<std::string>());
      if (!mode) throw Error(ErrorCode::ParseFailure, "task: unknown mode " + m->dump());
      t.mode = *mode;
    }
    t.input_files.clear();
    for (const auto& f : j.value("input_files", nlohmann::json::array())) {
      t.input_files.push_back({f.at("path").get<std::string>(), f.at("content").get<std::string>()});
    }
    t.rubric_ref.reset();
    if (auto r = j.find("rubric_ref"); r != j.end() && !r->is_null()) t.rubric_ref = r->get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("task: ") + e.what());
  }
}

WorkspacePaths WorkspacePaths::at(const fs::path& root) {
  WorkspacePaths p;
  p.root = root;
  p.question = root / "question.md";
  p.tools_dir = root / "tools";
  p.tool_smith_dir = root / "tool_smith";
  p.logs_dir = root / "logs";
  p.img_dir = root / "img";
  p.report = root / "report.md";
  p.evaluation = root / "evaluation.json";
  return p;
}

WorkspacePaths init_workspace(const TaskSpec& task, const fs::path& base_dir, bool overwrite) {
  validate_task(task);
  if (!fs::is_directory(base_dir)) throw Error(ErrorCode::IoFailure, "base directory " + base_dir.string() + " does not exist");
  const auto ws = WorkspacePaths::at(base_dir / task.id);
  std::error_code ec;
  if (fs::exists(fs::symlink_status(ws.root, ec))) {
    if (!overwrite) throw Error(ErrorCode::WorkspaceExists, ws.root.string());
    fs::remove_all(ws.root, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot clear " + ws.root.string() + ": " + ec.message());
  }
  for (const auto& d : {ws.tools_dir, ws.tool_smith_dir, ws.logs_dir, ws.img_dir}) make_dir(d);
  write_file(ws.question, task.prompt);
  for (const auto& f : task.input_files) write_file(ws.root / f.path, f.bytes);
  return ws;
}

ToolSnapshot snapshot_dir(const fs::path& dir) {
  ToolSnapshot snap;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoFailure, dir.string() + " is not a directory");
  const fs::path base = fs::canonical(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot resolve " + dir.string() + ": " + ec.message());
  for (auto it = fs::recursive_directory_iterator(base); it != fs::recursive_directory_iterator(); ++it) {
    if (it->path().filename().string().starts_with(".")) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file()) continue;
    snap.entries[relative_key(base, it->path())] = sha256_hex(read_file(it->path()));
  }
  return snap;
}

ToolSnapshot snapshot_tools(const WorkspacePaths& ws) { return snapshot_dir(ws.tools_dir); }

EditStats diff_tool_edits(const ToolSnapshot& before, const ToolSnapshot& after) {
  EditStats s;
  for (const auto& [key, digest] : after.entries) {
    auto it = before.entries.find(key);
    if (it == before.entries.end()) {
      ++s.created_files;
    } else if (it->second != digest) {
      ++s.edited_files;
    }
  }
  return s;
}

std::optional<std::string> read_report(const WorkspacePaths& ws) {
  std::error_code ec;
  if (!fs::exists(ws.report, ec)) return std::nullopt;
  std::string text = read_file(ws.report);
  if (!is_valid_utf8(text)) throw Error(ErrorCode::IoFailure, ws.report.string() + " is not valid UTF-8");
  return text;
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
  j = {{"index", r.index}, {"stage_sessions", r.stage_sessions},
       {"edit_stats", {{"edited_files", r.edit_stats.edited_files}, {"created_files", r.edit_stats.created_files}}},
       {"wall_time_ms", r.wall_time.count()}, {"reused_tools", r.reused_tools}};
  j["evaluation"] = r.evaluation ? to_json(*r.evaluation) : nlohmann::json(nullptr);
  auto forge = nlohmann::json::array();
  for (const auto& f : r.forge) forge.push_back({{"requirement", f.requirement}, {"outcome", f.outcome}, {"detail", f.detail}});
  j["forge"] = std::move(forge);
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, IterationRecord& r) {
  r.index = j.at("index").get<int>();
  r.stage_sessions = j.at("stage_sessions").get<std::vector<StageSession>>();
  r.edit_stats.edited_files = j.at("edit_stats").at("edited_files").get<int>();
  r.edit_stats.created_files = j.at("edit_stats").at("created_files").get<int>();
  r.wall_time = std::chrono::milliseconds(j.value("wall_time_ms", int64_t{0}));
  r.reused_tools = j.value("reused_tools", std::vector<std::string>{});
  r.evaluation.reset();
  if (const auto& e = j.at("evaluation"); !e.is_null()) {
    EvaluationResult ev;
    ev.bug_need_fix = e.at("bug_need_fix").get<bool>();
    ev.script_complete = e.at("script_complete").get<bool>();
    ev.further_simulation_needed = e.at("further_simulation_needed").get<bool>();
    ev.result_complete = e.at("result_complete").get<bool>();
    ev.next_step_needed = e.at("next_step_needed").get<bool>();
    ev.next_step_plan = e.at("next_step_plan").get<std::string>();
    r.evaluation = ev;
  }
  r.forge.clear();
  for (const auto& f : j.value("forge", nlohmann::json::array())) {
    r.forge.push_back({f.at("requirement").get<std::string>(), f.at("outcome").get<std::string>(), f.value("detail", "")});
  }
  r.error.reset();
  if (auto e = j.find("error"); e != j.end() && !e->is_null()) r.error = e->get<std::string>();
}

fs::path archive_iteration(const WorkspacePaths& ws, int iteration, const IterationRecord& record) {
  if (iteration < 1) throw Error(ErrorCode::InvalidArgument, "iteration must be >= 1");
  const fs::path dir = ws.iterations_dir() / std::to_string(iteration);
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot replace " + dir.string() + ": " + ec.message());
  make_dir(dir);
  copy_if_present(ws.question, dir / "question.md");
  copy_if_present(ws.report, dir / "report.md");
  copy_if_present(ws.evaluation, dir / "evaluation.json");
  write_file(dir / "record.json", nlohmann::json(record).dump(2) + "\n");
  return dir;
}

}  // namespace toolsmith
