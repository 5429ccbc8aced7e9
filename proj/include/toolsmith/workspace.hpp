#pragma once

#include "toolsmith/evaluation.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/stage.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toolsmith {

enum class RunMode { ZeroShot, ToolReuse, EvaluatorOnly };

std::string_view to_string(RunMode m) noexcept;
// Accepts "zero_shot"/"zs", "tool_reuse"/"tr", "evaluator_only"/"eo".
std::optional<RunMode> run_mode_from_string(std::string_view s) noexcept;

struct InputFile {
  std::string path;  // relative to the workspace root
  std::string bytes;
  friend bool operator==(const InputFile&, const InputFile&) = default;
};

struct TaskSpec {
  std::string id;
  std::string prompt;
  std::vector<InputFile> input_files;
  RunMode mode = RunMode::ZeroShot;
  std::optional<std::string> rubric_ref;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Throws InvalidArgument on a bad id, empty prompt, or an input file path
// that escapes the workspace.
void validate_task(const TaskSpec& task);

void to_json(nlohmann::json& j, const TaskSpec& t);
// Input files are {"path", "content"} with UTF-8 text content.
void from_json(const nlohmann::json& j, TaskSpec& t);

struct WorkspacePaths {
  fs::path root;
  fs::path question;
  fs::path tools_dir;
  fs::path tool_smith_dir;
  fs::path logs_dir;
  fs::path img_dir;
  fs::path report;
  fs::path evaluation;

  static WorkspacePaths at(const fs::path& root);
  fs::path iterations_dir() const { return root / "iterations"; }
  fs::path outcome_file() const { return root / "run_outcome.json"; }
};

/// Creates `<base_dir>/<task.id>/` with question.md, tools/, tool_smith/,
/// logs/, img/ and the task's input files. With overwrite, an existing
/// workspace is removed first.
WorkspacePaths init_workspace(const TaskSpec& task, const fs::path& base_dir, bool overwrite = false);

struct ToolSnapshot {
  std::map<std::string, std::string> entries;  // relative path -> sha256 hex
  friend bool operator==(const ToolSnapshot&, const ToolSnapshot&) = default;
};

// Every regular file under `dir`, following a symlinked root. Dot-prefixed
// entries (optimizer backup and staging areas) are skipped.
ToolSnapshot snapshot_dir(const fs::path& dir);
ToolSnapshot snapshot_tools(const WorkspacePaths& ws);

struct EditStats {
  int edited_files = 0;
  int created_files = 0;
  friend bool operator==(const EditStats&, const EditStats&) = default;
};

EditStats diff_tool_edits(const ToolSnapshot& before, const ToolSnapshot& after);

// Absent when report.md does not exist; IoFailure on non-UTF-8 bytes.
std::optional<std::string> read_report(const WorkspacePaths& ws);

struct ForgeEvent {
  std::string requirement;
  std::string outcome;  // promoted | rejected | forge_failed | review_failed
  std::string detail;
  friend bool operator==(const ForgeEvent&, const ForgeEvent&) = default;
};

struct IterationRecord {
  int index = 1;
  std::vector<StageSession> stage_sessions;
  EditStats edit_stats;
  std::optional<EvaluationResult> evaluation;
  std::chrono::milliseconds wall_time{0};
  std::vector<std::string> reused_tools;
  std::vector<ForgeEvent> forge;
  std::optional<std::string> error;
};

void to_json(nlohmann::json& j, const IterationRecord& r);
void from_json(const nlohmann::json& j, IterationRecord& r);

/// Writes `iterations/<n>/record.json` plus copies of question.md, report.md
/// and evaluation.json as they currently stand. A repeated call for the same
/// iteration replaces the previous archive.
fs::path archive_iteration(const WorkspacePaths& ws, int iteration, const IterationRecord& record);

}  // namespace toolsmith
