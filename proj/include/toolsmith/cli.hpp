#pragma once

#include "toolsmith/workflow.hpp"

#include <iosfwd>

namespace toolsmith::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitBudget = 2;

using EnvMap = std::map<std::string, std::string>;

// TOOLSMITH_* variables of the current process.
EnvMap process_env();

/// Every setting the commands read, each with the layer it came from:
/// "flag", "env", "file" or "default".
struct CliSettings {
  RunMode mode = RunMode::ZeroShot;
  std::string backend = "mock";
  int max_iterations = 5;
  std::optional<fs::path> toolset;
  bool merge = false;
  int jobs = 1;
  std::optional<fs::path> pricing;
  std::optional<fs::path> playbook;
  fs::path workdir = "runs";
  bool overwrite = true;
  std::string executor = "local";  // local | slurm

  std::map<std::string, std::string> sources;
  nlohmann::json file = nlohmann::json::object();  // config document, for backend and scheduler sections
};

/// Flags > env (TOOLSMITH_<KEY>) > config file > defaults. Keys are the long
/// flag names with '-' replaced by '_'. Throws InvalidArgument.
CliSettings resolve_settings(const std::map<std::string, std::string>& flags, const EnvMap& env,
                             const nlohmann::json& file);

ExecutorConfig executor_config(const CliSettings& s);
RunConfig run_config(const CliSettings& s);

// "mock" (needs a playbook) or a CLI backend declared under "backends" in the config file.
std::shared_ptr<AgentBackend> make_backend(const std::string& id, const CliSettings& s, const JobExecutor* executor);

// One array of tasks or {"tasks": [...]}; string entries are task file paths
// relative to the list file.
std::vector<TaskSpec> load_task_list(const fs::path& path);
TaskSpec load_task(const fs::path& path);

// True when the directory or anything below it lacks the owner write bit.
bool read_only_tree(const fs::path& dir);

/// Entry point behind the `toolsmith` binary. `args` excludes argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvMap& env);

}  // namespace toolsmith::cli
