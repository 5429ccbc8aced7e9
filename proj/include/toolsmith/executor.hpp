#pragma once

#include "toolsmith/fsutil.hpp"

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace toolsmith {

// Exit code reported for jobs killed by the executor's own timeout.
inline constexpr int kTimeoutExitCode = 124;

struct Resources {
  std::optional<int> cpus;
  std::optional<int64_t> mem_mb;
  std::optional<std::chrono::seconds> time_limit;
};

struct JobRequest {
  std::vector<std::string> command;  // argv; command[0] resolved through PATH
  fs::path working_dir;
  std::map<std::string, std::string> env_overrides;
  std::chrono::milliseconds timeout{std::chrono::minutes(10)};
  std::optional<Resources> resources;
  std::string label = "job";  // log file stem
  std::optional<std::string> stdin_data;
};

struct JobResult {
  int exit_code = 0;
  fs::path stdout_log;
  fs::path stderr_log;
  std::chrono::milliseconds wall_time{0};
  bool timed_out = false;
};

enum class ExecutorBackend { Local, Slurm };

struct SlurmCommands {
  // `{script}` is replaced by the rendered script path.
  std::vector<std::string> submit{"sbatch", "--parsable", "{script}"};
  // `{job_id}` is replaced by the id printed by the submit command. The first
  // output line must be `STATE[|EXIT:SIG]` (whitespace also separates).
  std::vector<std::string> poll{"sacct", "-n", "-X", "-P", "-j", "{job_id}", "-o", "State,ExitCode"};
};

struct ExecutorConfig {
  ExecutorBackend backend = ExecutorBackend::Local;
  Resources slurm_defaults{1, 1024, std::chrono::hours(1)};
  std::chrono::milliseconds poll_interval{1000};
  SlurmCommands slurm;
  // Benchmark runs simulate the scheduler with local subprocesses.
  bool force_local = false;
};

struct LogPaths {
  fs::path out;
  fs::path err;
};

/// Reserves `<logs_dir>/<YYYYMMDD_HHMMSS>_<label>.out/.err` (UTC). A name
/// already taken in the same second gets `-2`, `-3`, ... appended to the label.
LogPaths allocate_log_paths(const fs::path& logs_dir, const std::string& label,
                            std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

/// Batch script text for `job`; `defaults` fill any resource the job leaves unset.
/// Identical inputs render byte-identical scripts.
std::string render_slurm_script(const JobRequest& job, const Resources& defaults, const LogPaths& logs);

// Last `n` lines of the file, in order. Throws NotFound.
std::string tail_log(const fs::path& path, size_t n);

struct CaptureResult {
  int exit_code = 0;
  std::string out;
  std::string err;
  bool timed_out = false;
};

// Runs argv and captures both streams in memory (both drained concurrently).
CaptureResult run_capture(const std::vector<std::string>& argv, const fs::path& working_dir,
                          std::chrono::milliseconds timeout);

// True when argv0 names an executable file directly or via PATH.
bool executable_available(const std::string& argv0);

class JobExecutor {
 public:
  explicit JobExecutor(ExecutorConfig config = {});

  /// Runs one job to completion and returns exactly one result. Logs always
  /// exist afterwards, possibly empty. Throws SpawnFailure, SubmitFailure,
  /// PollTimeout.
  JobResult submit(const JobRequest& job, const fs::path& logs_dir) const;

  const ExecutorConfig& config() const { return config_; }
  ExecutorBackend effective_backend() const {
    return config_.force_local ? ExecutorBackend::Local : config_.backend;
  }

 private:
  JobResult submit_local(const JobRequest& job, const fs::path& logs_dir) const;
  JobResult submit_slurm(const JobRequest& job, const fs::path& logs_dir) const;

  ExecutorConfig config_;
};

}  // namespace toolsmith
