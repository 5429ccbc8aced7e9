#include "toolsmith/executor.hpp"

#include "toolsmith/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <poll.h>
#include <sstream>
#include <sys/stat.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace toolsmith {
namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
  Fd& operator=(Fd&& o) noexcept {
    reset();
    fd = o.fd;
    o.fd = -1;
    return *this;
  }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

std::pair<Fd, Fd> make_pipe() {
  int p[2];
  if (::pipe2(p, O_CLOEXEC) != 0) throw Error(ErrorCode::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
  return {Fd(p[0]), Fd(p[1])};
}

std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) out.push_back(is_safe_identifier(std::string(1, c)) || c == '.' ? c : '_');
  if (out.empty()) out = "job";
  return out;
}

std::vector<std::string> merged_environment(const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : overrides) env[k] = v;
  std::vector<std::string> out;
  out.reserve(env.size());
  for (const auto& [k, v] : env) out.push_back(k + "=" + v);
  return out;
}

// Forks and execs argv with the given stdio fds (-1 = /dev/null). The child
// leads its own process group so timeouts can kill the whole tree.
pid_t spawn(const std::vector<std::string>& argv, const fs::path& cwd, const std::map<std::string, std::string>& env,
            int in_fd, int out_fd, int err_fd) {
  if (argv.empty()) throw Error(ErrorCode::SpawnFailure, "empty command");
  ignore_sigpipe();

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const auto env_strings = merged_environment(env);
  std::vector<char*> cenv;
  for (const auto& e : env_strings) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);
  const std::string cwd_str = cwd.empty() ? std::string() : cwd.string();

  auto [err_r, err_w] = make_pipe();
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::SpawnFailure, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    auto fail = [&](int code) {
      int e = code;
      (void)!::write(err_w.fd, &e, sizeof e);
      ::_exit(127);
    };
    const int devnull = ::open("/dev/null", O_RDWR);
    if (::dup2(in_fd >= 0 ? in_fd : devnull, 0) < 0) fail(errno);
    if (::dup2(out_fd >= 0 ? out_fd : devnull, 1) < 0) fail(errno);
    if (::dup2(err_fd >= 0 ? err_fd : devnull, 2) < 0) fail(errno);
    if (!cwd_str.empty() && ::chdir(cwd_str.c_str()) != 0) fail(errno);
    ::execvpe(cargv[0], cargv.data(), cenv.data());
    fail(errno);
  }
  err_w.reset();
  int child_errno = 0;
  ssize_t n;
  do {
    n = ::read(err_r.fd, &child_errno, sizeof child_errno);
  } while (n < 0 && errno == EINTR);
  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    int status;
    ::waitpid(pid, &status, 0);
    throw Error(ErrorCode::SpawnFailure, "cannot run " + argv.front() + ": " + std::strerror(child_errno));
  }
  return pid;
}

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

struct WaitOutcome {
  int exit_code = 0;
  bool timed_out = false;
};

void kill_group(pid_t pid) {
  ::kill(-pid, SIGTERM);
  const auto grace = Clock::now() + std::chrono::milliseconds(200);
  int status;
  while (Clock::now() < grace) {
    if (::waitpid(pid, &status, WNOHANG) == pid) {
      ::kill(-pid, SIGKILL);
      return;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ::kill(-pid, SIGKILL);
  ::waitpid(pid, &status, 0);
}

WaitOutcome wait_with_deadline(pid_t pid, Clock::time_point deadline) {
  auto nap = std::chrono::milliseconds(1);
  for (;;) {
    int status = 0;
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) return {decode_status(status), false};
    if (r < 0 && errno != EINTR) return {-1, false};
    if (Clock::now() >= deadline) {
      kill_group(pid);
      return {kTimeoutExitCode, true};
    }
    std::this_thread::sleep_for(nap);
    nap = std::min(nap * 2, std::chrono::milliseconds(20));
  }
}

// Feeds `data` to a pipe from a helper thread so a child that never reads
// stdin cannot stall the caller.
class StdinFeeder {
 public:
  StdinFeeder(Fd write_end, std::string data)
      : thread_([fd = std::move(write_end), data = std::move(data)]() mutable {
          size_t off = 0;
          while (off < data.size()) {
            const ssize_t n = ::write(fd.fd, data.data() + off, data.size() - off);
            if (n < 0) {
              if (errno == EINTR) continue;
              break;
            }
            off += static_cast<size_t>(n);
          }
        }) {}
  ~StdinFeeder() {
    if (thread_.joinable()) thread_.join();
  }
  StdinFeeder(const StdinFeeder&) = delete;
  StdinFeeder& operator=(const StdinFeeder&) = delete;

 private:
  std::thread thread_;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_duration(std::chrono::seconds s) {
  const auto total = s.count() < 0 ? 0 : s.count();
  const auto days = total / 86400;
  const auto h = (total % 86400) / 3600;
  const auto m = (total % 3600) / 60;
  const auto sec = total % 60;
  char buf[48];
  if (days > 0) {
    std::snprintf(buf, sizeof buf, "%lld-%02lld:%02lld:%02lld", static_cast<long long>(days),
                  static_cast<long long>(h), static_cast<long long>(m), static_cast<long long>(sec));
  } else {
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(h), static_cast<long long>(m),
                  static_cast<long long>(sec));
  }
  return buf;
}

std::vector<std::string> substitute(const std::vector<std::string>& tmpl, const std::string& key,
                                    const std::string& value) {
  std::vector<std::string> out;
  for (auto s : tmpl) {
    for (size_t pos; (pos = s.find(key)) != std::string::npos;) s.replace(pos, key.size(), value);
    out.push_back(std::move(s));
  }
  return out;
}

void touch(const fs::path& p) {
  if (!fs::exists(p)) write_file(p, "");
}

}  // namespace

LogPaths allocate_log_paths(const fs::path& logs_dir, const std::string& label,
                            std::chrono::system_clock::time_point now) {
  std::error_code ec;
  fs::create_directories(logs_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + logs_dir.string() + ": " + ec.message());
  const std::string stem = utc_stamp(now) + "_" + sanitize_label(label);
  for (int k = 1; k < 10000; ++k) {
    const std::string base = k == 1 ? stem : stem + "-" + std::to_string(k);
    const fs::path out = logs_dir / (base + ".out");
    const fs::path err = logs_dir / (base + ".err");
    const int fd = ::open(out.c_str(), O_CREAT | O_EXCL | O_WRONLY | O_CLOEXEC, 0644);
    if (fd < 0) {
      if (errno == EEXIST) continue;
      throw Error(ErrorCode::IoFailure, "cannot create " + out.string() + ": " + std::strerror(errno));
    }
    ::close(fd);
    const int efd = ::open(err.c_str(), O_CREAT | O_TRUNC | O_WRONLY | O_CLOEXEC, 0644);
    if (efd < 0) throw Error(ErrorCode::IoFailure, "cannot create " + err.string() + ": " + std::strerror(errno));
    ::close(efd);
    return {out, err};
  }
  throw Error(ErrorCode::IoFailure, "log names exhausted for " + stem);
}

std::string render_slurm_script(const JobRequest& job, const Resources& defaults, const LogPaths& logs) {
  const Resources r = job.resources.value_or(Resources{});
  const int cpus = r.cpus.value_or(defaults.cpus.value_or(1));
  const int64_t mem = r.mem_mb.value_or(defaults.mem_mb.value_or(1024));
  const auto limit = r.time_limit.value_or(defaults.time_limit.value_or(std::chrono::hours(1)));

  std::ostringstream s;
  s << "#!/bin/bash\n";
  s << "#SBATCH --job-name=" << sanitize_label(job.label) << "\n";
  s << "#SBATCH --cpus-per-task=" << cpus << "\n";
  s << "#SBATCH --mem=" << mem << "M\n";
  s << "#SBATCH --time=" << format_duration(limit) << "\n";
  s << "#SBATCH --output=" << logs.out.string() << "\n";
  s << "#SBATCH --error=" << logs.err.string() << "\n";
  s << "\n";
  s << "cd " << shell_quote(job.working_dir.string()) << " || exit 1\n";
  for (const auto& [k, v] : job.env_overrides) s << "export " << k << "=" << shell_quote(v) << "\n";
  for (size_t i = 0; i < job.command.size(); ++i) s << (i ? " " : "") << shell_quote(job.command[i]);
  if (job.stdin_data) {
    fs::path in = logs.out;
    in.replace_extension(".stdin");
    s << " < " << shell_quote(in.string());
  }
  s << "\n";
  return s.str();
}

std::string tail_log(const fs::path& path, size_t n) {
  if (!fs::is_regular_file(path)) throw Error(ErrorCode::NotFound, path.string());
  const std::string text = read_file(path);
  if (n == 0 || text.empty()) return {};
  // Walk back over n line terminators, ignoring a final trailing newline.
  size_t end = text.size();
  if (text.back() == '\n') --end;
  size_t pos = end;
  size_t lines = 0;
  while (pos > 0) {
    if (text[pos - 1] == '\n' && ++lines == n) break;
    --pos;
  }
  return text.substr(pos);
}

CaptureResult run_capture(const std::vector<std::string>& argv, const fs::path& working_dir,
                          std::chrono::milliseconds timeout) {
  auto [out_r, out_w] = make_pipe();
  auto [err_r, err_w] = make_pipe();
  const pid_t pid = spawn(argv, working_dir, {}, -1, out_w.fd, err_w.fd);
  out_w.reset();
  err_w.reset();

  CaptureResult result;
  const auto deadline = Clock::now() + timeout;
  pollfd fds[2] = {{out_r.fd, POLLIN, 0}, {err_r.fd, POLLIN, 0}};
  std::string* sinks[2] = {&result.out, &result.err};
  int open_streams = 2;
  char buf[4096];
  while (open_streams > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) {
      result.timed_out = true;
      break;
    }
    const int r = ::poll(fds, 2, static_cast<int>(std::min<long long>(left, 100)));
    if (r < 0 && errno != EINTR) break;
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[i]->append(buf, static_cast<size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        fds[i].fd = -1;
        --open_streams;
      }
    }
  }
  if (result.timed_out) {
    kill_group(pid);
    result.exit_code = kTimeoutExitCode;
    return result;
  }
  const auto w = wait_with_deadline(pid, deadline);
  result.exit_code = w.exit_code;
  result.timed_out = w.timed_out;
  return result;
}

bool executable_available(const std::string& argv0) {
  if (argv0.empty()) return false;
  if (argv0.find('/') != std::string::npos) return ::access(argv0.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  std::stringstream ss(path ? path : "/usr/bin:/bin");
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) dir = ".";
    const fs::path candidate = fs::path(dir) / argv0;
    if (::access(candidate.c_str(), X_OK) == 0 && !fs::is_directory(candidate)) return true;
  }
  return false;
}

JobExecutor::JobExecutor(ExecutorConfig config) : config_(std::move(config)) {
  if (config_.backend == ExecutorBackend::Slurm && config_.poll_interval.count() <= 0) {
    throw Error(ErrorCode::InvalidArgument, "poll_interval must be positive for the slurm backend");
  }
}

JobResult JobExecutor::submit(const JobRequest& job, const fs::path& logs_dir) const {
  if (job.command.empty()) throw Error(ErrorCode::InvalidArgument, "job command is empty");
  if (job.timeout.count() <= 0) throw Error(ErrorCode::InvalidArgument, "job timeout must be positive");
  if (!job.working_dir.empty() && !fs::is_directory(job.working_dir)) {
    throw Error(ErrorCode::SpawnFailure, "working directory does not exist: " + job.working_dir.string());
  }
  return effective_backend() == ExecutorBackend::Slurm ? submit_slurm(job, logs_dir) : submit_local(job, logs_dir);
}

JobResult JobExecutor::submit_local(const JobRequest& job, const fs::path& logs_dir) const {
  const LogPaths logs = allocate_log_paths(logs_dir, job.label);
  Fd out(::open(logs.out.c_str(), O_WRONLY | O_TRUNC | O_CLOEXEC));
  Fd err(::open(logs.err.c_str(), O_WRONLY | O_TRUNC | O_CLOEXEC));
  if (out.fd < 0 || err.fd < 0) throw Error(ErrorCode::IoFailure, "cannot open logs for " + job.label);

  const auto start = Clock::now();
  std::optional<StdinFeeder> feeder;
  pid_t pid;
  if (job.stdin_data) {
    auto [in_r, in_w] = make_pipe();
    pid = spawn(job.command, job.working_dir, job.env_overrides, in_r.fd, out.fd, err.fd);
    in_r.reset();
    feeder.emplace(std::move(in_w), *job.stdin_data);
  } else {
    pid = spawn(job.command, job.working_dir, job.env_overrides, -1, out.fd, err.fd);
  }
  const auto w = wait_with_deadline(pid, start + job.timeout);
  feeder.reset();

  JobResult result;
  result.exit_code = w.exit_code;
  result.timed_out = w.timed_out;
  result.stdout_log = logs.out;
  result.stderr_log = logs.err;
  result.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return result;
}

JobResult JobExecutor::submit_slurm(const JobRequest& job, const fs::path& logs_dir) const {
  const LogPaths logs = allocate_log_paths(logs_dir, job.label);
  fs::path script_path = logs.out;
  script_path.replace_extension(".sbatch");
  if (job.stdin_data) {
    fs::path in = logs.out;
    in.replace_extension(".stdin");
    write_file(in, *job.stdin_data);
  }
  fs::path workdir = job.working_dir.empty() ? fs::current_path() : fs::absolute(job.working_dir);
  JobRequest absolute = job;
  absolute.working_dir = workdir;
  write_file(script_path, render_slurm_script(absolute, config_.slurm_defaults, logs));

  const auto start = Clock::now();
  const auto submit_argv = substitute(config_.slurm.submit, "{script}", script_path.string());
  CaptureResult submitted;
  try {
    submitted = run_capture(submit_argv, workdir, std::chrono::seconds(60));
  } catch (const Error& e) {
    throw Error(ErrorCode::SubmitFailure, e.what());
  }
  std::string job_id = trim(submitted.out);
  if (const auto nl = job_id.find('\n'); nl != std::string::npos) job_id = trim(job_id.substr(0, nl));
  if (const auto semi = job_id.find(';'); semi != std::string::npos) job_id = job_id.substr(0, semi);
  if (submitted.exit_code != 0 || job_id.empty()) {
    throw Error(ErrorCode::SubmitFailure, "scheduler rejected " + job.label + ": " + trim(submitted.err));
  }

  static const char* kTerminal[] = {"COMPLETED", "FAILED",     "CANCELLED", "TIMEOUT",  "OUT_OF_MEMORY",
                                    "NODE_FAIL", "PREEMPTED", "BOOT_FAIL", "DEADLINE"};
  // The scheduler enforces the job's own time limit; the poll deadline only
  // guards against a scheduler that never reports a terminal state.
  const Resources r = job.resources.value_or(Resources{});
  const auto limit = r.time_limit.value_or(config_.slurm_defaults.time_limit.value_or(std::chrono::hours(1)));
  const auto deadline = start + std::max<std::chrono::milliseconds>(job.timeout, limit) + config_.poll_interval * 10;

  JobResult result;
  result.stdout_log = logs.out;
  result.stderr_log = logs.err;
  for (;;) {
    if (Clock::now() > deadline) throw Error(ErrorCode::PollTimeout, "job " + job_id + " never reached a terminal state");
    std::this_thread::sleep_for(config_.poll_interval);
    const auto polled = run_capture(substitute(config_.slurm.poll, "{job_id}", job_id), workdir, std::chrono::seconds(60));
    std::string line = trim(polled.out);
    if (const auto nl = line.find('\n'); nl != std::string::npos) line = trim(line.substr(0, nl));
    if (line.empty()) continue;  // not yet visible to accounting
    for (char& c : line) {
      if (c == '|') c = ' ';
    }
    std::istringstream fields(line);
    std::string state, exit_field;
    fields >> state >> exit_field;
    if (const auto sp = state.find(' '); sp != std::string::npos) state = state.substr(0, sp);
    const bool terminal = std::any_of(std::begin(kTerminal), std::end(kTerminal),
                                      [&](const char* t) { return state.rfind(t, 0) == 0; });
    if (!terminal) continue;
    if (state.rfind("TIMEOUT", 0) == 0) {
      result.timed_out = true;
      result.exit_code = kTimeoutExitCode;
    } else if (!exit_field.empty()) {
      result.exit_code = std::atoi(exit_field.substr(0, exit_field.find(':')).c_str());
      if (result.exit_code == 0 && state.rfind("COMPLETED", 0) != 0) result.exit_code = 1;
    } else {
      result.exit_code = state.rfind("COMPLETED", 0) == 0 ? 0 : 1;
    }
    break;
  }
  touch(logs.out);
  touch(logs.err);
  result.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return result;
}

}  // namespace toolsmith
