#include "test_support.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/executor.hpp"
#include "toolsmith/fsutil.hpp"

#include <doctest.h>

#include <cstdlib>
#include <regex>

using namespace toolsmith;
using testsupport::TempDir;
using namespace std::chrono_literals;

namespace {

std::chrono::system_clock::time_point at(int y, unsigned mo, unsigned d, int h, int mi, int s) {
  return std::chrono::sys_days{std::chrono::year{y} / mo / d} + std::chrono::hours(h) + std::chrono::minutes(mi) +
         std::chrono::seconds(s);
}

std::string golden(const std::string& name) {
  return read_file(testsupport::fixtures_dir() / "slurm" / (name + ".sbatch"));
}

const Resources kDefaults{1, 1024, std::chrono::hours(1)};

ExecutorConfig fake_slurm(const fs::path& state) {
  ExecutorConfig c;
  c.backend = ExecutorBackend::Slurm;
  c.poll_interval = 20ms;
  const std::string script = (testsupport::fixtures_dir() / "fake_slurm.sh").string();
  c.slurm.submit = {"env", "FAKE_SLURM_STATE=" + state.string(), "sh", script, "submit", "{script}"};
  c.slurm.poll = {"env", "FAKE_SLURM_STATE=" + state.string(), "sh", script, "poll", "{job_id}"};
  return c;
}

// setenv for the lifetime of the guard; the fake scheduler reads these.
struct EnvGuard {
  std::string key;
  EnvGuard(const std::string& k, const std::string& v) : key(k) { setenv(k.c_str(), v.c_str(), 1); }
  ~EnvGuard() { unsetenv(key.c_str()); }
};

}  // namespace

TEST_SUITE("executor") {
  TEST_CASE("local job captures both streams and the exit code") {
    TempDir t;
    JobExecutor ex;
    JobRequest job;
    job.command = {"sh", "-c", "echo out; echo err >&2; exit 3"};
    job.working_dir = t.path;
    job.label = "probe";
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.exit_code == 3);
    CHECK_FALSE(r.timed_out);
    CHECK(read_file(r.stdout_log) == "out\n");
    CHECK(read_file(r.stderr_log) == "err\n");
    CHECK(std::regex_match(r.stdout_log.filename().string(), std::regex(R"(\d{8}_\d{6}_probe\.out)")));
    CHECK(std::regex_match(r.stderr_log.filename().string(), std::regex(R"(\d{8}_\d{6}_probe\.err)")));
  }

  TEST_CASE("local job runs in its working dir with env overrides and stdin") {
    TempDir t;
    fs::create_directories(t / "wd");
    JobExecutor ex;
    JobRequest job;
    job.command = {"sh", "-c", "pwd; echo $GREETING; cat"};
    job.working_dir = t / "wd";
    job.env_overrides = {{"GREETING", "hello"}};
    job.stdin_data = "piped input";
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.exit_code == 0);
    CHECK(read_file(r.stdout_log) == fs::canonical(t / "wd").string() + "\nhello\npiped input");
  }

  TEST_CASE("large stdin does not deadlock") {
    TempDir t;
    JobExecutor ex;
    JobRequest job;
    job.command = {"wc", "-c"};
    job.working_dir = t.path;
    job.stdin_data = std::string(1 << 20, 'x');
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.exit_code == 0);
    CHECK(read_file(r.stdout_log).find("1048576") != std::string::npos);
  }

  TEST_CASE("local timeout kills the job and reports the timeout code") {
    TempDir t;
    JobExecutor ex;
    JobRequest job;
    job.command = {"sleep", "30"};
    job.working_dir = t.path;
    job.timeout = 200ms;
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.timed_out);
    CHECK(r.exit_code == kTimeoutExitCode);
    CHECK(r.wall_time < 10s);
    CHECK(fs::exists(r.stdout_log));
    CHECK(fs::exists(r.stderr_log));
  }

  TEST_CASE("missing program is a spawn failure") {
    TempDir t;
    JobExecutor ex;
    JobRequest job;
    job.command = {"definitely-not-a-program-xyz"};
    job.working_dir = t.path;
    try {
      ex.submit(job, t / "logs");
      FAIL("expected SpawnFailure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SpawnFailure);
    }
  }

  TEST_CASE("log paths collide into numbered suffixes") {
    TempDir t;
    const auto now = at(2026, 1, 2, 3, 4, 5);
    const auto a = allocate_log_paths(t.path, "step", now);
    const auto b = allocate_log_paths(t.path, "step", now);
    const auto c = allocate_log_paths(t.path, "step", now);
    CHECK(a.out.filename() == "20260102_030405_step.out");
    CHECK(a.err.filename() == "20260102_030405_step.err");
    CHECK(b.out.filename() == "20260102_030405_step-2.out");
    CHECK(c.err.filename() == "20260102_030405_step-3.err");
  }

  TEST_CASE("slurm scripts match the frozen goldens") {
    SUBCASE("defaults") {
      JobRequest job;
      job.command = {"python3", "run.py"};
      job.working_dir = "/scratch/ws/q01";
      job.label = "task_execution";
      const LogPaths logs{"/scratch/ws/q01/logs/20260102_030405_task_execution.out",
                          "/scratch/ws/q01/logs/20260102_030405_task_execution.err"};
      CHECK(render_slurm_script(job, kDefaults, logs) == golden("defaults"));
    }
    SUBCASE("large allocation with env and awkward quoting") {
      JobRequest job;
      job.command = {"bash", "-c", "echo it's done"};
      job.working_dir = "/scratch/ws/q02/tool_smith";
      job.label = "tool test/opt";
      job.env_overrides = {{"PYSCF_TMPDIR", "/scratch/tmp dir"}, {"OMP_NUM_THREADS", "16"}};
      job.resources = Resources{16, 64000, std::chrono::hours(51) + std::chrono::minutes(4) + std::chrono::seconds(5)};
      const LogPaths logs{"/scratch/ws/q02/logs/20261231_235959_tool_test_opt.out",
                          "/scratch/ws/q02/logs/20261231_235959_tool_test_opt.err"};
      CHECK(render_slurm_script(job, kDefaults, logs) == golden("large"));
    }
    SUBCASE("partial resources and stdin") {
      JobRequest job;
      job.command = {"/opt/shim", "/scratch/ws/q03/tools/add.manifest.json"};
      job.working_dir = "/scratch/ws/q03/tools";
      job.label = "tool_add";
      job.stdin_data = "{}";
      job.resources = Resources{4, std::nullopt, std::nullopt};
      const Resources defaults{1, 2048, std::chrono::minutes(30)};
      const LogPaths logs{"/scratch/ws/q03/logs/20260615_120000_tool_add.out",
                          "/scratch/ws/q03/logs/20260615_120000_tool_add.err"};
      CHECK(render_slurm_script(job, defaults, logs) == golden("stdin"));
    }
  }

  TEST_CASE("rendering is deterministic") {
    JobRequest job;
    job.command = {"a", "b c"};
    job.working_dir = "/w";
    job.env_overrides = {{"Z", "1"}, {"A", "2"}};
    const LogPaths logs{"/l/x.out", "/l/x.err"};
    CHECK(render_slurm_script(job, kDefaults, logs) == render_slurm_script(job, kDefaults, logs));
  }

  TEST_CASE("fake scheduler: completed job") {
    TempDir t;
    JobExecutor ex(fake_slurm(t / "state"));
    JobRequest job;
    job.command = {"sh", "-c", "echo scheduled; cat"};
    job.working_dir = t.path;
    job.stdin_data = "via file";
    job.label = "run";
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.exit_code == 0);
    CHECK_FALSE(r.timed_out);
    CHECK(read_file(r.stdout_log) == "scheduled\nvia file");
    fs::path script = r.stdout_log;
    script.replace_extension(".sbatch");
    CHECK(fs::exists(script));
  }

  TEST_CASE("fake scheduler: failed job keeps its exit code") {
    TempDir t;
    JobExecutor ex(fake_slurm(t / "state"));
    JobRequest job;
    job.command = {"sh", "-c", "echo boom >&2; exit 7"};
    job.working_dir = t.path;
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.exit_code == 7);
    CHECK(read_file(r.stderr_log) == "boom\n");
  }

  TEST_CASE("fake scheduler: rejection is a submit failure") {
    TempDir t;
    EnvGuard g("FAKE_SLURM_REJECT", "1");
    JobExecutor ex(fake_slurm(t / "state"));
    JobRequest job;
    job.command = {"true"};
    job.working_dir = t.path;
    try {
      ex.submit(job, t / "logs");
      FAIL("expected SubmitFailure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SubmitFailure);
    }
  }

  TEST_CASE("fake scheduler: scheduler timeout state") {
    TempDir t;
    EnvGuard g("FAKE_SLURM_TIMEOUT", "1");
    JobExecutor ex(fake_slurm(t / "state"));
    JobRequest job;
    job.command = {"true"};
    job.working_dir = t.path;
    const auto r = ex.submit(job, t / "logs");
    CHECK(r.timed_out);
    CHECK(r.exit_code == kTimeoutExitCode);
  }

  TEST_CASE("fake scheduler: silent accounting ends in a poll timeout") {
    TempDir t;
    EnvGuard g("FAKE_SLURM_SILENT", "1");
    JobExecutor ex(fake_slurm(t / "state"));
    JobRequest job;
    job.command = {"true"};
    job.working_dir = t.path;
    job.timeout = 100ms;
    job.resources = Resources{std::nullopt, std::nullopt, std::chrono::seconds(0)};
    try {
      ex.submit(job, t / "logs");
      FAIL("expected PollTimeout");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::PollTimeout);
    }
  }

  TEST_CASE("force_local bypasses the scheduler") {
    TempDir t;
    auto cfg = fake_slurm(t / "state");
    cfg.slurm.submit = {"false"};
    cfg.force_local = true;
    JobExecutor ex(cfg);
    CHECK(ex.effective_backend() == ExecutorBackend::Local);
    JobRequest job;
    job.command = {"true"};
    job.working_dir = t.path;
    CHECK(ex.submit(job, t / "logs").exit_code == 0);
  }

  TEST_CASE("tail_log returns the last lines in order") {
    TempDir t;
    write_file(t / "f.log", "1\n2\n3\n4\n5\n");
    CHECK(tail_log(t / "f.log", 2) == "4\n5\n");
    CHECK(tail_log(t / "f.log", 10) == "1\n2\n3\n4\n5\n");
    write_file(t / "g.log", "a\nb");
    CHECK(tail_log(t / "g.log", 1) == "b");
    CHECK_THROWS_AS(tail_log(t / "missing.log", 3), Error);
  }

  TEST_CASE("run_capture and executable_available") {
    TempDir t;
    const auto r = run_capture({"sh", "-c", "printf abc; printf xyz >&2"}, t.path, 5s);
    CHECK(r.out == "abc");
    CHECK(r.err == "xyz");
    CHECK(executable_available("sh"));
    CHECK_FALSE(executable_available("no-such-binary-xyz"));
  }
}
