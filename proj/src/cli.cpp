#include "toolsmith/cli.hpp"

#include "toolsmith/aggregate.hpp"
#include "toolsmith/cli_backend.hpp"
#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"
#include "toolsmith/mock_backend.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <iostream>
#include <thread>

extern char** environ;

namespace toolsmith::cli {
namespace {

using nlohmann::json;

const std::vector<std::string> kKeys = {"mode",     "backend", "max_iterations", "toolset", "merge",    "jobs",
                                        "pricing",  "playbook", "workdir",       "overwrite", "executor"};
const std::set<std::string> kPathKeys = {"toolset", "pricing", "playbook", "workdir"};

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidArgument, key + ": not a boolean: " + v);
}

int parse_positive(const std::string& key, const std::string& v) {
  size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || n < 1) throw Error(ErrorCode::InvalidArgument, key + ": expected a positive integer, got " + v);
  return n;
}

std::string file_value(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  return j.dump();
}

json read_json(const fs::path& p) {
  const auto text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, p.string() + ": " + e.what());
  }
}

// Config files may use paths relative to themselves.
json load_config_file(const fs::path& p) {
  json doc = read_json(p);
  if (!doc.is_object()) throw Error(ErrorCode::ParseFailure, p.string() + ": config must be an object");
  const auto base = fs::absolute(p).parent_path();
  for (const auto& key : kPathKeys) {
    if (doc.contains(key) && doc[key].is_string() && fs::path(doc[key].get<std::string>()).is_relative()) {
      doc[key] = (base / doc[key].get<std::string>()).lexically_normal().string();
    }
  }
  return doc;
}

std::string fmt_minutes(std::chrono::milliseconds ms) { return format_fixed(static_cast<double>(ms.count()) / 60000.0, 1); }

int exit_code_for(RunStatus s) {
  switch (s) {
    case RunStatus::Complete: return kExitOk;
    case RunStatus::FailedBudget: return kExitBudget;
    case RunStatus::Error: return kExitError;
  }
  return kExitError;
}

void print_outcome(const RunOutcome& o, std::ostream& out) {
  out << o.task_id << ": " << to_string(o.status) << " (iterations " << o.iterations.size() << ", cost $"
      << o.total_cost.to_string() << ", time " << fmt_minutes(o.total_time) << " min)";
  if (o.status == RunStatus::Error) out << ": " << o.error_detail;
  out << "\n";
}

void print_dry_run(const CliSettings& s, std::ostream& out) {
  out << "stage plan (" << to_string(s.mode) << ", up to " << s.max_iterations << " iterations):\n";
  for (Stage st : stage_plan(s.mode)) out << "  " << to_string(st) << "\n";
  out << "settings:\n";
  for (const auto& key : kKeys) {
    const auto it = s.sources.find(key);
    out << "  " << key << " (" << (it == s.sources.end() ? "default" : it->second) << ")\n";
  }
}

struct Engine {
  JobExecutor executor;
  BackendSet backends;
  PromptSet prompts;
  HashEmbedder embedder;
  RunContext ctx;

  Engine(const CliSettings& s, ExecutorConfig ec, const std::string& backend_id)
      : executor(std::move(ec)), prompts(PromptSet::defaults()) {
    if (s.file.contains("prompts")) prompts = PromptSet::with_overrides(s.file.at("prompts").get<std::string>());
    backends = BackendSet(make_backend(backend_id, s, &executor));
    std::error_code mkdir_error;
    fs::create_directories(s.workdir, mkdir_error);
    if (mkdir_error) {
      throw Error(ErrorCode::IoFailure, "cannot create " + s.workdir.string() + ": " + mkdir_error.message());
    }
    ctx.base_dir = s.workdir;
    ctx.backends = &backends;
    ctx.executor = &executor;
    ctx.prompts = &prompts;
    ctx.embedder = &embedder;
    if (s.file.contains("shim")) ctx.shim_command = s.file.at("shim").get<std::vector<std::string>>();
  }
};

int cmd_solve(const CliSettings& s, const fs::path& task_file, bool dry_run, std::ostream& out) {
  const TaskSpec task = load_task(task_file);
  if (dry_run) {
    out << "task " << task.id << "\n";
    print_dry_run(s, out);
    return kExitOk;
  }
  Engine engine(s, executor_config(s), s.backend);
  const auto outcome = run_task(task, run_config(s), s.toolset, engine.ctx);
  print_outcome(outcome, out);
  return exit_code_for(outcome.status);
}

int cmd_curriculum(const CliSettings& s, const fs::path& list_file, bool dry_run, std::ostream& out) {
  const auto tasks = load_task_list(list_file);
  if (tasks.empty()) {
    out << "curriculum is empty; nothing to do\n";
    return kExitOk;
  }
  if (dry_run) {
    out << "tasks:";
    for (const auto& t : tasks) out << " " << t.id;
    out << "\n";
    print_dry_run(s, out);
    return kExitOk;
  }
  const fs::path toolset = s.toolset.value_or(s.workdir / "toolset");
  Engine engine(s, executor_config(s), s.backend);
  auto config = run_config(s);
  config.optimizer.merge = s.merge;
  const auto outcomes = run_curriculum(tasks, config, toolset, engine.ctx);
  int code = kExitOk;
  json summary = json::array();
  for (const auto& o : outcomes) {
    print_outcome(o, out);
    summary.push_back(o);
    if (o.status == RunStatus::Error) {
      code = kExitError;
    } else if (o.status == RunStatus::FailedBudget && code == kExitOk) {
      code = kExitBudget;
    }
  }
  write_file(s.workdir / "curriculum_outcome.json",
             json{{"toolset", fs::absolute(toolset).string()}, {"outcomes", summary}}.dump(2) + "\n");
  out << "toolset: " << fs::absolute(toolset).string() << "\n";
  return code;
}

int cmd_optimize(const CliSettings& s, const fs::path& toolset, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(toolset)) throw Error(ErrorCode::NotFound, "no toolset at " + toolset.string());
  if (read_only_tree(toolset)) {
    err << "error: toolset " << toolset.string() << " is read-only\n";
    return kExitError;
  }
  Engine engine(s, executor_config(s), s.backend);
  Registry registry(toolset);
  SessionContext sctx;
  sctx.task_id = "optimize";
  sctx.iteration = 0;
  sctx.backends = &engine.backends;
  ForgeContext fctx{WorkspacePaths::at(toolset), sctx, &engine.executor, &engine.prompts, "optimizer"};
  ToolRuntime runtime{engine.ctx.shim_command, &engine.executor, toolset / ".optimizer_logs"};
  OptimizerSettings settings;
  settings.merge = s.merge;
  const auto report = optimize(registry, settings, fctx, runtime, engine.embedder);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  out << "reorganizations: " << report.reorgs_applied << "\n";
  if (s.merge) out << "merges: " << report.merges_applied << " applied, " << report.merges_rolled_back << " rolled back\n";
  out << "tools: " << report.tools_before << " → " << report.tools_after << "\n";
  return kExitOk;
}

int cmd_score(const fs::path& results_file, const fs::path& rubric_file, std::ostream& out, std::ostream& err) {
  const auto rubric = parse_rubric(read_json(rubric_file));
  const auto results = parse_results(read_json(results_file));
  std::vector<std::string> warnings;
  const auto score = score_run(rubric, results, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  out << "accuracy " << format_fixed(score.accuracy, 3) << "\n";
  out << "methodology " << format_fixed(score.methodology, 3) << "\n";
  out << "combined " << format_fixed(score.combined, 3) << "\n";
  return kExitOk;
}

struct BenchBackend {
  std::string id;
  json spec;
};

struct BenchJob {
  BenchBackend backend;
  RunMode mode;
  int rep;
};

int cmd_bench(const CliSettings& s, const fs::path& matrix_file, std::ostream& out, std::ostream& err) {
  const json m = read_json(matrix_file);
  const auto base = fs::absolute(matrix_file).parent_path();
  auto rel = [&](const std::string& p) { return fs::path(p).is_relative() ? base / p : fs::path(p); };
  auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidArgument, "matrix: " + why); };
  if (!m.is_object()) throw bad("must be an object");

  std::vector<TaskSpec> tasks;
  if (!m.contains("tasks") || !m.at("tasks").is_array() || m.at("tasks").empty()) throw bad("tasks must be a nonempty array");
  for (const auto& t : m.at("tasks")) {
    TaskSpec spec = t.is_string() ? load_task(rel(t.get<std::string>())) : t.get<TaskSpec>();
    validate_task(spec);
    tasks.push_back(std::move(spec));
  }
  std::vector<RunMode> modes;
  for (const auto& v : m.value("modes", json::array({"zs"}))) {
    const auto mode = run_mode_from_string(v.get<std::string>());
    if (!mode) throw bad("unknown mode " + v.dump());
    modes.push_back(*mode);
  }
  if (modes.empty()) throw bad("modes is empty");
  const int reps = m.value("repetitions", 3);
  if (reps < 1) throw bad("repetitions must be >= 1");
  std::optional<fs::path> seed;
  if (m.contains("toolset")) seed = rel(m.at("toolset").get<std::string>());
  if (std::count(modes.begin(), modes.end(), RunMode::ToolReuse) && !seed) throw bad("tool_reuse needs a toolset");

  std::vector<BenchBackend> backends;
  if (!m.contains("backends") || !m.at("backends").is_array() || m.at("backends").empty()) {
    throw bad("backends must be a nonempty array");
  }
  for (const auto& b : m.at("backends")) {
    BenchBackend bb{b.value("id", ""), b};
    if (bb.id.empty()) throw bad("backend without id");
    if (b.contains("playbook")) bb.spec["playbook"] = rel(b.at("playbook").get<std::string>()).string();
    backends.push_back(std::move(bb));
  }
  std::optional<Rubric> rubric;
  if (m.contains("rubric")) rubric = parse_rubric(read_json(rel(m.at("rubric").get<std::string>())));
  const std::string results_name = m.value("results_file", "results.json");
  const fs::path out_dir = m.contains("out") ? rel(m.at("out").get<std::string>()) : s.workdir / "bench";

  std::vector<BenchJob> jobs;
  for (const auto& b : backends) {
    for (RunMode mode : modes) {
      for (int r = 1; r <= reps; ++r) jobs.push_back({b, mode, r});
    }
  }

  auto exec_cfg = executor_config(s);
  exec_cfg.force_local = true;
  std::vector<RunMetrics> metrics(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex warn_mutex;
  std::vector<std::string> warnings;

  auto worker = [&] {
    for (size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      try {
        CliSettings local = s;
        if (job.backend.spec.contains("playbook")) local.playbook = job.backend.spec.at("playbook").get<std::string>();
        if (job.backend.spec.contains("command")) local.file["backends"][job.backend.id] = job.backend.spec;
        const auto run_dir = out_dir / "runs" / job.backend.id / std::string(to_string(job.mode)) / ("r" + std::to_string(job.rep));
        local.workdir = run_dir;
        std::string backend_id = local.backend;
        if (job.backend.spec.contains("command")) {
          backend_id = job.backend.id;
        } else if (job.backend.spec.contains("playbook")) {
          backend_id = "mock";
        }
        Engine engine(local, exec_cfg, backend_id);
        if (job.backend.spec.contains("playbook")) {
          engine.backends = BackendSet(std::make_shared<MockBackend>(load_playbook(*local.playbook), &engine.executor, job.backend.id));
        }
        std::optional<fs::path> toolset;
        if (job.mode == RunMode::ToolReuse) {
          toolset = run_dir / "toolset";
          fs::remove_all(*toolset);
          fs::create_directories(*toolset);
          fs::copy(*seed, *toolset, fs::copy_options::recursive);
        }
        auto config = run_config(local);
        config.mode = job.mode;
        RunMetrics rm;
        rm.model = job.backend.id;
        rm.mode = job.mode;
        rm.run = job.rep;
        double score_sum = 0, acc_sum = 0, meth_sum = 0;
        for (const auto& task : tasks) {
          const auto o = run_task(task, config, toolset, engine.ctx);
          rm.task_id = rm.task_id.empty() ? task.id : rm.task_id + "," + task.id;
          rm.time_min += static_cast<double>(o.total_time.count()) / 60000.0;
          rm.cost_usd += o.total_cost.to_double();
          rm.iterations += static_cast<int>(o.iterations.size());
          if (rubric) {
            const auto results_path = o.workspace / results_name;
            RunResults results;
            std::vector<std::string> w;
            if (fs::exists(results_path)) {
              results = parse_results(read_json(results_path));
            } else {
              w.push_back(task.id + ": no " + results_name + " in workspace; scored 0");
            }
            const auto sc = score_run(*rubric, results, &w);
            score_sum += sc.combined;
            acc_sum += sc.accuracy;
            meth_sum += sc.methodology;
            std::lock_guard lock(warn_mutex);
            for (auto& x : w) warnings.push_back(job.backend.id + "/" + std::string(to_string(job.mode)) + "/r" + std::to_string(job.rep) + ": " + x);
          }
        }
        const double n = static_cast<double>(tasks.size());
        rm.score = {acc_sum / n, meth_sum / n, score_sum / n};
        metrics[i] = rm;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int threads = std::max(1, std::min<int>(s.jobs, static_cast<int>(jobs.size())));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& w : warnings) err << "warning: " << w << "\n";
  int code = kExitOk;
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (!failures[i].empty()) {
      err << "error: " << jobs[i].backend.id << "/" << to_string(jobs[i].mode) << "/r" << jobs[i].rep << ": " << failures[i] << "\n";
      code = kExitError;
    }
  }
  if (code != kExitOk) return code;

  const auto rows = aggregate(metrics);
  std::vector<RadarPoint> points;
  for (const auto& r : rows) {
    points.push_back({r.model + "/" + std::string(to_string(r.mode)),
                      {{"time", r.time.mean}, {"cost", r.cost.mean}, {"score", r.score.mean}}});
  }
  std::vector<std::string> radar_warnings;
  const auto radar = normalize_radar(points, {"time", "cost"}, &radar_warnings);
  for (const auto& w : radar_warnings) err << "warning: " << w << "\n";

  const auto md = emit_tables(rows, TableFormat::Markdown);
  write_file(out_dir / "table.md", md);
  write_file(out_dir / "table.csv", emit_tables(rows, TableFormat::Csv));
  write_file(out_dir / "radar.csv", emit_radar_csv(radar));
  json runs = json::array();
  for (const auto& r : metrics) {
    runs.push_back({{"model", r.model}, {"mode", to_string(r.mode)}, {"run", r.run}, {"tasks", r.task_id},
                    {"time_min", r.time_min}, {"cost_usd", r.cost_usd}, {"iterations", r.iterations},
                    {"accuracy", r.score.accuracy}, {"methodology", r.score.methodology}, {"combined", r.score.combined}});
  }
  write_file(out_dir / "runs.json", runs.dump(2) + "\n");
  out << md;
  out << "results: " << fs::absolute(out_dir).string() << "\n";
  return kExitOk;
}

}  // namespace

EnvMap process_env() {
  EnvMap env;
  for (char** e = environ; e && *e; ++e) {
    std::string_view kv(*e);
    if (kv.rfind("TOOLSMITH_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return env;
}

CliSettings resolve_settings(const std::map<std::string, std::string>& flags, const EnvMap& env, const json& file) {
  CliSettings s;
  s.file = file.is_object() ? file : json::object();
  for (const auto& key : kKeys) {
    std::optional<std::string> value;
    std::string source = "default";
    std::string upper = "TOOLSMITH_";
    for (char c : key) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (const auto f = flags.find(key); f != flags.end()) {
      value = f->second;
      source = "flag";
    } else if (const auto e = env.find(upper); e != env.end()) {
      value = e->second;
      source = "env";
    } else if (s.file.contains(key) && !s.file.at(key).is_null()) {
      value = file_value(s.file.at(key));
      source = "file";
    }
    s.sources[key] = source;
    if (!value) continue;
    const std::string& v = *value;
    if (key == "mode") {
      const auto mode = run_mode_from_string(v);
      if (!mode) throw Error(ErrorCode::InvalidArgument, "mode: expected zs|tr|eo, got " + v);
      s.mode = *mode;
    } else if (key == "backend") {
      s.backend = v;
    } else if (key == "max_iterations") {
      s.max_iterations = parse_positive(key, v);
    } else if (key == "toolset") {
      s.toolset = v;
    } else if (key == "merge") {
      s.merge = parse_bool(key, v);
    } else if (key == "jobs") {
      s.jobs = parse_positive(key, v);
    } else if (key == "pricing") {
      s.pricing = v;
    } else if (key == "playbook") {
      s.playbook = v;
    } else if (key == "workdir") {
      s.workdir = v;
    } else if (key == "overwrite") {
      s.overwrite = parse_bool(key, v);
    } else if (key == "executor") {
      if (v != "local" && v != "slurm") throw Error(ErrorCode::InvalidArgument, "executor: expected local|slurm, got " + v);
      s.executor = v;
    }
  }
  return s;
}

ExecutorConfig executor_config(const CliSettings& s) {
  ExecutorConfig c;
  c.backend = s.executor == "slurm" ? ExecutorBackend::Slurm : ExecutorBackend::Local;
  if (s.file.contains("slurm")) {
    const auto& j = s.file.at("slurm");
    if (j.contains("cpus")) c.slurm_defaults.cpus = j.at("cpus").get<int>();
    if (j.contains("mem_mb")) c.slurm_defaults.mem_mb = j.at("mem_mb").get<int64_t>();
    if (j.contains("time_limit_s")) c.slurm_defaults.time_limit = std::chrono::seconds(j.at("time_limit_s").get<int64_t>());
    if (j.contains("poll_interval_ms")) c.poll_interval = std::chrono::milliseconds(j.at("poll_interval_ms").get<int64_t>());
    if (j.contains("submit")) c.slurm.submit = j.at("submit").get<std::vector<std::string>>();
    if (j.contains("poll")) c.slurm.poll = j.at("poll").get<std::vector<std::string>>();
  }
  return c;
}

RunConfig run_config(const CliSettings& s) {
  RunConfig c;
  c.mode = s.mode;
  c.max_iterations = s.max_iterations;
  c.overwrite_workspace = s.overwrite;
  c.optimizer.merge = s.merge;
  if (s.pricing) c.pricing = load_pricing_text(read_file(*s.pricing));
  if (s.file.contains("cache_ttl") && s.file.at("cache_ttl") == "1h") c.cache_ttl = CacheTtl::OneHour;
  if (s.file.contains("skills")) {
    for (const auto& p : s.file.at("skills")) c.skills.emplace_back(p.get<std::string>());
  }
  validate_config(c);
  return c;
}

std::shared_ptr<AgentBackend> make_backend(const std::string& id, const CliSettings& s, const JobExecutor* executor) {
  if (s.file.contains("backends") && s.file.at("backends").contains(id)) {
    const auto& b = s.file.at("backends").at(id);
    CliBackendConfig cfg;
    cfg.id = id;
    cfg.model = b.value("model", id);
    cfg.command = b.at("command").get<std::vector<std::string>>();
    if (b.contains("budget_s")) cfg.default_budget = std::chrono::seconds(b.at("budget_s").get<int64_t>());
    return std::make_shared<CliBackend>(cfg);
  }
  if (id == "mock") {
    if (!s.playbook) throw Error(ErrorCode::InvalidArgument, "the mock backend needs --playbook");
    return std::make_shared<MockBackend>(load_playbook(*s.playbook), executor);
  }
  throw Error(ErrorCode::BackendUnavailable, "unknown backend \"" + id + "\"");
}

TaskSpec load_task(const fs::path& path) {
  const json j = read_json(path);
  TaskSpec t;
  try {
    t = j.get<TaskSpec>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
  }
  validate_task(t);
  return t;
}

std::vector<TaskSpec> load_task_list(const fs::path& path) {
  json j = read_json(path);
  if (j.is_object() && j.contains("tasks")) j = j.at("tasks");
  if (!j.is_array()) throw Error(ErrorCode::ParseFailure, path.string() + ": expected a task array");
  const auto base = fs::absolute(path).parent_path();
  std::vector<TaskSpec> tasks;
  for (const auto& entry : j) {
    if (entry.is_string()) {
      const fs::path p = entry.get<std::string>();
      tasks.push_back(load_task(p.is_relative() ? base / p : p));
    } else {
      TaskSpec t;
      try {
        t = entry.get<TaskSpec>();
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
      }
      validate_task(t);
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

bool read_only_tree(const fs::path& dir) {
  auto writable = [](const fs::path& p) {
    return (fs::status(p).permissions() & fs::perms::owner_write) != fs::perms::none;
  };
  if (!writable(dir)) return true;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!writable(e.path())) return true;
  }
  return false;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvMap& env) {
  CLI::App app{"Tool-forging workflow engine", "toolsmith"};
  app.require_subcommand(1);

  std::map<std::string, std::string> flags;
  std::optional<std::string> config_path;
  bool dry_run = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
             {"mode", "zs | tr | eo"},
             {"backend", "agent backend id"},
             {"max-iterations", "refinement budget"},
             {"toolset", "toolset directory"},
             {"jobs", "parallel runs"},
             {"pricing", "pricing table file"},
             {"playbook", "mock backend playbook"},
             {"workdir", "workspace base directory"},
             {"executor", "local | slurm"}}) {
      std::string key = name;
      std::replace(key.begin(), key.end(), '-', '_');
      sub->add_option_function<std::string>("--" + name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    }
    sub->add_flag_function("--merge", [&flags](int64_t) { flags["merge"] = "true"; }, "merge near-duplicate tools");
    sub->add_flag_function("--overwrite,!--no-overwrite",
                           [&flags](int64_t n) { flags["overwrite"] = n > 0 ? "true" : "false"; },
                           "replace existing workspaces");
  };

  std::string target, second;
  auto* solve = app.add_subcommand("solve", "run one task");
  solve->add_option("task", target, "task file")->required();
  solve->add_flag("--dry-run", dry_run, "print the stage plan only");
  add_common(solve);

  auto* curriculum = app.add_subcommand("curriculum", "run tasks in order against one toolset");
  curriculum->add_option("tasks", target, "task list file")->required();
  curriculum->add_flag("--dry-run", dry_run, "print the stage plan only");
  add_common(curriculum);

  auto* bench = app.add_subcommand("bench", "run a mode x backend x repetition matrix");
  bench->add_option("matrix", target, "matrix file")->required();
  add_common(bench);

  auto* opt = app.add_subcommand("optimize", "reorganize and optionally merge a toolset");
  opt->add_option("dir", target, "toolset directory")->required();
  add_common(opt);

  auto* score = app.add_subcommand("score", "score one run against a rubric");
  score->add_option("results", target, "results file")->required();
  score->add_option("rubric", second, "rubric file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }

  try {
    if (score->parsed()) return cmd_score(target, second, out, err);

    json file = json::object();
    if (!config_path) {
      if (const auto it = env.find("TOOLSMITH_CONFIG"); it != env.end()) config_path = it->second;
    }
    if (config_path) file = load_config_file(*config_path);
    const auto settings = resolve_settings(flags, env, file);

    if (solve->parsed()) return cmd_solve(settings, target, dry_run, out);
    if (curriculum->parsed()) return cmd_curriculum(settings, target, dry_run, out);
    if (bench->parsed()) return cmd_bench(settings, target, out, err);
    if (opt->parsed()) {
      auto s = settings;
      return cmd_optimize(s, target, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace toolsmith::cli
