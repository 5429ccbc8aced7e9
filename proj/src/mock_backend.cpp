#include "toolsmith/mock_backend.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/pricing.hpp"

namespace toolsmith {
namespace {

template <typename T>
std::optional<T> opt_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

PlaybookEntry parse_entry(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "playbook: session entries must be objects");
  PlaybookEntry e;
  e.task = opt_field<std::string>(j, "task");
  if (auto s = opt_field<std::string>(j, "stage")) {
    e.stage = stage_from_string(*s);
    if (!e.stage) throw Error(ErrorCode::ParseFailure, "playbook: unknown stage \"" + *s + "\"");
  }
  e.iteration = opt_field<int>(j, "iteration");
  e.subject = opt_field<std::string>(j, "subject");
  e.attempt = opt_field<int>(j, "attempt");
  for (const auto& p : j.value("navigate", nlohmann::json::array())) e.navigate.push_back(split_category(p.get<std::string>()));
  for (const auto& w : j.value("writes", nlohmann::json::array())) {
    e.writes.push_back({w.at("path").get<std::string>(), w.at("content").get<std::string>()});
  }
  for (const auto& c : j.value("commands", nlohmann::json::array())) {
    PlaybookCommand cmd;
    cmd.argv = c.at("argv").get<std::vector<std::string>>();
    cmd.label = c.value("label", "script");
    if (cmd.argv.empty()) throw Error(ErrorCode::ParseFailure, "playbook: empty command");
    e.commands.push_back(std::move(cmd));
  }
  e.report = opt_field<std::string>(j, "report");
  if (auto it = j.find("evaluation"); it != j.end() && !it->is_null()) e.evaluation = *it;
  if (auto it = j.find("payload"); it != j.end() && !it->is_null()) e.payload = *it;
  for (const auto& t : j.value("transcript", nlohmann::json::array())) {
    e.transcript.push_back({t.value("kind", "note"), t.value("summary", "")});
  }
  if (auto it = j.find("usage"); it != j.end()) e.usage = it->get<TokenUsage>();
  e.fail = opt_field<std::string>(j, "fail");
  return e;
}

}  // namespace

int PlaybookEntry::specificity() const {
  return int(task.has_value()) + int(stage.has_value()) + int(iteration.has_value()) + int(subject.has_value()) +
         int(attempt.has_value());
}

bool PlaybookEntry::matches(const AgentRequest& req) const {
  return (!task || *task == req.task_id) && (!stage || *stage == req.stage) &&
         (!iteration || *iteration == req.iteration) && (!subject || *subject == req.subject) &&
         (!attempt || *attempt == req.attempt);
}

const PlaybookEntry* Playbook::match(const AgentRequest& req) const {
  const PlaybookEntry* best = nullptr;
  for (const auto& e : sessions) {
    if (e.matches(req) && (!best || e.specificity() > best->specificity())) best = &e;
  }
  return best;
}

Playbook parse_playbook(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseFailure, "playbook: expected an object");
  Playbook p;
  try {
    p.model = doc.value("model", "mock");
    for (const auto& s : doc.value("sessions", nlohmann::json::array())) p.sessions.push_back(parse_entry(s));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("playbook: ") + e.what());
  }
  return p;
}

Playbook load_playbook(const fs::path& path) {
  try {
    return parse_playbook(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseFailure, path.string() + ": " + e.what());
  }
}

MockBackend::MockBackend(Playbook playbook, const JobExecutor* executor, std::string id)
    : playbook_(std::move(playbook)), executor_(executor), id_(std::move(id)) {}

AgentResponse MockBackend::run(const AgentRequest& req) {
  const PlaybookEntry* entry = playbook_.match(req);
  if (!entry) {
    throw Error(ErrorCode::PlaybookMiss, "no playbook entry for (" + req.task_id + ", " + std::string(to_string(req.stage)) +
                                             ", " + std::to_string(req.iteration) +
                                             (req.subject.empty() ? "" : ", " + req.subject) + ", attempt " +
                                             std::to_string(req.attempt) + ")");
  }

  RecordedSession rec{req.stage, req.task_id, req.iteration, req.subject, req.attempt, req.prompt, {}, {}, {}};
  AgentResponse resp;
  resp.usage = entry->usage;
  resp.payload = entry->payload;
  resp.transcript = entry->transcript;

  const fs::path root = req.workspace_root;
  const fs::path wd = req.effective_working_dir();
  auto record_write = [&](const fs::path& target, std::string_view content) {
    if (!is_within(root, target)) throw Error(ErrorCode::BackendFailure, "playbook write escapes the workspace: " + target.string());
    write_file(target, content);
    resp.artifacts_written.push_back(relative_key(root, target));
  };

  for (const auto& path : entry->navigate) {
    if (!req.disclosure) throw Error(ErrorCode::BackendFailure, "playbook navigates but the session has no toolset");
    std::string listing = req.disclosure->open_text(path);
    resp.transcript.push_back({"list", "ls " + (path.empty() ? std::string("/") : join_category(path)) + "\n" + listing});
    rec.disclosed.push_back(std::move(listing));
  }
  for (const auto& w : entry->writes) record_write((wd / w.path).lexically_normal(), w.content);
  if (entry->report) record_write(root / "report.md", *entry->report);
  if (entry->evaluation) record_write(root / "evaluation.json", entry->evaluation->dump(2) + "\n");
  for (const auto& c : entry->commands) {
    if (!executor_) throw Error(ErrorCode::BackendFailure, "playbook runs commands but no executor is attached");
    JobRequest job;
    job.command = c.argv;
    job.working_dir = wd;
    job.label = c.label;
    const auto result = executor_->submit(job, root / "logs");
    resp.transcript.push_back({"command", c.label + " exit " + std::to_string(result.exit_code)});
  }
  if (entry->fail) {
    resp.ok = false;
    resp.failure_reason = *entry->fail;
  }

  if (req.disclosure) rec.visited = req.disclosure->visited();
  rec.response = resp;
  rec.response.session_id = session_id_for(req);
  std::lock_guard guard(mutex_);
  log_.push_back(std::move(rec));
  return resp;
}

std::vector<RecordedSession> MockBackend::sessions() const {
  std::lock_guard guard(mutex_);
  return log_;
}

size_t MockBackend::count(Stage stage) const {
  std::lock_guard guard(mutex_);
  size_t n = 0;
  for (const auto& s : log_) n += s.stage == stage;
  return n;
}

}  // namespace toolsmith
