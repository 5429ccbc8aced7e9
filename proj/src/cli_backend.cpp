#include "toolsmith/cli_backend.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/pricing.hpp"
#include "toolsmith/workspace.hpp"

#include <sstream>

namespace toolsmith {

CliBackend::CliBackend(CliBackendConfig config) : config_(std::move(config)), executor_(ExecutorConfig{}) {
  if (config_.command.empty()) throw Error(ErrorCode::InvalidArgument, "cli backend needs a command");
}

void absorb_cli_output(std::string_view stdout_text, AgentResponse& resp) {
  std::istringstream in{std::string(stdout_text)};
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (line.front() == '{') {
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.is_object()) {
        bool structured = false;
        if (auto u = j.find("usage"); u != j.end()) {
          try {
            resp.usage += u->get<TokenUsage>();
            structured = true;
          } catch (const std::exception&) {
          }
        }
        if (auto p = j.find("payload"); p != j.end()) {
          resp.payload = *p;
          structured = true;
        }
        if (auto t = j.find("transcript"); t != j.end() && t->is_object()) {
          resp.transcript.push_back({t->value("kind", "step"), t->value("summary", "")});
          structured = true;
        }
        if (structured) continue;
      }
    }
    resp.transcript.push_back({"output", line});
  }
}

AgentResponse CliBackend::run(const AgentRequest& req) {
  if (!executable_available(config_.command.front())) {
    throw Error(ErrorCode::BackendUnavailable, "agent CLI \"" + config_.command.front() + "\" not found");
  }
  const auto before = snapshot_dir(req.workspace_root);

  JobRequest job;
  job.command = config_.command;
  job.working_dir = req.effective_working_dir();
  job.timeout = req.session_budget.value_or(config_.default_budget);
  job.label = "agent_" + std::string(to_string(req.stage));
  job.stdin_data = req.prompt;
  job.env_overrides["TOOLSMITH_STAGE"] = std::string(to_string(req.stage));
  job.env_overrides["TOOLSMITH_WORKSPACE"] = fs::absolute(req.workspace_root).string();
  std::string attachments;
  for (const auto& a : req.attachments) attachments += (attachments.empty() ? "" : ":") + a.string();
  job.env_overrides["TOOLSMITH_ATTACHMENTS"] = attachments;

  const auto result = executor_.submit(job, req.workspace_root / "logs");
  if (result.timed_out) throw Error(ErrorCode::SessionTimeout, config_.id + " exceeded its session budget");

  AgentResponse resp;
  absorb_cli_output(read_file(result.stdout_log), resp);
  if (result.exit_code != 0) {
    resp.ok = false;
    resp.failure_reason = "agent exited with code " + std::to_string(result.exit_code) + ": " + tail_log(result.stderr_log, 5);
  }
  const auto after = snapshot_dir(req.workspace_root);
  for (const auto& [key, digest] : after.entries) {
    if (key.starts_with("logs/")) continue;
    auto it = before.entries.find(key);
    if (it == before.entries.end() || it->second != digest) resp.artifacts_written.push_back(key);
  }
  return resp;
}

}  // namespace toolsmith
