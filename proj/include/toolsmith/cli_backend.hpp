#pragma once

#include "toolsmith/agent.hpp"
#include "toolsmith/executor.hpp"

namespace toolsmith {

struct CliBackendConfig {
  std::string id = "cli";
  std::string model;
  std::vector<std::string> command;  // the prompt is fed on stdin
  std::chrono::milliseconds default_budget{std::chrono::minutes(60)};
};

/// Adapter for an external coding-agent CLI. The agent runs in the session's
/// working directory with the prompt on stdin and TOOLSMITH_STAGE,
/// TOOLSMITH_WORKSPACE and TOOLSMITH_ATTACHMENTS in its environment.
///
/// Stdout lines that are JSON objects are read as structured records:
/// `usage` (token counts, summed), `payload` (last wins), `transcript`
/// ({kind, summary}). Other lines become transcript steps. Artifacts are
/// the workspace files created or changed during the session.
class CliBackend : public AgentBackend {
 public:
  explicit CliBackend(CliBackendConfig config);

  std::string id() const override { return config_.id; }
  std::string model() const override { return config_.model; }
  AgentResponse run(const AgentRequest& request) override;

 private:
  CliBackendConfig config_;
  JobExecutor executor_;
};

// Parsing of the adapter's stdout, exposed for tests.
void absorb_cli_output(std::string_view stdout_text, AgentResponse& resp);

}  // namespace toolsmith
