#pragma once

#include "toolsmith/fsutil.hpp"
#include "toolsmith/registry.hpp"
#include "toolsmith/stage.hpp"
#include "toolsmith/usage.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace toolsmith {

/// Navigation handle given to a session. Only immediate children are ever
/// returned, and a category can be opened only after its parent has been,
/// so a session sees exactly the prefix-closure of the paths it walked.
class Disclosure {
 public:
  explicit Disclosure(const Registry* registry) : registry_(registry) {}

  bool available() const { return registry_ != nullptr; }
  // Throws NoSuchCategory for unknown paths and PreconditionViolation when
  // the parent has not been opened yet.
  CategoryNode open(const CategoryPath& path);
  std::string open_text(const CategoryPath& path);
  const std::set<CategoryPath>& visited() const { return visited_; }

 private:
  const Registry* registry_;
  std::set<CategoryPath> visited_;
};

struct AgentRequest {
  Stage stage = Stage::TaskExecution;
  std::string prompt;
  fs::path workspace_root;
  std::vector<fs::path> attachments;
  std::optional<std::chrono::milliseconds> session_budget;

  // Addressing used for deterministic session ids and playbook lookup.
  std::string task_id;
  int iteration = 1;
  std::string subject;  // requirement or tool name, reorg directory
  int attempt = 1;

  fs::path working_dir;  // defaults to workspace_root
  std::shared_ptr<Disclosure> disclosure;

  fs::path effective_working_dir() const { return working_dir.empty() ? workspace_root : working_dir; }
};

struct TranscriptStep {
  std::string kind;
  std::string summary;
  friend bool operator==(const TranscriptStep&, const TranscriptStep&) = default;
};

struct AgentResponse {
  std::string session_id;
  std::vector<TranscriptStep> transcript;
  std::vector<std::string> artifacts_written;  // relative to workspace_root
  TokenUsage usage;
  bool ok = true;
  std::string failure_reason;
  std::optional<nlohmann::json> payload;  // structured stage output (plans, verdicts)
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual std::string id() const = 0;
  // Pricing key for this backend's sessions.
  virtual std::string model() const = 0;
  virtual AgentResponse run(const AgentRequest& request) = 0;
};

// "<task>-i<iteration>-<stage>[-<subject>]-a<attempt>".
std::string session_id_for(const AgentRequest& req);

/// Runs one fresh session: checks the request, delegates to the backend,
/// assigns the deterministic session id and rejects artifacts reported
/// outside the workspace.
AgentResponse spawn_session(const AgentRequest& req, AgentBackend& backend);

// Chooses a backend per stage; stages without an override use the default.
class BackendSet {
 public:
  BackendSet() = default;
  explicit BackendSet(std::shared_ptr<AgentBackend> fallback) : fallback_(std::move(fallback)) {}

  void set(Stage stage, std::shared_ptr<AgentBackend> backend) { overrides_[stage] = std::move(backend); }
  AgentBackend& for_stage(Stage stage) const;

 private:
  std::shared_ptr<AgentBackend> fallback_;
  std::map<Stage, std::shared_ptr<AgentBackend>> overrides_;
};

// Sessions recorded as they complete, including failed ones.
using SessionSink = std::function<void(const StageSession&)>;

struct SessionContext {
  std::string task_id;
  int iteration = 1;
  const BackendSet* backends = nullptr;
  SessionSink sink;
  std::vector<fs::path> attachments;  // skill documents, passed verbatim
};

/// spawn_session through the context's backend for `req.stage`, reporting
/// the session to the sink. A response with ok=false raises BackendFailure
/// after it has been recorded.
AgentResponse run_stage_session(AgentRequest req, const SessionContext& ctx);

}  // namespace toolsmith
