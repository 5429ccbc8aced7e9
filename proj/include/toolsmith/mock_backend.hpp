#pragma once

#include "toolsmith/agent.hpp"
#include "toolsmith/executor.hpp"

#include <mutex>

namespace toolsmith {

struct PlaybookWrite {
  std::string path;  // relative to the session's working directory
  std::string content;
};

struct PlaybookCommand {
  std::vector<std::string> argv;
  std::string label = "script";
};

/// One scripted session. Key fields left unset match anything; the most
/// specific matching entry wins, ties going to the earliest entry.
struct PlaybookEntry {
  std::optional<std::string> task;
  std::optional<Stage> stage;
  std::optional<int> iteration;
  std::optional<std::string> subject;
  std::optional<int> attempt;

  std::vector<CategoryPath> navigate;
  std::vector<PlaybookWrite> writes;
  std::vector<PlaybookCommand> commands;
  std::optional<std::string> report;          // written to report.md
  std::optional<nlohmann::json> evaluation;  // written to evaluation.json
  std::optional<nlohmann::json> payload;
  std::vector<TranscriptStep> transcript;
  TokenUsage usage;
  std::optional<std::string> fail;

  int specificity() const;
  bool matches(const AgentRequest& req) const;
};

struct Playbook {
  std::string model = "mock";
  std::vector<PlaybookEntry> sessions;

  const PlaybookEntry* match(const AgentRequest& req) const;
};

// `{"model": ..., "sessions": [...]}`; throws ParseFailure.
Playbook parse_playbook(const nlohmann::json& doc);
Playbook load_playbook(const fs::path& path);

struct RecordedSession {
  Stage stage;
  std::string task_id;
  int iteration;
  std::string subject;
  int attempt;
  std::string prompt;
  std::set<CategoryPath> visited;
  std::vector<std::string> disclosed;  // listing text returned by each navigation step
  AgentResponse response;
};

/// Deterministic scripted backend: looks the request up in its playbook,
/// performs the scripted writes and commands and returns the scripted
/// payload and usage. A request without an entry raises PlaybookMiss.
class MockBackend : public AgentBackend {
 public:
  MockBackend(Playbook playbook, const JobExecutor* executor, std::string id = "mock");

  std::string id() const override { return id_; }
  std::string model() const override { return playbook_.model; }
  AgentResponse run(const AgentRequest& request) override;

  std::vector<RecordedSession> sessions() const;
  size_t count(Stage stage) const;

 private:
  Playbook playbook_;
  const JobExecutor* executor_;
  std::string id_;
  mutable std::mutex mutex_;
  std::vector<RecordedSession> log_;
};

}  // namespace toolsmith
