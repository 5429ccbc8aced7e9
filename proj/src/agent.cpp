#include "toolsmith/agent.hpp"

#include "toolsmith/error.hpp"

namespace toolsmith {

CategoryNode Disclosure::open(const CategoryPath& path) {
  if (!registry_) throw Error(ErrorCode::PreconditionViolation, "no toolset attached to this session");
  if (!path.empty()) {
    const CategoryPath parent(path.begin(), path.end() - 1);
    if (!visited_.contains(parent)) {
      throw Error(ErrorCode::PreconditionViolation, "open " + join_category(parent) + " before " + join_category(path));
    }
  }
  auto node = registry_->list_children(path);
  visited_.insert(path);
  return node;
}

std::string Disclosure::open_text(const CategoryPath& path) { return render_listing(open(path), *registry_); }

std::string session_id_for(const AgentRequest& req) {
  std::string id = (req.task_id.empty() ? "session" : req.task_id) + "-i" + std::to_string(req.iteration) + "-" +
                   std::string(to_string(req.stage));
  if (!req.subject.empty()) {
    std::string subject = req.subject;
    for (char& c : subject) {
      if (c == '/') c = '.';
    }
    id += "-" + subject;
  }
  return id + "-a" + std::to_string(req.attempt);
}

AgentResponse spawn_session(const AgentRequest& req, AgentBackend& backend) {
  if (req.prompt.empty()) throw Error(ErrorCode::InvalidArgument, "session prompt is empty");
  if (!fs::is_directory(req.workspace_root)) {
    throw Error(ErrorCode::PreconditionViolation, "workspace " + req.workspace_root.string() + " does not exist");
  }
  AgentResponse resp = backend.run(req);
  resp.session_id = session_id_for(req);
  for (const auto& a : resp.artifacts_written) {
    if (fs::path(a).is_absolute() || !is_within(req.workspace_root, a)) {
      throw Error(ErrorCode::BackendFailure, backend.id() + " reported an artifact outside the workspace: " + a);
    }
  }
  return resp;
}

AgentBackend& BackendSet::for_stage(Stage stage) const {
  if (auto it = overrides_.find(stage); it != overrides_.end() && it->second) return *it->second;
  if (!fallback_) throw Error(ErrorCode::BackendUnavailable, "no backend configured for " + std::string(to_string(stage)));
  return *fallback_;
}

AgentResponse run_stage_session(AgentRequest req, const SessionContext& ctx) {
  if (!ctx.backends) throw Error(ErrorCode::BackendUnavailable, "no backends configured");
  AgentBackend& backend = ctx.backends->for_stage(req.stage);
  if (req.task_id.empty()) req.task_id = ctx.task_id;
  for (const auto& a : ctx.attachments) req.attachments.push_back(a);
  AgentResponse resp = spawn_session(req, backend);
  if (ctx.sink) {
    StageSession s;
    s.stage = req.stage;
    s.session_id = resp.session_id;
    s.backend = backend.id();
    s.model = backend.model();
    s.usage = resp.usage;
    s.ok = resp.ok;
    ctx.sink(s);
  }
  if (!resp.ok) {
    throw Error(ErrorCode::BackendFailure, resp.session_id + ": " + resp.failure_reason);
  }
  return resp;
}

}  // namespace toolsmith
