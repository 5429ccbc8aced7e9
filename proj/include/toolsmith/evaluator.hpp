#pragma once

#include "toolsmith/agent.hpp"
#include "toolsmith/evaluation.hpp"
#include "toolsmith/prompts.hpp"
#include "toolsmith/workspace.hpp"

namespace toolsmith {

/// Runs the evaluation session and reads back evaluation.json. Any stale
/// evaluation.json is removed first so that a session which writes nothing
/// is reported as MissingEvaluationFile. A missing report.md forces
/// result_complete=false regardless of the payload.
EvaluationResult evaluate(const WorkspacePaths& ws, const SessionContext& session,
                          const PromptSet& prompts = PromptSet::defaults());

}  // namespace toolsmith
