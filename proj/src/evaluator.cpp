#include "toolsmith/evaluator.hpp"

#include "toolsmith/error.hpp"

namespace toolsmith {

EvaluationResult evaluate(const WorkspacePaths& ws, const SessionContext& session, const PromptSet& prompts) {
  if (!fs::exists(ws.question)) throw Error(ErrorCode::PreconditionViolation, "question.md is missing");
  std::error_code ec;
  fs::remove(ws.evaluation, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot clear " + ws.evaluation.string() + ": " + ec.message());

  const auto report = read_report(ws);
  PromptInputs in;
  in.question = read_file(ws.question);
  in.vars["report_status"] = report ? "report.md is present (" + std::to_string(report->size()) + " bytes)."
                                    : "report.md is missing.";
  AgentRequest req;
  req.stage = Stage::Evaluation;
  req.prompt = select_stage_prompt(Stage::Evaluation, in, prompts);
  req.workspace_root = ws.root;
  req.iteration = session.iteration;
  run_stage_session(std::move(req), session);

  if (!fs::exists(ws.evaluation)) throw Error(ErrorCode::MissingEvaluationFile, ws.evaluation.string());
  const std::string text = read_file(ws.evaluation);
  if (!is_valid_utf8(text)) throw Error(ErrorCode::ParseFailure, "evaluation.json is not valid UTF-8");
  EvaluationResult result = parse_evaluation(text);
  if (!report) result = apply_missing_report_override(std::move(result));
  return result;
}

}  // namespace toolsmith
