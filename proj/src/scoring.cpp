#include "toolsmith/scoring.hpp"

#include "toolsmith/error.hpp"

#include <cctype>
#include <cmath>

namespace toolsmith {
namespace {

using nlohmann::json;

// Reference values come from decimal text, so a deviation that equals a
// threshold exactly in decimal may land a few ulps above it in binary.
bool within(double deviation, double limit, double scale) {
  return deviation <= limit + 1e-9 * std::max(1.0, std::abs(scale));
}

double band(double deviation, double full, const std::optional<double>& partial, double scale) {
  if (within(deviation, full, scale)) return 1.0;
  if (partial && within(deviation, *partial, scale)) return 0.5;
  return 0.0;
}

double number_of(const Criterion& c, const json& v) {
  if (!v.is_number()) {
    throw Error(ErrorCode::TypeMismatch, "criterion " + c.id + " expects a number, got " + std::string(v.type_name()));
  }
  return v.get<double>();
}

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

double required_number(const json& j, const char* key, const std::string& id) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw Error(ErrorCode::InvalidArgument, "criterion " + id + ": \"" + key + "\" must be a number");
  }
  return j.at(key).get<double>();
}

std::optional<double> optional_number(const json& j, const char* key, const std::string& id) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return required_number(j, key, id);
}

}  // namespace

std::string_view to_string(CriterionKind k) noexcept {
  switch (k) {
    case CriterionKind::ToleranceBand: return "tolerance_band";
    case CriterionKind::ExactMatch: return "exact_match";
    case CriterionKind::MadThreshold: return "mad_threshold";
    case CriterionKind::RangeCheck: return "range_check";
    case CriterionKind::RelativeErrorBand: return "relative_error_band";
    case CriterionKind::Judged: return "judged";
  }
  return "unknown";
}

void validate_criterion(const Criterion& c) {
  auto fail = [&](const std::string& why) { throw Error(ErrorCode::InvalidArgument, "criterion " + c.id + ": " + why); };
  if (c.id.empty()) throw Error(ErrorCode::InvalidArgument, "criterion without id");
  switch (c.kind) {
    case CriterionKind::ToleranceBand:
    case CriterionKind::MadThreshold:
    case CriterionKind::RelativeErrorBand:
      if (!std::isfinite(c.full) || c.full < 0) fail("full threshold must be finite and >= 0");
      if (c.partial && (!std::isfinite(*c.partial) || *c.partial < c.full)) fail("partial threshold below full");
      if (c.kind == CriterionKind::RelativeErrorBand && c.ref == 0) fail("relative band needs a nonzero ref");
      if (c.kind == CriterionKind::MadThreshold && c.refs.empty()) fail("mad_threshold needs refs");
      break;
    case CriterionKind::RangeCheck:
      if (!(c.lo <= c.hi)) fail("range lo > hi");
      break;
    case CriterionKind::ExactMatch:
    case CriterionKind::Judged: break;
  }
}

Criterion parse_criterion(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "criterion must be an object");
  Criterion c;
  c.id = j.value("id", "");
  c.description = j.value("description", "");
  const std::string kind = j.value("kind", "");
  if (kind == "tolerance_band" || kind == "relative_error_band") {
    c.kind = kind == "tolerance_band" ? CriterionKind::ToleranceBand : CriterionKind::RelativeErrorBand;
    c.ref = required_number(j, "ref", c.id);
    c.full = required_number(j, kind == "tolerance_band" ? "full_tol" : "full_rel", c.id);
    c.partial = optional_number(j, kind == "tolerance_band" ? "partial_tol" : "partial_rel", c.id);
  } else if (kind == "exact_match") {
    c.kind = CriterionKind::ExactMatch;
    if (!j.contains("ref") || !j.at("ref").is_string()) throw Error(ErrorCode::InvalidArgument, "criterion " + c.id + ": ref must be a string");
    c.ref_text = j.at("ref").get<std::string>();
    c.case_sensitive = j.value("case_sensitive", true);
  } else if (kind == "mad_threshold") {
    c.kind = CriterionKind::MadThreshold;
    if (!j.contains("refs") || !j.at("refs").is_array()) throw Error(ErrorCode::InvalidArgument, "criterion " + c.id + ": refs must be an array");
    for (const auto& r : j.at("refs")) {
      if (!r.is_number()) throw Error(ErrorCode::InvalidArgument, "criterion " + c.id + ": refs must be numbers");
      c.refs.push_back(r.get<double>());
    }
    c.full = required_number(j, "full_mad", c.id);
    c.partial = optional_number(j, "partial_mad", c.id);
  } else if (kind == "range_check") {
    c.kind = CriterionKind::RangeCheck;
    c.lo = required_number(j, "lo", c.id);
    c.hi = required_number(j, "hi", c.id);
  } else if (kind == "judged") {
    c.kind = CriterionKind::Judged;
    c.verdict = j.value("verdict", c.id);
  } else {
    throw Error(ErrorCode::InvalidArgument, "criterion " + c.id + ": unknown kind \"" + kind + "\"");
  }
  validate_criterion(c);
  return c;
}

double score_criterion(const Criterion& c, const json* observed, const std::map<std::string, bool>& verdicts) {
  if (c.kind == CriterionKind::Judged) {
    const auto key = c.verdict.empty() ? c.id : c.verdict;
    const auto it = verdicts.find(key);
    if (it == verdicts.end()) throw Error(ErrorCode::MissingVerdict, "no verdict for " + key);
    return it->second ? 1.0 : 0.0;
  }
  if (observed == nullptr || observed->is_null()) return 0.0;
  const json& v = *observed;
  switch (c.kind) {
    case CriterionKind::ToleranceBand: return band(std::abs(number_of(c, v) - c.ref), c.full, c.partial, c.ref);
    case CriterionKind::RelativeErrorBand:
      return band(std::abs(number_of(c, v) - c.ref) / std::abs(c.ref), c.full, c.partial, 1.0);
    case CriterionKind::RangeCheck: {
      const double x = number_of(c, v);
      const double scale = std::max(std::abs(c.lo), std::abs(c.hi));
      return within(c.lo - x, 0, scale) && within(x - c.hi, 0, scale) ? 1.0 : 0.0;
    }
    case CriterionKind::ExactMatch: {
      if (!v.is_string()) throw Error(ErrorCode::TypeMismatch, "criterion " + c.id + " expects a string");
      const auto s = v.get<std::string>();
      return (c.case_sensitive ? s == c.ref_text : lower(s) == lower(c.ref_text)) ? 1.0 : 0.0;
    }
    case CriterionKind::MadThreshold: {
      if (!v.is_array() || v.size() != c.refs.size()) {
        throw Error(ErrorCode::TypeMismatch,
                    "criterion " + c.id + " expects an array of " + std::to_string(c.refs.size()) + " numbers");
      }
      double sum = 0, scale = 0;
      for (size_t i = 0; i < c.refs.size(); ++i) {
        sum += std::abs(number_of(c, v[i]) - c.refs[i]);
        scale = std::max(scale, std::abs(c.refs[i]));
      }
      return band(sum / static_cast<double>(c.refs.size()), c.full, c.partial, scale);
    }
    case CriterionKind::Judged: break;
  }
  return 0.0;
}

double score_accuracy(const std::vector<Criterion>& criteria, const json& observed,
                      const std::map<std::string, bool>& verdicts, std::vector<std::string>* warnings) {
  if (criteria.empty()) throw Error(ErrorCode::InvalidArgument, "no accuracy criteria");
  double sum = 0;
  for (const auto& c : criteria) {
    const json* v = nullptr;
    if (observed.is_object() && observed.contains(c.id)) v = &observed.at(c.id);
    if (c.kind != CriterionKind::Judged && (v == nullptr || v->is_null()) && warnings) {
      warnings->push_back("no observed value for " + c.id + "; scored 0");
    }
    sum += score_criterion(c, v, verdicts);
  }
  return sum / static_cast<double>(criteria.size());
}

double score_methodology(const std::vector<MethodologyStage>& stages) {
  if (stages.empty()) throw Error(ErrorCode::InvalidArgument, "no methodology stages");
  double weights = 0, total = 0;
  for (const auto& s : stages) {
    if (!(s.weight > 0 && s.weight <= 1)) throw Error(ErrorCode::InvalidArgument, "stage " + s.id + ": weight outside (0, 1]");
    if (!(s.score >= 0 && s.score <= 10)) throw Error(ErrorCode::InvalidArgument, "stage " + s.id + ": score outside [0, 10]");
    weights += s.weight;
    total += s.weight * (s.score / 10.0);
  }
  if (std::abs(weights - 1.0) > 1e-9) {
    throw Error(ErrorCode::WeightSumViolation, "stage weights sum to " + std::to_string(weights), {{"sum", weights}});
  }
  return total;
}

double combined(double accuracy, double methodology) { return (accuracy + methodology) / 2.0; }

Rubric parse_rubric(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "rubric must be an object");
  Rubric r;
  r.id = j.value("id", "");
  if (!j.contains("criteria") || !j.at("criteria").is_array()) throw Error(ErrorCode::InvalidArgument, "rubric needs a criteria array");
  for (const auto& c : j.at("criteria")) r.criteria.push_back(parse_criterion(c));
  if (j.contains("methodology")) {
    for (const auto& s : j.at("methodology")) {
      MethodologyStage st;
      st.id = s.at("id").get<std::string>();
      st.description = s.value("description", "");
      st.weight = s.at("weight").get<double>();
      r.stages.push_back(std::move(st));
    }
  }
  return r;
}

RunResults parse_results(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "results must be an object");
  RunResults r;
  if (j.contains("observed")) {
    if (!j.at("observed").is_object()) throw Error(ErrorCode::InvalidArgument, "observed must be an object");
    r.observed = j.at("observed");
  }
  if (j.contains("verdicts")) {
    for (const auto& [k, v] : j.at("verdicts").items()) {
      if (!v.is_boolean()) throw Error(ErrorCode::TypeMismatch, "verdict " + k + " must be a boolean");
      r.verdicts[k] = v.get<bool>();
    }
  }
  if (j.contains("methodology")) {
    for (const auto& [k, v] : j.at("methodology").items()) {
      if (!v.is_number()) throw Error(ErrorCode::TypeMismatch, "stage score " + k + " must be a number");
      r.stage_scores[k] = v.get<double>();
    }
  }
  return r;
}

RubricScore score_run(const Rubric& rubric, const RunResults& results, std::vector<std::string>* warnings) {
  RubricScore s;
  s.accuracy = score_accuracy(rubric.criteria, results.observed, results.verdicts, warnings);
  auto stages = rubric.stages;
  for (auto& st : stages) {
    const auto it = results.stage_scores.find(st.id);
    if (it != results.stage_scores.end()) {
      st.score = it->second;
    } else if (warnings) {
      warnings->push_back("no methodology score for stage " + st.id + "; scored 0");
    }
  }
  s.methodology = stages.empty() ? 0.0 : score_methodology(stages);
  s.combined = combined(s.accuracy, s.methodology);
  return s;
}

}  // namespace toolsmith
