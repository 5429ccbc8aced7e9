#include "toolsmith/prompts.hpp"

#include "toolsmith/error.hpp"

namespace toolsmith {

const PromptSet& PromptSet::defaults() {
  static const PromptSet set = [] {
    PromptSet s;
    for (const auto& [name, text] : detail::embedded_prompts()) {
      if (auto stage = stage_from_string(name)) s.templates_[*stage] = text;
    }
    return s;
  }();
  return set;
}

PromptSet PromptSet::with_overrides(const fs::path& dir) {
  PromptSet s = defaults();
  for (const auto& [stage, text] : s.templates_) {
    const fs::path file = dir / (std::string(to_string(stage)) + ".md");
    if (fs::exists(file)) s.templates_[stage] = read_file(file);
  }
  return s;
}

const std::string& PromptSet::template_for(Stage stage) const {
  auto it = templates_.find(stage);
  if (it == templates_.end()) throw Error(ErrorCode::UnknownStage, "no template for " + std::string(to_string(stage)));
  return it->second;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    if (auto it = vars.find(key); it != vars.end()) out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

std::string select_stage_prompt(Stage stage, const PromptInputs& in, const PromptSet& set) {
  std::map<std::string, std::string> vars = in.vars;
  vars["question"] = in.question;
  if (stage == Stage::ToolAnalysis || stage == Stage::TaskExecution) {
    std::string listing = in.listing.value_or("");
    while (!listing.empty() && listing.back() == '\n') listing.pop_back();
    vars["listing"] = listing.empty() ? "(empty)" : listing;
    vars.try_emplace("index", "tools/INDEX.md");
  }
  for (const char* key : {"feedback", "report_status"}) {
    if (auto it = vars.find(key); it == vars.end() || it->second.empty()) vars[key] = "(none)";
  }
  return render_template(set.template_for(stage), vars);
}

std::string select_stage_prompt(std::string_view stage, const PromptInputs& in, const PromptSet& set) {
  auto s = stage_from_string(stage);
  if (!s) throw Error(ErrorCode::UnknownStage, std::string(stage));
  return select_stage_prompt(*s, in, set);
}

}  // namespace toolsmith
