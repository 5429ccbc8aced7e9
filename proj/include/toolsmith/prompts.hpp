#pragma once

#include "toolsmith/fsutil.hpp"
#include "toolsmith/stage.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace toolsmith {

struct PromptInputs {
  std::string question;
  // Root-level listing, used by the analysis and execution templates.
  std::optional<std::string> listing;
  std::map<std::string, std::string> vars;
};

/// Stage templates with `{{name}}` placeholders. Defaults are compiled in
/// from prompts/*.md; a directory of `<stage>.md` files can override them.
class PromptSet {
 public:
  static const PromptSet& defaults();
  static PromptSet with_overrides(const fs::path& dir);

  const std::string& template_for(Stage stage) const;

 private:
  std::map<Stage, std::string> templates_;
};

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

std::string select_stage_prompt(Stage stage, const PromptInputs& in, const PromptSet& set = PromptSet::defaults());
// Throws UnknownStage for names outside the stage set.
std::string select_stage_prompt(std::string_view stage, const PromptInputs& in,
                                const PromptSet& set = PromptSet::defaults());

namespace detail {
// Generated from prompts/*.md at configure time.
const std::map<std::string, std::string>& embedded_prompts();
}  // namespace detail

}  // namespace toolsmith
