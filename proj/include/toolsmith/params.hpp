#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolsmith {

enum class SemanticType { Integer, Number, String, Boolean, Enum, List, Record, FilePath };

std::string_view to_string(SemanticType t) noexcept;
std::optional<SemanticType> semantic_type_from_string(std::string_view s) noexcept;

// Machine-checkable subset of parameter constraints; anything richer goes in `description`.
struct Constraints {
  std::optional<double> minimum;
  std::optional<double> maximum;
  std::optional<std::string> pattern;
  std::optional<std::string> description;
  friend bool operator==(const Constraints&, const Constraints&) = default;
};

struct ParamSpec {
  std::string name;
  SemanticType type = SemanticType::String;
  std::vector<std::string> enum_values;  // Enum only
  std::vector<ParamSpec> children;       // List: exactly one item spec; Record: fields
  std::optional<std::string> units;
  bool required = true;
  std::optional<Constraints> constraints;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

void to_json(nlohmann::json& j, const ParamSpec& p);
// Throws Error{ParseFailure} on structurally malformed documents; semantic
// problems (empty enum, bad names) are left for validate_params.
void from_json(const nlohmann::json& j, ParamSpec& p);

/// Well-formedness of a parameter list. `where` prefixes each violation.
std::vector<std::string> validate_params(const std::vector<ParamSpec>& params, const std::string& where);

/// Conformance of a record value against a parameter list: required fields
/// present, no unknown fields, every present value well-typed and within
/// its constraints.
std::vector<std::string> check_record(const std::vector<ParamSpec>& params, const nlohmann::json& value,
                                      const std::string& where = "");

// "integer", "enum(a|b)", "list(number)", "record(x: integer, y?: string)".
std::string render_type(const ParamSpec& p);

// "a: integer, b?: number" ("none" when empty).
std::string render_params(const std::vector<ParamSpec>& params);

// A value of the wrong type for `p`, used to probe tools for silent fallbacks.
nlohmann::json mistyped_value(const ParamSpec& p);

}  // namespace toolsmith
