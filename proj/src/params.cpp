#include "toolsmith/params.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace toolsmith {

std::string_view to_string(SemanticType t) noexcept {
  switch (t) {
    case SemanticType::Integer: return "integer";
    case SemanticType::Number: return "number";
    case SemanticType::String: return "string";
    case SemanticType::Boolean: return "boolean";
    case SemanticType::Enum: return "enum";
    case SemanticType::List: return "list";
    case SemanticType::Record: return "record";
    case SemanticType::FilePath: return "file-path";
  }
  return "string";
}

std::optional<SemanticType> semantic_type_from_string(std::string_view s) noexcept {
  if (s == "integer") return SemanticType::Integer;
  if (s == "number") return SemanticType::Number;
  if (s == "string") return SemanticType::String;
  if (s == "boolean") return SemanticType::Boolean;
  if (s == "enum") return SemanticType::Enum;
  if (s == "list") return SemanticType::List;
  if (s == "record") return SemanticType::Record;
  if (s == "file-path") return SemanticType::FilePath;
  return std::nullopt;
}

void to_json(nlohmann::json& j, const ParamSpec& p) {
  j = nlohmann::json::object();
  j["name"] = p.name;
  j["type"] = std::string(to_string(p.type));
  j["required"] = p.required;
  j["units"] = p.units ? nlohmann::json(*p.units) : nlohmann::json(nullptr);
  if (p.type == SemanticType::Enum) j["values"] = p.enum_values;
  if (p.type == SemanticType::List) j["items"] = p.children.empty() ? nlohmann::json(nullptr) : nlohmann::json(p.children.front());
  if (p.type == SemanticType::Record) j["fields"] = p.children;
  if (p.constraints) {
    nlohmann::json c = nlohmann::json::object();
    if (p.constraints->minimum) c["minimum"] = *p.constraints->minimum;
    if (p.constraints->maximum) c["maximum"] = *p.constraints->maximum;
    if (p.constraints->pattern) c["pattern"] = *p.constraints->pattern;
    if (p.constraints->description) c["description"] = *p.constraints->description;
    j["constraints"] = std::move(c);
  } else {
    j["constraints"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ParamSpec& p) {
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "parameter spec must be an object");
  p = ParamSpec{};
  if (!j.contains("name") || !j.at("name").is_string()) throw Error(ErrorCode::ParseFailure, "parameter without a name");
  p.name = j.at("name").get<std::string>();
  if (!j.contains("type") || !j.at("type").is_string()) {
    throw Error(ErrorCode::ParseFailure, "parameter " + p.name + " has no type");
  }
  const auto type = semantic_type_from_string(j.at("type").get<std::string>());
  if (!type) throw Error(ErrorCode::ParseFailure, "parameter " + p.name + ": unknown type " + j.at("type").dump());
  p.type = *type;
  p.required = j.value("required", true);
  if (j.contains("units") && j.at("units").is_string()) p.units = j.at("units").get<std::string>();
  if (p.type == SemanticType::Enum && j.contains("values")) p.enum_values = j.at("values").get<std::vector<std::string>>();
  if (p.type == SemanticType::List && j.contains("items") && !j.at("items").is_null()) {
    p.children.push_back(j.at("items").get<ParamSpec>());
  }
  if (p.type == SemanticType::Record && j.contains("fields")) p.children = j.at("fields").get<std::vector<ParamSpec>>();
  if (j.contains("constraints") && j.at("constraints").is_object()) {
    const auto& c = j.at("constraints");
    Constraints cons;
    if (c.contains("minimum")) cons.minimum = c.at("minimum").get<double>();
    if (c.contains("maximum")) cons.maximum = c.at("maximum").get<double>();
    if (c.contains("pattern")) cons.pattern = c.at("pattern").get<std::string>();
    if (c.contains("description")) cons.description = c.at("description").get<std::string>();
    p.constraints = std::move(cons);
  }
}

namespace {

bool is_identifier(const std::string& s) {
  if (s.empty()) return false;
  const char c0 = s.front();
  if (!((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z') || c0 == '_')) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

void validate_one(const ParamSpec& p, const std::string& where, std::vector<std::string>& out) {
  const std::string at = where + "." + (p.name.empty() ? "<unnamed>" : p.name);
  if (p.name.empty()) {
    out.push_back(where + ": parameter name empty");
  } else if (!is_identifier(p.name)) {
    out.push_back(at + ": name is not an identifier");
  }
  switch (p.type) {
    case SemanticType::Enum: {
      if (p.enum_values.empty()) out.push_back(at + ": enum has no values");
      std::set<std::string> uniq(p.enum_values.begin(), p.enum_values.end());
      if (uniq.size() != p.enum_values.size()) out.push_back(at + ": enum values repeat");
      break;
    }
    case SemanticType::List:
      if (p.children.size() != 1) {
        out.push_back(at + ": list needs exactly one item spec");
      } else {
        validate_one(p.children.front(), at, out);
      }
      break;
    case SemanticType::Record: {
      if (p.children.empty()) out.push_back(at + ": record has no fields");
      for (const auto& f : p.children) validate_one(f, at, out);
      std::set<std::string> names;
      for (const auto& f : p.children) {
        if (!names.insert(f.name).second) out.push_back(at + ": duplicate field " + f.name);
      }
      break;
    }
    default:
      if (!p.children.empty()) out.push_back(at + ": scalar parameter has nested specs");
      break;
  }
  if (p.constraints) {
    const auto& c = *p.constraints;
    if (c.minimum && c.maximum && *c.minimum > *c.maximum) out.push_back(at + ": minimum exceeds maximum");
    if ((c.minimum || c.maximum) && p.type != SemanticType::Integer && p.type != SemanticType::Number) {
      out.push_back(at + ": range constraint on non-numeric parameter");
    }
    if (c.pattern) {
      try {
        std::regex re(*c.pattern);
      } catch (const std::regex_error&) {
        out.push_back(at + ": invalid pattern");
      }
    }
  }
}

void check_value(const ParamSpec& p, const nlohmann::json& v, const std::string& at, std::vector<std::string>& out) {
  auto wrong = [&](const char* expected) { out.push_back(at + ": expected " + expected + ", got " + v.type_name()); };
  switch (p.type) {
    case SemanticType::Integer:
      if (!v.is_number_integer()) return wrong("integer");
      break;
    case SemanticType::Number:
      if (!v.is_number()) return wrong("number");
      break;
    case SemanticType::Boolean:
      if (!v.is_boolean()) return wrong("boolean");
      return;
    case SemanticType::String:
    case SemanticType::FilePath:
      if (!v.is_string()) return wrong("string");
      break;
    case SemanticType::Enum: {
      if (!v.is_string()) return wrong("enum string");
      const auto s = v.get<std::string>();
      if (std::find(p.enum_values.begin(), p.enum_values.end(), s) == p.enum_values.end()) {
        out.push_back(at + ": value \"" + s + "\" not in enum");
      }
      return;
    }
    case SemanticType::List:
      if (!v.is_array()) return wrong("list");
      if (!p.children.empty()) {
        for (size_t i = 0; i < v.size(); ++i) check_value(p.children.front(), v[i], at + "[" + std::to_string(i) + "]", out);
      }
      return;
    case SemanticType::Record: {
      const auto nested = check_record(p.children, v, at);
      out.insert(out.end(), nested.begin(), nested.end());
      return;
    }
  }
  if (!p.constraints) return;
  const auto& c = *p.constraints;
  if (v.is_number()) {
    const double x = v.get<double>();
    if (c.minimum && x < *c.minimum) out.push_back(at + ": below minimum");
    if (c.maximum && x > *c.maximum) out.push_back(at + ": above maximum");
  }
  if (v.is_string() && c.pattern) {
    try {
      if (!std::regex_match(v.get<std::string>(), std::regex(*c.pattern))) out.push_back(at + ": does not match pattern");
    } catch (const std::regex_error&) {
      out.push_back(at + ": invalid pattern");
    }
  }
}

}  // namespace

std::vector<std::string> validate_params(const std::vector<ParamSpec>& params, const std::string& where) {
  std::vector<std::string> out;
  std::set<std::string> names;
  for (const auto& p : params) {
    validate_one(p, where, out);
    if (!p.name.empty() && !names.insert(p.name).second) out.push_back(where + ": duplicate parameter " + p.name);
  }
  return out;
}

std::vector<std::string> check_record(const std::vector<ParamSpec>& params, const nlohmann::json& value,
                                      const std::string& where) {
  std::vector<std::string> out;
  const std::string prefix = where.empty() ? "" : where + ".";
  if (!value.is_object()) {
    out.push_back((where.empty() ? "<root>" : where) + ": expected record, got " + value.type_name());
    return out;
  }
  for (const auto& p : params) {
    auto it = value.find(p.name);
    if (it == value.end() || it->is_null()) {
      if (p.required) out.push_back(prefix + p.name + ": required field missing");
      continue;
    }
    check_value(p, *it, prefix + p.name, out);
  }
  for (auto it = value.begin(); it != value.end(); ++it) {
    const bool known = std::any_of(params.begin(), params.end(), [&](const ParamSpec& p) { return p.name == it.key(); });
    if (!known) out.push_back(prefix + it.key() + ": unexpected field");
  }
  return out;
}

std::string render_type(const ParamSpec& p) {
  switch (p.type) {
    case SemanticType::Enum: {
      std::string s = "enum(";
      for (size_t i = 0; i < p.enum_values.size(); ++i) s += (i ? "|" : "") + p.enum_values[i];
      return s + ")";
    }
    case SemanticType::List:
      return "list(" + (p.children.empty() ? std::string("?") : render_type(p.children.front())) + ")";
    case SemanticType::Record:
      return "record(" + render_params(p.children) + ")";
    default:
      return std::string(to_string(p.type));
  }
}

std::string render_params(const std::vector<ParamSpec>& params) {
  if (params.empty()) return "none";
  std::string s;
  for (size_t i = 0; i < params.size(); ++i) {
    if (i) s += ", ";
    s += params[i].name + (params[i].required ? "" : "?") + ": " + render_type(params[i]);
  }
  return s;
}

nlohmann::json mistyped_value(const ParamSpec& p) {
  switch (p.type) {
    case SemanticType::Integer:
    case SemanticType::Number:
    case SemanticType::Boolean:
      return "__not_a_" + std::string(to_string(p.type)) + "__";
    case SemanticType::String:
    case SemanticType::FilePath:
    case SemanticType::Enum:
      return 123456789;
    case SemanticType::List:
    case SemanticType::Record:
      return "__not_a_container__";
  }
  return nullptr;
}

}  // namespace toolsmith
