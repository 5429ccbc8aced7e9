#include "toolsmith/manifest.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"

#include <sstream>

namespace toolsmith {

std::string join_category(const CategoryPath& path) {
  std::string s;
  for (size_t i = 0; i < path.size(); ++i) s += (i ? "/" : "") + path[i];
  return s;
}

CategoryPath split_category(const std::string& path) {
  CategoryPath out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/')) {
    if (!part.empty() && part != ".") out.push_back(part);
  }
  return out;
}

void to_json(nlohmann::json& j, const ToolManifest& m) {
  j = nlohmann::json{
      {"name", m.name},
      {"description", m.description},
      {"category_path", m.category_path},
      {"version", m.version},
      {"inputs", m.inputs},
      {"outputs", m.outputs},
      {"entrypoint", {{"source", m.entrypoint.source}, {"callable", m.entrypoint.callable}}},
      {"provenance",
       {{"generated_by", m.provenance.generated_by},
        {"task_id", m.provenance.task_id},
        {"created_at", m.provenance.created_at}}},
      {"tests_passed", m.tests_passed},
  };
}

void from_json(const nlohmann::json& j, ToolManifest& m) {
  try {
    m = ToolManifest{};
    m.name = j.at("name").get<std::string>();
    m.description = j.value("description", "");
    m.category_path = j.value("category_path", CategoryPath{});
    m.version = j.value("version", int64_t{1});
    if (j.contains("inputs")) m.inputs = j.at("inputs").get<std::vector<ParamSpec>>();
    if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::vector<ParamSpec>>();
    if (j.contains("entrypoint")) {
      const auto& e = j.at("entrypoint");
      m.entrypoint.source = e.value("source", "");
      m.entrypoint.callable = e.value("callable", "");
    }
    if (j.contains("provenance")) {
      const auto& p = j.at("provenance");
      m.provenance.generated_by = p.value("generated_by", "");
      m.provenance.task_id = p.value("task_id", "");
      m.provenance.created_at = p.value("created_at", "");
    }
    m.tests_passed = j.value("tests_passed", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("manifest: ") + e.what());
  }
}

std::string manifest_text(const ToolManifest& m) { return nlohmann::json(m).dump(2) + "\n"; }

ToolManifest parse_manifest(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<ToolManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("manifest: ") + e.what());
  }
}

bool is_tool_name(const std::string& s) {
  if (s.empty()) return false;
  const char c0 = s.front();
  if (!((c0 >= 'a' && c0 <= 'z') || (c0 >= 'A' && c0 <= 'Z') || c0 == '_')) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

std::vector<std::string> validate_manifest(const ToolManifest& m) {
  std::vector<std::string> v;
  if (m.name.empty()) {
    v.push_back("name: empty");
  } else if (!is_tool_name(m.name)) {
    v.push_back("name: not an identifier");
  }
  if (m.description.empty()) v.push_back("description: empty");
  if (m.version < 1) v.push_back("version: must be >= 1");
  for (const auto& c : m.category_path) {
    if (!is_safe_identifier(c)) v.push_back("category_path: invalid component \"" + c + "\"");
  }
  for (auto& s : validate_params(m.inputs, "inputs")) v.push_back(std::move(s));
  for (auto& s : validate_params(m.outputs, "outputs")) v.push_back(std::move(s));
  if (m.entrypoint.source.empty()) {
    v.push_back("entrypoint.source: empty");
  } else if (m.entrypoint.source.find('/') != std::string::npos || m.entrypoint.source.find("..") != std::string::npos) {
    v.push_back("entrypoint.source: must be a file name adjacent to the manifest");
  } else if (m.entrypoint.source.ends_with(".manifest.json")) {
    v.push_back("entrypoint.source: collides with the manifest sidecar");
  } else if (!m.name.empty() && !m.entrypoint.source.starts_with(m.name + ".")) {
    v.push_back("entrypoint.source: must be named <name>.<ext>");
  }
  if (m.entrypoint.callable.empty()) v.push_back("entrypoint.callable: empty");
  if (m.provenance.generated_by.empty()) v.push_back("provenance.generated_by: empty");
  if (m.provenance.task_id.empty()) v.push_back("provenance.task_id: empty");
  if (m.provenance.created_at.empty()) v.push_back("provenance.created_at: empty");
  return v;
}

bool same_content(const ToolManifest& a, const ToolManifest& b) {
  return a.name == b.name && a.description == b.description && a.inputs == b.inputs && a.outputs == b.outputs &&
         a.entrypoint == b.entrypoint && a.tests_passed == b.tests_passed;
}

}  // namespace toolsmith
