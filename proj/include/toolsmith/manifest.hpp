#pragma once

#include "toolsmith/params.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace toolsmith {

using CategoryPath = std::vector<std::string>;

std::string join_category(const CategoryPath& path);  // "" for root, "geom/opt" otherwise
CategoryPath split_category(const std::string& path);

struct Entrypoint {
  std::string source;    // file name next to the manifest
  std::string callable;  // function the shim calls
  friend bool operator==(const Entrypoint&, const Entrypoint&) = default;
};

struct Provenance {
  std::string generated_by;  // backend id
  std::string task_id;
  std::string created_at;  // ISO-8601 UTC
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ToolManifest {
  std::string name;
  std::string description;
  CategoryPath category_path;
  int64_t version = 1;
  std::vector<ParamSpec> inputs;
  std::vector<ParamSpec> outputs;
  Entrypoint entrypoint;
  Provenance provenance;
  bool tests_passed = false;

  friend bool operator==(const ToolManifest&, const ToolManifest&) = default;
};

void to_json(nlohmann::json& j, const ToolManifest& m);
void from_json(const nlohmann::json& j, ToolManifest& m);

// Canonical sidecar text: sorted keys, two-space indent, trailing newline.
std::string manifest_text(const ToolManifest& m);
ToolManifest parse_manifest(const std::string& text);

/// Empty result means valid. Covers name syntax, parameter well-formedness,
/// entrypoint presence and provenance completeness.
std::vector<std::string> validate_manifest(const ToolManifest& m);

// `[A-Za-z_][A-Za-z0-9_]*`, so names double as module and callable names.
bool is_tool_name(const std::string& s);

// Same tool contents: everything except version, provenance and location.
bool same_content(const ToolManifest& a, const ToolManifest& b);

}  // namespace toolsmith
