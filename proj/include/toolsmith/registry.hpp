#pragma once

#include "toolsmith/executor.hpp"
#include "toolsmith/manifest.hpp"
#include "toolsmith/wire.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace toolsmith {

inline constexpr std::string_view kManifestSuffix = ".manifest.json";
inline constexpr std::string_view kIndexFile = "INDEX.md";

struct CategoryNode {
  CategoryPath path;
  std::vector<std::string> subcategories;
  std::vector<std::string> tools;
  friend bool operator==(const CategoryNode&, const CategoryNode&) = default;
};

struct ResolvedTool {
  ToolManifest manifest;  // category_path reflects the on-disk location
  fs::path source_path;
  fs::path manifest_path;
};

enum class RegisterOutcome { Created, Unchanged, Replaced };

struct RegisterOptions {
  // Changed content under an existing name bumps the version. When false, a
  // changed tool must carry a higher version or registration fails with
  // name-conflict.
  bool auto_bump = true;
};

/// Hierarchical toolset on disk: `<root>/<category…>/<name>.<ext>` plus a
/// `<name>.manifest.json` sidecar, and a generated INDEX.md at the root.
///
/// Tool names are unique across the whole tree. Reads go straight to the
/// filesystem and are safe from any thread; mutations serialize on a lock
/// shared by every Registry handle for the same root directory.
class Registry {
 public:
  explicit Registry(fs::path root);

  const fs::path& root() const { return root_; }

  RegisterOutcome register_tool(const ToolManifest& manifest, std::string_view source, RegisterOptions options = {});

  /// Immediate children only; the one listing primitive handed to agents.
  CategoryNode list_children(const CategoryPath& path = {}) const;

  ResolvedTool resolve(const std::string& name) const;
  std::optional<ResolvedTool> find(const std::string& name) const;

  // Every tool, sorted by name. Throws Ambiguous on duplicate names.
  std::vector<ResolvedTool> tools() const;
  size_t tool_count() const { return tools().size(); }

  // Every category including the root, depth-first in lexicographic order.
  std::vector<CategoryPath> categories() const;

  std::string render_index() const;
  // Writes INDEX.md at the root and returns its text.
  std::string generate_index() const;

  void remove_tool(const std::string& name);
  // Moves source + sidecar and rewrites category_path.
  void move_tool(const std::string& name, const CategoryPath& destination);

  // Held for the duration of multi-step mutations (reorganization, merges).
  std::recursive_mutex& writer_mutex() const { return *mutex_; }

  fs::path category_dir(const CategoryPath& path) const;

 private:
  fs::path root_;
  std::shared_ptr<std::recursive_mutex> mutex_;
};

// One line per entry: "geom/" for categories, "name: description" for tools.
std::string render_listing(const CategoryNode& node, const Registry& registry);

struct ToolRuntime {
  std::vector<std::string> shim_command;  // the manifest path is appended
  const JobExecutor* executor = nullptr;
  fs::path logs_dir;
  std::chrono::milliseconds timeout{std::chrono::minutes(5)};
};

// $TOOLSMITH_SHIM split on spaces, else `python3 -m toolsmith_runtime`.
std::vector<std::string> default_shim_command();

struct RawInvocation {
  JobResult job;
  std::string stdout_text;
  std::optional<wire::Output> output;
  std::string wire_error;  // set when stdout violates the wire contract
};

// Dispatches without any schema checks on either side.
RawInvocation invoke_raw(const ResolvedTool& tool, const nlohmann::json& inputs, const ToolRuntime& runtime);

/// Checked invocation: inputs validated before dispatch, tool failures
/// surfaced as tool-error with {error_type, message} detail, outputs
/// validated against the manifest.
nlohmann::json invoke_tool(const Registry& registry, const std::string& name, const nlohmann::json& input,
                           const ToolRuntime& runtime);

}  // namespace toolsmith
