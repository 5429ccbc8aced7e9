#include "toolsmith/registry.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace toolsmith {
namespace {

std::shared_ptr<std::recursive_mutex> lock_for(const fs::path& root) {
  static std::mutex table_mutex;
  static std::map<std::string, std::weak_ptr<std::recursive_mutex>> table;
  std::error_code ec;
  fs::path key = fs::weakly_canonical(root, ec);
  if (ec) key = fs::absolute(root).lexically_normal();
  std::lock_guard guard(table_mutex);
  auto& slot = table[key.string()];
  if (auto existing = slot.lock()) return existing;
  auto fresh = std::make_shared<std::recursive_mutex>();
  slot = fresh;
  return fresh;
}

bool hidden(const fs::path& p) {
  const std::string n = p.filename().string();
  return n.empty() || n.front() == '.' || n == "__pycache__";
}

bool is_manifest_file(const fs::path& p) {
  const std::string n = p.filename().string();
  return n.size() > kManifestSuffix.size() && n.ends_with(kManifestSuffix);
}

std::string stem_of_manifest(const fs::path& p) {
  const std::string n = p.filename().string();
  return n.substr(0, n.size() - kManifestSuffix.size());
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

void check_category(const CategoryPath& path) {
  for (const auto& c : path) {
    if (!is_safe_identifier(c)) throw Error(ErrorCode::NoSuchCategory, "invalid category component \"" + c + "\"");
  }
}

ResolvedTool load_tool(const fs::path& root, const fs::path& manifest_path) {
  ResolvedTool t;
  t.manifest = parse_manifest(read_file(manifest_path));
  t.manifest_path = manifest_path;
  const fs::path dir = manifest_path.parent_path();
  t.manifest.category_path = split_category(relative_key(root, dir));
  t.source_path = dir / t.manifest.entrypoint.source;
  return t;
}

}  // namespace

Registry::Registry(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create toolset root " + root_.string() + ": " + ec.message());
  mutex_ = lock_for(root_);
}

fs::path Registry::category_dir(const CategoryPath& path) const {
  check_category(path);
  fs::path p = root_;
  for (const auto& c : path) p /= c;
  return p;
}

CategoryNode Registry::list_children(const CategoryPath& path) const {
  const fs::path dir = category_dir(path);
  if (!fs::is_directory(dir)) throw Error(ErrorCode::NoSuchCategory, join_category(path));
  CategoryNode node;
  node.path = path;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (hidden(entry.path())) continue;
    if (entry.is_directory()) {
      node.subcategories.push_back(entry.path().filename().string());
    } else if (entry.is_regular_file() && is_manifest_file(entry.path())) {
      node.tools.push_back(stem_of_manifest(entry.path()));
    }
  }
  std::sort(node.subcategories.begin(), node.subcategories.end());
  std::sort(node.tools.begin(), node.tools.end());
  return node;
}

std::vector<ResolvedTool> Registry::tools() const {
  std::vector<ResolvedTool> out;
  std::map<std::string, fs::path> seen;
  for (auto it = fs::recursive_directory_iterator(root_); it != fs::recursive_directory_iterator(); ++it) {
    if (hidden(it->path())) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (!it->is_regular_file() || !is_manifest_file(it->path())) continue;
    const std::string name = stem_of_manifest(it->path());
    if (auto [pos, inserted] = seen.emplace(name, it->path()); !inserted) {
      throw Error(ErrorCode::Ambiguous, "tool " + name + " defined at " + pos->second.string() + " and " +
                                            it->path().string());
    }
    out.push_back(load_tool(root_, it->path()));
  }
  std::sort(out.begin(), out.end(),
            [](const ResolvedTool& a, const ResolvedTool& b) { return a.manifest.name < b.manifest.name; });
  return out;
}

std::optional<ResolvedTool> Registry::find(const std::string& name) const {
  std::optional<fs::path> hit;
  const std::string file = name + std::string(kManifestSuffix);
  for (auto it = fs::recursive_directory_iterator(root_); it != fs::recursive_directory_iterator(); ++it) {
    if (hidden(it->path())) {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    if (it->path().filename() != file || !it->is_regular_file()) continue;
    if (hit) throw Error(ErrorCode::Ambiguous, "tool " + name + " defined at " + hit->string() + " and " + it->path().string());
    hit = it->path();
  }
  if (!hit) return std::nullopt;
  return load_tool(root_, *hit);
}

ResolvedTool Registry::resolve(const std::string& name) const {
  auto t = find(name);
  if (!t) throw Error(ErrorCode::NotFound, "tool " + name);
  return std::move(*t);
}

std::vector<CategoryPath> Registry::categories() const {
  std::vector<CategoryPath> out;
  std::vector<CategoryPath> stack{{}};
  while (!stack.empty()) {
    CategoryPath p = std::move(stack.back());
    stack.pop_back();
    const auto node = list_children(p);
    out.push_back(p);
    for (auto it = node.subcategories.rbegin(); it != node.subcategories.rend(); ++it) {
      CategoryPath child = p;
      child.push_back(*it);
      stack.push_back(std::move(child));
    }
  }
  return out;
}

RegisterOutcome Registry::register_tool(const ToolManifest& manifest, std::string_view source, RegisterOptions options) {
  std::lock_guard guard(*mutex_);
  auto violations = validate_manifest(manifest);
  if (!manifest.tests_passed) violations.push_back("tests_passed: false");
  if (!violations.empty()) {
    std::string msg = manifest.name;
    for (const auto& v : violations) msg += "; " + v;
    throw Error(ErrorCode::ValidationFailed, msg, violations);
  }

  const auto existing = find(manifest.name);
  if (!existing) {
    const fs::path dir = category_dir(manifest.category_path);
    write_file(dir / manifest.entrypoint.source, source);
    write_file(dir / (manifest.name + std::string(kManifestSuffix)), manifest_text(manifest));
    return RegisterOutcome::Created;
  }

  const bool same_source = fs::exists(existing->source_path) && read_file(existing->source_path) == source;
  if (same_source && same_content(existing->manifest, manifest)) return RegisterOutcome::Unchanged;

  ToolManifest updated = manifest;
  if (options.auto_bump) {
    updated.version = std::max(existing->manifest.version + 1, manifest.version);
  } else if (manifest.version <= existing->manifest.version) {
    throw Error(ErrorCode::NameConflict, manifest.name + " v" + std::to_string(existing->manifest.version) +
                                             " already registered with different content");
  }
  // Refined in place: the tool keeps its current category.
  updated.category_path = existing->manifest.category_path;
  const fs::path dir = existing->manifest_path.parent_path();
  if (existing->source_path.filename() != updated.entrypoint.source) fs::remove(existing->source_path);
  write_file(dir / updated.entrypoint.source, source);
  write_file(existing->manifest_path, manifest_text(updated));
  return RegisterOutcome::Replaced;
}

void Registry::remove_tool(const std::string& name) {
  std::lock_guard guard(*mutex_);
  const auto t = resolve(name);
  std::error_code ec;
  fs::remove(t.source_path, ec);
  if (!fs::remove(t.manifest_path, ec) || ec) throw Error(ErrorCode::IoFailure, "cannot remove " + t.manifest_path.string());
}

void Registry::move_tool(const std::string& name, const CategoryPath& destination) {
  std::lock_guard guard(*mutex_);
  const auto t = resolve(name);
  const fs::path dir = category_dir(destination);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  const fs::path new_source = dir / t.source_path.filename();
  const fs::path new_manifest = dir / t.manifest_path.filename();
  if (new_manifest == t.manifest_path) return;
  if (fs::exists(new_source) || fs::exists(new_manifest)) {
    throw Error(ErrorCode::IoFailure, "destination already holds files for " + name);
  }
  fs::rename(t.source_path, new_source, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "move " + t.source_path.string() + ": " + ec.message());
  ToolManifest m = t.manifest;
  m.category_path = destination;
  try {
    write_file(new_manifest, manifest_text(m));
  } catch (...) {
    fs::rename(new_source, t.source_path, ec);
    throw;
  }
  fs::remove(t.manifest_path, ec);
}

std::string Registry::render_index() const {
  std::ostringstream out;
  out << "# Tool Index\n\n";
  // Depth-first; tools and subcategories interleaved in lexicographic order.
  auto emit = [&](auto&& self, const CategoryPath& path, int depth) -> void {
    const auto node = list_children(path);
    std::vector<std::pair<std::string, bool>> entries;  // name, is_category
    for (const auto& t : node.tools) entries.emplace_back(t, false);
    for (const auto& c : node.subcategories) entries.emplace_back(c, true);
    std::sort(entries.begin(), entries.end());
    const std::string indent(static_cast<size_t>(depth) * 2, ' ');
    for (const auto& [name, is_category] : entries) {
      if (is_category) {
        CategoryPath child = path;
        child.push_back(name);
        out << indent << "- " << join_category(child) << "/\n";
        self(self, child, depth + 1);
      } else {
        const fs::path mpath = category_dir(path) / (name + std::string(kManifestSuffix));
        std::string desc;
        try {
          desc = first_line(parse_manifest(read_file(mpath)).description);
        } catch (const Error& e) {
          log::warn("index: unreadable manifest " + mpath.string() + ": " + e.what());
        }
        out << indent << "- " << name << ": " << desc << "\n";
      }
    }
  };
  emit(emit, {}, 0);
  return out.str();
}

std::string Registry::generate_index() const {
  std::string text = render_index();
  const fs::path path = root_ / std::string(kIndexFile);
  if (!fs::exists(path) || read_file(path) != text) write_file(path, text);
  return text;
}

std::string render_listing(const CategoryNode& node, const Registry& registry) {
  std::ostringstream out;
  for (const auto& c : node.subcategories) out << c << "/\n";
  const fs::path dir = registry.category_dir(node.path);
  for (const auto& t : node.tools) {
    std::string desc;
    try {
      desc = first_line(parse_manifest(read_file(dir / (t + std::string(kManifestSuffix)))).description);
    } catch (const Error&) {
    }
    out << t << ": " << desc << "\n";
  }
  return out.str();
}

std::vector<std::string> default_shim_command() {
  if (const char* env = std::getenv("TOOLSMITH_SHIM"); env && *env) {
    std::vector<std::string> out;
    std::istringstream ss(env);
    for (std::string part; ss >> part;) out.push_back(part);
    return out;
  }
  return {"python3", "-m", "toolsmith_runtime"};
}

RawInvocation invoke_raw(const ResolvedTool& tool, const nlohmann::json& inputs, const ToolRuntime& runtime) {
  if (!runtime.executor) throw Error(ErrorCode::InvalidArgument, "tool runtime has no executor");
  if (runtime.shim_command.empty()) throw Error(ErrorCode::InvalidArgument, "tool runtime has no shim command");
  JobRequest job;
  job.command = runtime.shim_command;
  job.command.push_back(fs::absolute(tool.manifest_path).string());
  job.working_dir = tool.manifest_path.parent_path();
  job.timeout = runtime.timeout;
  job.label = "tool_" + tool.manifest.name;
  job.stdin_data = wire::make_input(tool.manifest.name, inputs).dump();

  RawInvocation raw;
  raw.job = runtime.executor->submit(job, runtime.logs_dir);
  raw.stdout_text = read_file(raw.job.stdout_log);
  if (raw.job.timed_out) {
    raw.wire_error = "tool timed out";
    return raw;
  }
  try {
    raw.output = wire::parse_output(raw.stdout_text, raw.job.exit_code);
  } catch (const Error& e) {
    raw.wire_error = e.what();
  }
  return raw;
}

nlohmann::json invoke_tool(const Registry& registry, const std::string& name, const nlohmann::json& input,
                           const ToolRuntime& runtime) {
  const auto tool = registry.resolve(name);
  if (auto v = check_record(tool.manifest.inputs, input); !v.empty()) {
    throw Error(ErrorCode::InputSchemaViolation, name + ": " + v.front(), v);
  }
  const auto raw = invoke_raw(tool, input, runtime);
  if (raw.job.timed_out) throw Error(ErrorCode::ExecutorFailure, name + ": timed out");
  if (!raw.output) {
    throw Error(ErrorCode::ExecutorFailure, name + ": " + raw.wire_error,
                {{"exit_code", raw.job.exit_code}, {"stdout", raw.stdout_text}});
  }
  if (!raw.output->ok) {
    const auto& f = raw.output->failure;
    nlohmann::json detail{{"error_type", f.error_type}, {"message", f.message}};
    if (f.detail) detail["detail"] = *f.detail;
    throw Error(ErrorCode::ToolError, name + ": " + f.error_type + ": " + f.message, detail);
  }
  if (auto v = check_record(tool.manifest.outputs, raw.output->outputs); !v.empty()) {
    throw Error(ErrorCode::OutputSchemaViolation, name + ": " + v.front(), v);
  }
  return raw.output->outputs;
}

}  // namespace toolsmith
