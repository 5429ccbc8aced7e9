#include "toolsmith/optimizer.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/log.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace toolsmith {
namespace {

constexpr std::string_view kSummarySeparator = " | ";

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

std::string summary_for(const ToolManifest& m) {
  std::string in = m.inputs.empty() ? std::string() : render_params(m.inputs);
  return m.name + "(" + in + ") -> " + render_params(m.outputs) + std::string(kSummarySeparator) + first_line(m.description);
}

std::string dir_label(const CategoryPath& dir) { return dir.empty() ? std::string("root") : join_category(dir); }

CategoryPath child_of(const CategoryPath& dir, const std::string& name) {
  CategoryPath p = dir;
  p.push_back(name);
  return p;
}

void copy_bytes(const fs::path& from, const fs::path& to) { write_file(to, read_file(from)); }

fs::path unique_dir(const fs::path& base, const std::string& stem) {
  fs::path p = base / stem;
  for (int k = 2; fs::exists(p); ++k) p = base / (stem + "-" + std::to_string(k));
  return p;
}

}  // namespace

std::vector<CategoryPath> scan_oversized(const Registry& registry, int threshold) {
  if (threshold < 1) throw Error(ErrorCode::InvalidArgument, "threshold must be >= 1");
  std::vector<CategoryPath> out;
  for (const auto& path : registry.categories()) {
    const auto node = registry.list_children(path);
    if (node.tools.size() + node.subcategories.size() > static_cast<size_t>(threshold)) out.push_back(path);
  }
  return out;
}

ReorgPlan validate_reorg(ReorgPlan plan, const Registry& registry) {
  const auto node = registry.list_children(plan.target_dir);
  const std::set<std::string> tools(node.tools.begin(), node.tools.end());
  std::set<std::string> names;
  std::set<std::string> assigned;
  for (const auto& sub : plan.new_subcategories) {
    if (!is_safe_identifier(sub.name)) throw Error(ErrorCode::InvalidPlan, "subcategory name \"" + sub.name + "\" is not a directory name");
    if (tools.contains(sub.name)) throw Error(ErrorCode::InvalidPlan, "subcategory " + sub.name + " would shadow a tool");
    if (!names.insert(sub.name).second) throw Error(ErrorCode::InvalidPlan, "subcategory " + sub.name + " listed twice");
    if (sub.members.empty()) throw Error(ErrorCode::InvalidPlan, "subcategory " + sub.name + " is empty");
    for (const auto& m : sub.members) {
      if (!tools.contains(m)) throw Error(ErrorCode::InvalidPlan, m + " is not a tool in " + dir_label(plan.target_dir));
      if (!assigned.insert(m).second) throw Error(ErrorCode::InvalidPlan, m + " assigned to more than one subcategory");
    }
  }
  plan.unmoved.clear();
  for (const auto& t : node.tools) {
    if (!assigned.contains(t)) plan.unmoved.push_back(t);
  }
  return plan;
}

size_t children_after(const ReorgPlan& plan, const Registry& registry) {
  const auto node = registry.list_children(plan.target_dir);
  std::set<std::string> subs(node.subcategories.begin(), node.subcategories.end());
  for (const auto& s : plan.new_subcategories) subs.insert(s.name);
  return subs.size() + plan.unmoved.size();
}

ReorgProposal propose_reorg(const CategoryPath& dir, const Registry& registry, const ForgeContext& ctx, int threshold) {
  const auto node = registry.list_children(dir);
  std::string listing;
  for (const auto& s : node.subcategories) listing += "- " + s + "/\n";
  for (const auto& t : node.tools) {
    const auto m = parse_manifest(read_file(registry.category_dir(dir) / (t + std::string(kManifestSuffix))));
    listing += "- " + summary_for(m) + "\n";
  }

  PromptInputs in;
  in.vars = {{"directory", dir_label(dir)}, {"threshold", std::to_string(threshold)}, {"tools", listing}};
  AgentRequest req;
  req.stage = Stage::ToolsetReorg;
  req.prompt = select_stage_prompt(Stage::ToolsetReorg, in, *ctx.prompts);
  req.workspace_root = ctx.ws.root;
  req.iteration = ctx.session.iteration;
  req.subject = dir_label(dir);
  const auto resp = run_stage_session(std::move(req), ctx.session);
  if (!resp.payload || !resp.payload->is_object()) throw Error(ErrorCode::BackendFailure, "reorg session returned no plan");

  ReorgPlan plan;
  plan.target_dir = dir;
  try {
    for (const auto& s : resp.payload->value("subcategories", nlohmann::json::array())) {
      plan.new_subcategories.push_back({s.at("name").get<std::string>(), s.at("members").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidPlan, std::string("reorg plan: ") + e.what());
  }
  ReorgProposal out;
  out.plan = validate_reorg(std::move(plan), registry);
  out.still_oversized = children_after(out.plan, registry) > static_cast<size_t>(threshold);
  if (out.still_oversized) log::warn("reorg plan for " + dir_label(dir) + " leaves it above the threshold");
  return out;
}

void apply_reorg(const ReorgPlan& input, Registry& registry, const FaultHook& hook) {
  std::lock_guard guard(registry.writer_mutex());
  const ReorgPlan plan = validate_reorg(input, registry);
  if (plan.empty()) return;

  std::vector<fs::path> created_dirs;
  for (const auto& sub : plan.new_subcategories) {
    const fs::path d = registry.category_dir(child_of(plan.target_dir, sub.name));
    if (!fs::exists(d)) created_dirs.push_back(d);
  }
  std::vector<std::string> moved;
  size_t step = 0;
  try {
    for (const auto& sub : plan.new_subcategories) {
      for (const auto& member : sub.members) {
        if (hook) hook("move", step);
        ++step;
        registry.move_tool(member, child_of(plan.target_dir, sub.name));
        moved.push_back(member);
      }
    }
    if (hook) hook("index", step);
    registry.generate_index();
  } catch (const std::exception& e) {
    for (auto it = moved.rbegin(); it != moved.rend(); ++it) {
      try {
        registry.move_tool(*it, plan.target_dir);
      } catch (const std::exception& undo) {
        log::warn("reorg rollback: cannot move " + *it + " back: " + undo.what());
      }
    }
    for (const auto& d : created_dirs) {
      std::error_code ec;
      fs::remove_all(d, ec);
    }
    throw Error(ErrorCode::IoFailure, std::string("reorganization of ") + dir_label(plan.target_dir) +
                                          " rolled back: " + e.what());
  }
}

std::vector<ToolSummary> extract_signatures(const Registry& registry) {
  std::vector<ToolSummary> out;
  for (const auto& t : registry.tools()) out.push_back({t.manifest.name, summary_for(t.manifest)});
  return out;
}

std::vector<MergeCluster> embed_and_cluster(const std::vector<ToolSummary>& summaries, EmbeddingProvider& embedder,
                                            double sim_threshold) {
  if (!(sim_threshold > 0.0 && sim_threshold < 1.0)) throw Error(ErrorCode::InvalidArgument, "similarity threshold must be in (0, 1)");
  if (summaries.empty()) return {};
  std::vector<std::string> texts;
  for (const auto& s : summaries) texts.push_back(s.text);
  std::vector<std::vector<double>> vectors;
  try {
    vectors = embedder.embed(texts);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::EmbedderFailure, e.what());
  }
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::EmbedderFailure, "embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                                                std::to_string(texts.size()) + " texts");
  }
  const auto m = pack_rows(vectors);
  const auto sim = cosine_matrix_parallel(m);
  std::vector<MergeCluster> out;
  for (const auto& c : single_linkage(sim, m.rows, sim_threshold)) {
    MergeCluster mc;
    for (size_t i : c.members) mc.members.push_back(summaries[i].name);
    mc.similarity = std::clamp(c.similarity, 0.0, 1.0);
    out.push_back(std::move(mc));
  }
  return out;
}

std::optional<MergeProposal> parse_merge_payload(const nlohmann::json& payload, const MergeCluster& cluster,
                                                 const Registry& registry) {
  if (!payload.is_object() || !payload.contains("merge") || !payload.at("merge").is_boolean()) {
    throw Error(ErrorCode::InvalidProposal, "merge payload needs a boolean \"merge\"");
  }
  if (!payload.at("merge").get<bool>()) return std::nullopt;

  MergeProposal p;
  p.cluster = cluster;
  try {
    p.unified_name = payload.at("unified_name").get<std::string>();
    p.unified_source = payload.at("source").get<std::string>();
    p.unified_manifest = payload.at("manifest").get<ToolManifest>();
    p.supersedes = payload.at("supersedes").get<std::vector<std::string>>();
    p.rationale = payload.value("rationale", "");
    if (auto it = payload.find("probe"); it != payload.end() && !it->is_null()) p.probe = *it;
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidProposal, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidProposal, e.what());
  }
  if (p.unified_manifest.name != p.unified_name) {
    throw Error(ErrorCode::InvalidProposal, "manifest name " + p.unified_manifest.name + " differs from " + p.unified_name);
  }
  if (p.supersedes.empty()) throw Error(ErrorCode::InvalidProposal, "merge supersedes nothing");
  const std::set<std::string> members(cluster.members.begin(), cluster.members.end());
  std::set<std::string> seen;
  for (const auto& s : p.supersedes) {
    if (!members.contains(s)) throw Error(ErrorCode::InvalidProposal, "supersedes " + s + ", which is outside the cluster");
    if (!seen.insert(s).second) throw Error(ErrorCode::InvalidProposal, "supersedes " + s + " twice");
  }
  if (!seen.contains(p.unified_name) && registry.find(p.unified_name)) {
    throw Error(ErrorCode::InvalidProposal, "unified name " + p.unified_name + " collides with a kept tool");
  }
  ToolManifest check = p.unified_manifest;
  check.provenance = {"check", "check", "check"};
  if (auto v = validate_manifest(check); !v.empty()) throw Error(ErrorCode::InvalidProposal, "unified manifest: " + v.front(), v);
  if (p.unified_source.empty()) throw Error(ErrorCode::InvalidProposal, "unified source is empty");
  return p;
}

std::optional<MergeProposal> propose_merge(const MergeCluster& cluster, const Registry& registry, const ForgeContext& ctx,
                                           int attempt, const std::string& feedback) {
  std::string listing;
  std::string subject;
  for (const auto& name : cluster.members) {
    const auto t = registry.resolve(name);
    listing += "### " + name + "\n\n" + summary_for(t.manifest) + "\n\nSource `" + t.source_path.filename().string() +
               "`:\n\n" + read_file(t.source_path) + "\n\n";
    subject += (subject.empty() ? "" : "+") + name;
  }
  PromptInputs in;
  in.vars = {{"tools", listing}, {"feedback", feedback}};
  AgentRequest req;
  req.stage = Stage::ToolMerge;
  req.prompt = select_stage_prompt(Stage::ToolMerge, in, *ctx.prompts);
  req.workspace_root = ctx.ws.root;
  req.iteration = ctx.session.iteration;
  req.subject = subject;
  req.attempt = attempt;
  const auto resp = run_stage_session(std::move(req), ctx.session);
  if (!resp.payload) throw Error(ErrorCode::BackendFailure, "merge session returned no verdict");
  return parse_merge_payload(*resp.payload, cluster, registry);
}

namespace {

BackupSnapshot make_backup(const Registry& registry, const std::vector<std::string>& names) {
  BackupSnapshot b;
  const fs::path base = registry.root() / ".merge_backup";
  b.backup_dir = unique_dir(base, utc_stamp());
  std::vector<fs::path> files;
  for (const auto& n : names) {
    const auto t = registry.resolve(n);
    files.push_back(t.source_path);
    files.push_back(t.manifest_path);
  }
  const fs::path index = registry.root() / std::string(kIndexFile);
  if (fs::exists(index)) files.push_back(index);
  for (const auto& f : files) {
    const std::string rel = relative_key(registry.root(), f);
    const std::string bytes = read_file(f);
    write_file(b.backup_dir / rel, bytes);
    const std::string digest = sha256_hex(bytes);
    if (sha256_hex(read_file(b.backup_dir / rel)) != digest) throw Error(ErrorCode::IoFailure, "backup of " + rel + " does not verify");
    b.entries.emplace_back(rel, digest);
  }
  return b;
}

void restore_backup(const Registry& registry, const BackupSnapshot& b) {
  for (const auto& [rel, digest] : b.entries) {
    const fs::path target = registry.root() / rel;
    if (fs::exists(target) && sha256_hex(read_file(target)) == digest) continue;
    copy_bytes(b.backup_dir / rel, target);
  }
}

// Empty string on success, else the reason verification failed.
std::string verify_unified(const MergeProposal& p, const Registry& registry, const ForgeContext& ctx,
                           const ToolRuntime& runtime, int attempt) {
  const fs::path staging_root = unique_dir(registry.root() / ".merge_staging", utc_stamp() + "_" + p.unified_name);
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
      fs::remove(dir.parent_path(), ec);  // only succeeds once empty
    }
  } cleanup{staging_root};

  Registry staging(staging_root);
  ToolManifest m = p.unified_manifest;
  m.category_path.clear();
  m.tests_passed = true;
  if (m.provenance.generated_by.empty()) m.provenance.generated_by = ctx.generated_by;
  if (m.provenance.task_id.empty()) m.provenance.task_id = ctx.session.task_id.empty() ? "optimizer" : ctx.session.task_id;
  if (m.provenance.created_at.empty()) m.provenance.created_at = utc_iso8601();
  try {
    staging.register_tool(m, p.unified_source);
  } catch (const Error& e) {
    return std::string("unified tool rejected: ") + e.what();
  }

  const auto contract = contract_check(p.unified_name, staging, runtime, p.probe);
  if (!contract.pass) {
    std::string why = "contract check failed:";
    for (const auto& r : contract.reasons) why += " " + r + ";";
    return why;
  }

  PromptInputs in;
  in.vars = {{"requirement", summary_for(m)}, {"source", m.entrypoint.source}, {"feedback", "contract check passed"}};
  AgentRequest req;
  req.stage = Stage::ToolReview;
  req.prompt = select_stage_prompt(Stage::ToolReview, in, *ctx.prompts);
  req.workspace_root = staging_root;
  req.iteration = ctx.session.iteration;
  req.subject = p.unified_name;
  req.attempt = attempt;
  const auto resp = run_stage_session(std::move(req), ctx.session);
  if (!resp.payload) return "reviewer returned no verdict";
  const auto rec = parse_review(*resp.payload, attempt);
  if (!rec.approved) {
    std::string why = "review requested changes:";
    for (const auto& i : rec.issues) why += " " + i + ";";
    return why;
  }
  return {};
}

}  // namespace

MergeResult apply_merge_with_rollback(const MergeProposal& proposal, Registry& registry, const ForgeContext& ctx,
                                      const ToolRuntime& runtime, const MergeHooks& hooks) {
  std::lock_guard guard(registry.writer_mutex());
  MergeResult result;
  result.backup = make_backup(registry, proposal.supersedes);

  MergeProposal current = proposal;
  std::string reason;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    result.attempts = attempt;
    reason = verify_unified(current, registry, ctx, runtime, attempt);
    if (reason.empty()) break;
    if (attempt == 2) break;
    auto revised = propose_merge(current.cluster, registry, ctx, 2, reason);
    if (!revised) {
      reason = "backend withdrew the merge after feedback: " + reason;
      result.attempts = attempt;
      break;
    }
    current = std::move(*revised);
  }

  if (!reason.empty()) {
    restore_backup(registry, result.backup);
    result.reason = reason;
    return result;
  }

  ToolManifest m = current.unified_manifest;
  m.category_path.clear();
  m.tests_passed = true;
  if (m.provenance.generated_by.empty()) m.provenance.generated_by = ctx.generated_by;
  if (m.provenance.task_id.empty()) m.provenance.task_id = ctx.session.task_id.empty() ? "optimizer" : ctx.session.task_id;
  if (m.provenance.created_at.empty()) m.provenance.created_at = utc_iso8601();

  std::set<std::string> original_files;
  for (const auto& e : result.backup.entries) original_files.insert(e.first);
  size_t step = 0;
  try {
    for (const auto& name : current.supersedes) {
      if (hooks.fault) hooks.fault("remove", step);
      ++step;
      registry.remove_tool(name);
    }
    if (hooks.fault) hooks.fault("register", step++);
    registry.register_tool(m, current.unified_source);
    if (hooks.fault) hooks.fault("index", step++);
    registry.generate_index();
  } catch (const std::exception& e) {
    if (auto t = registry.find(m.name)) {
      std::error_code ec;
      if (!original_files.contains(relative_key(registry.root(), t->manifest_path))) {
        fs::remove(t->manifest_path, ec);
        fs::remove(t->source_path, ec);
      }
    }
    restore_backup(registry, result.backup);
    throw Error(ErrorCode::IoFailure, std::string("merge into ") + m.name + " failed; originals restored: " + e.what());
  }
  result.merged = true;
  return result;
}

OptimizeReport optimize(Registry& registry, const OptimizerSettings& settings, const ForgeContext& ctx,
                        const ToolRuntime& runtime, EmbeddingProvider& embedder) {
  OptimizeReport report;
  std::lock_guard guard(registry.writer_mutex());
  report.tools_before = registry.tool_count();
  auto warn = [&](std::string msg) {
    log::warn("optimizer: " + msg);
    report.warnings.push_back(std::move(msg));
  };

  if (settings.merge) {
    const auto clusters = embed_and_cluster(extract_signatures(registry), embedder, settings.sim_threshold);
    for (const auto& cluster : clusters) {
      try {
        auto proposal = propose_merge(cluster, registry, ctx);
        if (!proposal) continue;
        const auto r = apply_merge_with_rollback(*proposal, registry, ctx, runtime);
        if (r.merged) {
          ++report.merges_applied;
        } else {
          ++report.merges_rolled_back;
          warn("merge of " + proposal->unified_name + " rolled back: " + r.reason);
        }
      } catch (const Error& e) {
        warn(std::string("merge skipped: ") + e.what());
      }
    }
  }

  for (int pass = 0; pass < settings.max_passes; ++pass) {
    const auto dirs = scan_oversized(registry, settings.threshold);
    if (dirs.empty()) break;
    bool progress = false;
    for (const auto& dir : dirs) {
      try {
        const auto proposal = propose_reorg(dir, registry, ctx, settings.threshold);
        if (proposal.plan.empty()) {
          warn("empty reorganization plan for " + dir_label(dir));
          continue;
        }
        apply_reorg(proposal.plan, registry);
        ++report.reorgs_applied;
        progress = true;
      } catch (const Error& e) {
        warn(std::string("reorganization of ") + dir_label(dir) + " skipped: " + e.what());
      }
    }
    if (!progress) break;
  }
  registry.generate_index();
  report.tools_after = registry.tool_count();
  return report;
}

}  // namespace toolsmith
