#pragma once

#include "toolsmith/forge.hpp"
#include "toolsmith/similarity.hpp"

#include <functional>

namespace toolsmith {

inline constexpr int kDefaultReorgThreshold = 10;
inline constexpr double kDefaultSimThreshold = 0.85;

// Test hook called before each step of a multi-step mutation; throwing from
// it simulates a crash at that point.
using FaultHook = std::function<void(std::string_view step, size_t index)>;

// Directories whose direct children (tools + subdirectories) exceed threshold.
std::vector<CategoryPath> scan_oversized(const Registry& registry, int threshold = kDefaultReorgThreshold);

struct Subcategory {
  std::string name;
  std::vector<std::string> members;
};

struct ReorgPlan {
  CategoryPath target_dir;
  std::vector<Subcategory> new_subcategories;
  std::vector<std::string> unmoved;

  bool empty() const { return new_subcategories.empty(); }
};

// Checks the plan against the current tree and fills in `unmoved`. Throws
// InvalidPlan.
ReorgPlan validate_reorg(ReorgPlan plan, const Registry& registry);

// Direct child count of the target directory once the plan is applied.
size_t children_after(const ReorgPlan& plan, const Registry& registry);

struct ReorgProposal {
  ReorgPlan plan;
  bool still_oversized = false;
};

ReorgProposal propose_reorg(const CategoryPath& dir, const Registry& registry, const ForgeContext& ctx,
                            int threshold = kDefaultReorgThreshold);

/// Moves the planned tools and regenerates INDEX.md. Any failure undoes the
/// moves already made and raises IoFailure. An empty plan touches nothing.
void apply_reorg(const ReorgPlan& plan, Registry& registry, const FaultHook& hook = {});

struct ToolSummary {
  std::string name;
  std::string text;
};

// "add(a: integer, b: integer) -> sum: integer | <description>", sorted by name.
std::vector<ToolSummary> extract_signatures(const Registry& registry);

struct MergeCluster {
  std::vector<std::string> members;
  double similarity = 0.0;
};

std::vector<MergeCluster> embed_and_cluster(const std::vector<ToolSummary>& summaries, EmbeddingProvider& embedder,
                                            double sim_threshold = kDefaultSimThreshold);

struct MergeProposal {
  MergeCluster cluster;
  std::string unified_name;
  std::string unified_source;
  ToolManifest unified_manifest;
  std::vector<std::string> supersedes;
  std::string rationale;
  std::optional<nlohmann::json> probe;
};

// Absent for a keep-separate verdict. Throws InvalidProposal.
std::optional<MergeProposal> parse_merge_payload(const nlohmann::json& payload, const MergeCluster& cluster,
                                                 const Registry& registry);

std::optional<MergeProposal> propose_merge(const MergeCluster& cluster, const Registry& registry,
                                           const ForgeContext& ctx, int attempt = 1, const std::string& feedback = "");

struct BackupSnapshot {
  fs::path backup_dir;
  std::vector<std::pair<std::string, std::string>> entries;  // relative path, sha256
};

struct MergeResult {
  bool merged = false;
  std::string reason;
  int attempts = 0;
  BackupSnapshot backup;
};

struct MergeHooks {
  FaultHook fault;
};

/// Backs up the superseded tools, verifies the unified tool in a staging
/// toolset (contract check plus one review), retries once with feedback,
/// and only then swaps the tools. A second verification failure leaves the
/// originals in place, byte-identical to the backup.
MergeResult apply_merge_with_rollback(const MergeProposal& proposal, Registry& registry, const ForgeContext& ctx,
                                      const ToolRuntime& runtime, const MergeHooks& hooks = {});

struct OptimizerSettings {
  bool enabled = true;
  int threshold = kDefaultReorgThreshold;
  bool merge = false;
  double sim_threshold = kDefaultSimThreshold;
  int max_passes = 8;
};

struct OptimizeReport {
  size_t tools_before = 0;
  size_t tools_after = 0;
  int reorgs_applied = 0;
  int merges_applied = 0;
  int merges_rolled_back = 0;
  std::vector<std::string> warnings;
};

// Merge pass (when enabled) then reorganization passes until nothing is
// oversized or a pass makes no progress.
OptimizeReport optimize(Registry& registry, const OptimizerSettings& settings, const ForgeContext& ctx,
                        const ToolRuntime& runtime, EmbeddingProvider& embedder);

}  // namespace toolsmith
