#pragma once

// Seed resolution, salience-adaptive neighborhood expansion and ranked path
// extraction.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chainsight/centrality.hpp"
#include "chainsight/kg.hpp"
#include "chainsight/vecstore.hpp"

namespace chainsight {

enum class ThresholdMode { Quantile, Absolute };
enum class PathRanking { WeightProduct, SalienceSum };

std::string_view to_string(ThresholdMode mode);
std::string_view to_string(PathRanking ranking);
std::optional<ThresholdMode> parse_threshold_mode(std::string_view text);
std::optional<PathRanking> parse_path_ranking(std::string_view text);

struct TraversalConfig {
  ThresholdMode threshold_mode = ThresholdMode::Quantile;
  /// Quantile of the salience distribution (Quantile mode).
  double threshold_quantile = 0.5;
  /// Salience cut-off (Absolute mode).
  double threshold_absolute = 0.5;
  int hub_hops = 1;
  int peripheral_hops = 2;
  int max_hops = 3;
  /// Overrides the salience policy for every seed (still capped by max_hops).
  std::optional<int> fixed_hops;
  /// Zero keeps every path.
  std::size_t max_paths = 10;
  PathRanking ranking = PathRanking::WeightProduct;
  /// Best seed similarity below this falls back to name matching.
  double similarity_floor = 0.35;
  std::size_t seeds_per_mention = 1;

  /// Throws std::invalid_argument unless 1 <= hub <= peripheral <= max.
  void validate() const;
};

struct SeedMatch {
  std::string mention;
  NodeId node;
  double similarity = 0.0;

  bool operator==(const SeedMatch&) const = default;
};

struct PathStep {
  EdgeKind kind = EdgeKind::Produces;
  Orientation orientation = Orientation::Forward;
  std::optional<double> weight_percent;

  bool operator==(const PathStep&) const = default;
};

/// Alternating node/edge walk: nodes.size() == steps.size() + 1.
struct RiskPath {
  std::vector<NodeId> nodes;
  std::vector<PathStep> steps;
  double score = 0.0;

  std::size_t length() const noexcept { return steps.size(); }
  bool operator==(const RiskPath&) const = default;
};

struct SubgraphSeed {
  NodeId node;
  int budget = 1;
};

struct Subgraph {
  std::vector<SubgraphSeed> seeds;
  /// Node id -> hop distance from the nearest seed; ordered by id.
  std::map<NodeId, int> hops;
  /// Indices into graph.edges() with both endpoints in the subgraph, ascending.
  std::vector<std::size_t> edges;

  bool contains(std::string_view id) const { return hops.find(std::string(id)) != hops.end(); }
};

/// Seed nodes for each mention: top `config.seeds_per_mention` node shells by
/// cosine. When the best similarity is under the floor, lexical name matches
/// replace the vector hits (scored by their shell cosine). Mentions that
/// match nothing contribute no seeds.
std::vector<SeedMatch> resolve_seeds(std::span<const std::string> mentions,
                                     const VectorIndex& node_index, const Embedder& embedder,
                                     const KnowledgeGraph& graph, const TraversalConfig& config);

/// Salience cut-off separating hubs from peripheral seeds.
double salience_threshold(const CentralityTable& table, const TraversalConfig& config);

/// Hubs (salience >= threshold) get hub_hops, the rest peripheral_hops; never
/// more than max_hops.
int hop_budget(double salience, double threshold, const TraversalConfig& config);
int hop_budget(double salience, const CentralityTable& table, const TraversalConfig& config);

/// Breadth-first expansion over both edge directions, each seed up to its own
/// budget. Throws GraphError(UnknownNode) for a seed outside the graph.
Subgraph traverse(const KnowledgeGraph& graph, std::span<const SeedMatch> seeds,
                  const CentralityTable& table, const TraversalConfig& config);

/// Paths from each seed that step outward one BFS layer at a time (edges that
/// do not increase the distance from the seed are not followed) and stop
/// where they cannot be extended within the seed's budget. Ranked by score,
/// ties broken by node-id then step sequence; truncated to max_paths.
std::vector<RiskPath> extract_paths(const KnowledgeGraph& graph, const Subgraph& subgraph,
                                    const CentralityTable& table, const TraversalConfig& config);

/// Score of one path under the configured ranking.
double path_score(const RiskPath& path, const CentralityTable& table, PathRanking ranking);

/// Sorts best-first with the deterministic tie-break used by extract_paths.
void rank_paths(std::vector<RiskPath>& paths);

/// True when every step is realised by an edge of `graph` in the stated
/// orientation with the stated weight, and no node repeats.
bool path_in_graph(const RiskPath& path, const KnowledgeGraph& graph);

// Line-delimited output: node and edge records of the subgraph (kg-core
// format) followed by `path` records.
void write_subgraph(std::ostream& out, const KnowledgeGraph& graph, const Subgraph& subgraph);
void write_paths(std::ostream& out, std::span<const RiskPath> paths);

/// Reads every `path` record of a document, skipping node/edge records.
std::vector<RiskPath> read_paths(std::istream& in);

}  // namespace chainsight
