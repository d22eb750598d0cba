#pragma once

// Structural node importance on the undirected projection of a graph:
// degree, closeness (Wasserman-Faust, component scaled), betweenness
// (Brandes, unweighted) and their mean, the salience.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "chainsight/kg.hpp"

namespace chainsight {

/// Simple undirected graph over dense vertex ids: sorted, duplicate-free
/// neighbor lists with no self loops.
class UndirectedGraph {
 public:
  using Vertex = std::uint32_t;

  UndirectedGraph() = default;
  UndirectedGraph(std::size_t vertex_count, std::span<const std::pair<Vertex, Vertex>> edges);

  std::size_t size() const noexcept { return adjacency_.size(); }
  const std::vector<Vertex>& neighbors(Vertex v) const { return adjacency_[v]; }

 private:
  std::vector<std::vector<Vertex>> adjacency_;
};

/// Projection of a knowledge graph: vertex i is graph.nodes()[i]; edge
/// direction, kind and multiplicity are dropped.
UndirectedGraph undirected_projection(const KnowledgeGraph& graph);

std::vector<double> degree_centrality(const UndirectedGraph& graph);
std::vector<double> closeness_centrality(const UndirectedGraph& graph);
std::vector<double> betweenness_centrality(const UndirectedGraph& graph);

struct CentralityScores {
  double degree = 0.0;
  double closeness = 0.0;
  double betweenness = 0.0;
  double salience = 0.0;

  bool operator==(const CentralityScores&) const = default;
};

class CentralityTable {
 public:
  CentralityTable() = default;
  CentralityTable(std::vector<NodeId> ids, std::vector<CentralityScores> scores);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<NodeId>& ids() const noexcept { return ids_; }
  const std::vector<CentralityScores>& scores() const noexcept { return scores_; }

  const CentralityScores& at(std::string_view id) const;
  const CentralityScores* find(std::string_view id) const;

  /// Salience at quantile q in [0,1] with linear interpolation (q = 0.5 is
  /// the median). Zero for an empty table.
  double salience_quantile(double q) const;

  bool operator==(const CentralityTable&) const = default;

 private:
  std::vector<NodeId> ids_;
  std::vector<CentralityScores> scores_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<CentralityScores> salience(const UndirectedGraph& graph);

/// All four measures for every node, in graph node order.
CentralityTable salience(const KnowledgeGraph& graph);

/// Tab-separated export: header row then one row per node with twelve
/// significant digits.
void write_centrality_table(std::ostream& out, const CentralityTable& table);

}  // namespace chainsight
