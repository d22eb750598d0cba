#include "chainsight/centrality.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace chainsight {

UndirectedGraph::UndirectedGraph(std::size_t vertex_count,
                                 std::span<const std::pair<Vertex, Vertex>> edges)
    : adjacency_(vertex_count) {
  for (auto [a, b] : edges) {
    if (a >= vertex_count || b >= vertex_count) {
      throw std::out_of_range("undirected edge endpoint out of range");
    }
    if (a == b) continue;
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
}

UndirectedGraph undirected_projection(const KnowledgeGraph& graph) {
  std::vector<std::pair<UndirectedGraph::Vertex, UndirectedGraph::Vertex>> pairs;
  pairs.reserve(graph.edge_count());
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    auto s = graph.src_index(e);
    auto d = graph.dst_index(e);
    if (s && d) {
      pairs.emplace_back(static_cast<UndirectedGraph::Vertex>(*s),
                         static_cast<UndirectedGraph::Vertex>(*d));
    }
  }
  return UndirectedGraph(graph.node_count(), pairs);
}

std::vector<double> degree_centrality(const UndirectedGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<double> result(n, 0.0);
  if (n <= 1) return result;
  const double scale = 1.0 / static_cast<double>(n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    result[v] = static_cast<double>(graph.neighbors(static_cast<UndirectedGraph::Vertex>(v)).size()) * scale;
  }
  return result;
}

namespace {

constexpr std::int64_t kUnreached = -1;

// Breadth-first distances from `source`; kUnreached for other components.
void bfs_distances(const UndirectedGraph& graph, UndirectedGraph::Vertex source,
                   std::vector<std::int64_t>& dist, std::vector<UndirectedGraph::Vertex>& queue) {
  std::fill(dist.begin(), dist.end(), kUnreached);
  queue.clear();
  dist[source] = 0;
  queue.push_back(source);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto v = queue[head];
    for (auto w : graph.neighbors(v)) {
      if (dist[w] == kUnreached) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
}

}  // namespace

std::vector<double> closeness_centrality(const UndirectedGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<double> result(n, 0.0);
  if (n <= 1) return result;
  std::vector<std::int64_t> dist(n);
  std::vector<UndirectedGraph::Vertex> order;
  order.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    bfs_distances(graph, static_cast<UndirectedGraph::Vertex>(v), dist, order);
    const double reached = static_cast<double>(order.size() - 1);
    if (reached == 0.0) continue;
    std::int64_t total = 0;
    for (auto u : order) total += dist[u];
    result[v] = (reached / static_cast<double>(n - 1)) * (reached / static_cast<double>(total));
  }
  return result;
}

std::vector<double> betweenness_centrality(const UndirectedGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<double> result(n, 0.0);
  if (n <= 2) return result;

  std::vector<std::int64_t> dist(n);
  std::vector<double> sigma(n);
  std::vector<double> delta(n);
  std::vector<UndirectedGraph::Vertex> order;
  order.reserve(n);

  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), kUnreached);
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    order.clear();
    dist[s] = 0;
    sigma[s] = 1.0;
    order.push_back(static_cast<UndirectedGraph::Vertex>(s));
    for (std::size_t head = 0; head < order.size(); ++head) {
      const auto v = order[head];
      for (auto w : graph.neighbors(v)) {
        if (dist[w] == kUnreached) {
          dist[w] = dist[v] + 1;
          order.push_back(w);
        }
        if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
      }
    }
    // Dependency accumulation in order of non-increasing distance; the
    // predecessors of w are exactly its neighbors one level closer to s.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto w = *it;
      for (auto v : graph.neighbors(w)) {
        if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      }
      if (w != s) result[w] += delta[w];
    }
  }
  // Each unordered pair was counted from both ends.
  const double pairs = static_cast<double>(n - 1) * static_cast<double>(n - 2);
  for (double& b : result) b /= pairs;
  return result;
}

std::vector<CentralityScores> salience(const UndirectedGraph& graph) {
  const auto degree = degree_centrality(graph);
  const auto closeness = closeness_centrality(graph);
  const auto betweenness = betweenness_centrality(graph);
  std::vector<CentralityScores> scores(graph.size());
  for (std::size_t v = 0; v < graph.size(); ++v) {
    scores[v] = {degree[v], closeness[v], betweenness[v],
                 (degree[v] + closeness[v] + betweenness[v]) / 3.0};
  }
  return scores;
}

CentralityTable salience(const KnowledgeGraph& graph) {
  std::vector<NodeId> ids;
  ids.reserve(graph.node_count());
  for (const Node& node : graph.nodes()) ids.push_back(node.id);
  return CentralityTable(std::move(ids), salience(undirected_projection(graph)));
}

CentralityTable::CentralityTable(std::vector<NodeId> ids, std::vector<CentralityScores> scores)
    : ids_(std::move(ids)), scores_(std::move(scores)) {
  if (ids_.size() != scores_.size()) throw std::invalid_argument("centrality table size mismatch");
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], i);
}

const CentralityScores* CentralityTable::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &scores_[it->second];
}

const CentralityScores& CentralityTable::at(std::string_view id) const {
  if (const auto* s = find(id)) return *s;
  throw std::out_of_range("no centrality entry for node '" + std::string(id) + "'");
}

double CentralityTable::salience_quantile(double q) const {
  if (scores_.empty()) return 0.0;
  std::vector<double> values;
  values.reserve(scores_.size());
  for (const auto& s : scores_) values.push_back(s.salience);
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

void write_centrality_table(std::ostream& out, const CentralityTable& table) {
  out << "node_id\tdegree\tcloseness\tbetweenness\tsalience\n";
  auto cell = [](double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.12g", v);
    return std::string(buf.data());
  };
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& s = table.scores()[i];
    out << table.ids()[i] << '\t' << cell(s.degree) << '\t' << cell(s.closeness) << '\t'
        << cell(s.betweenness) << '\t' << cell(s.salience) << '\n';
  }
}

}  // namespace chainsight
