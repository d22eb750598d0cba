#include "chainsight/traversal.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>

#include "chainsight/records.hpp"
#include "chainsight/text.hpp"

namespace chainsight {

using records::json;

std::string_view to_string(ThresholdMode mode) {
  return mode == ThresholdMode::Quantile ? "quantile" : "absolute";
}

std::string_view to_string(PathRanking ranking) {
  return ranking == PathRanking::WeightProduct ? "weight-product" : "salience-sum";
}

std::optional<ThresholdMode> parse_threshold_mode(std::string_view text) {
  if (text == "quantile") return ThresholdMode::Quantile;
  if (text == "absolute") return ThresholdMode::Absolute;
  return std::nullopt;
}

std::optional<PathRanking> parse_path_ranking(std::string_view text) {
  if (text == "weight-product") return PathRanking::WeightProduct;
  if (text == "salience-sum") return PathRanking::SalienceSum;
  return std::nullopt;
}

void TraversalConfig::validate() const {
  if (!(1 <= hub_hops && hub_hops <= peripheral_hops && peripheral_hops <= max_hops)) {
    throw std::invalid_argument("traversal hops must satisfy 1 <= hub_hops <= peripheral_hops <= max_hops");
  }
  if (fixed_hops && *fixed_hops < 1) throw std::invalid_argument("fixed hops must be positive");
  if (threshold_quantile < 0.0 || threshold_quantile > 1.0) {
    throw std::invalid_argument("threshold quantile must lie in [0,1]");
  }
}

// ---- seeds -----------------------------------------------------------------

namespace {

std::optional<std::size_t> shell_position(const VectorIndex& index, std::string_view node_id) {
  const auto& shells = index.shells();
  for (std::size_t i = 0; i < shells.size(); ++i) {
    auto it = shells[i].metadata.find("node_id");
    if (it != shells[i].metadata.end() && it->second == node_id) return i;
  }
  return std::nullopt;
}

}  // namespace

std::vector<SeedMatch> resolve_seeds(std::span<const std::string> mentions,
                                     const VectorIndex& node_index, const Embedder& embedder,
                                     const KnowledgeGraph& graph, const TraversalConfig& config) {
  std::vector<SeedMatch> seeds;
  const std::size_t k = std::max<std::size_t>(config.seeds_per_mention, 1);
  for (const auto& mention : mentions) {
    const Eigen::VectorXf query = embedder.embed(mention);
    const auto hits = node_index.search(query, k);
    std::vector<SeedMatch> matches;
    const bool weak = hits.empty() || hits.front().score < config.similarity_floor;
    if (weak) {
      for (const Node* node : find_nodes_by_name(graph, mention)) {
        double similarity = 0.0;
        if (auto pos = shell_position(node_index, node->id)) {
          similarity = cosine(query, node_index.vectors().col(static_cast<Eigen::Index>(*pos)));
        }
        matches.push_back({mention, node->id, similarity});
      }
      std::stable_sort(matches.begin(), matches.end(), [](const SeedMatch& a, const SeedMatch& b) {
        return a.similarity > b.similarity;
      });
      if (matches.size() > k) matches.resize(k);
    }
    if (matches.empty()) {
      for (const auto& hit : hits) {
        auto it = hit.shell->metadata.find("node_id");
        if (hit.score <= 0.0f || it == hit.shell->metadata.end()) continue;
        matches.push_back({mention, it->second, hit.score});
      }
    }
    seeds.insert(seeds.end(), matches.begin(), matches.end());
  }
  return seeds;
}

// ---- expansion -------------------------------------------------------------

double salience_threshold(const CentralityTable& table, const TraversalConfig& config) {
  return config.threshold_mode == ThresholdMode::Quantile
             ? table.salience_quantile(config.threshold_quantile)
             : config.threshold_absolute;
}

int hop_budget(double salience, double threshold, const TraversalConfig& config) {
  if (config.fixed_hops) return std::min(*config.fixed_hops, config.max_hops);
  const int hops = salience >= threshold ? config.hub_hops : config.peripheral_hops;
  return std::min(hops, config.max_hops);
}

int hop_budget(double salience, const CentralityTable& table, const TraversalConfig& config) {
  return hop_budget(salience, salience_threshold(table, config), config);
}

namespace {

// Node indices within `budget` undirected hops of `seed`, with distances.
std::vector<std::pair<std::size_t, int>> bounded_bfs(const KnowledgeGraph& graph, std::size_t seed,
                                                     int budget) {
  std::vector<int> dist(graph.node_count(), -1);
  std::vector<std::pair<std::size_t, int>> reached{{seed, 0}};
  dist[seed] = 0;
  for (std::size_t head = 0; head < reached.size(); ++head) {
    const auto [v, d] = reached[head];
    if (d == budget) continue;
    auto visit = [&](std::optional<std::size_t> w) {
      if (w && dist[*w] < 0) {
        dist[*w] = d + 1;
        reached.emplace_back(*w, d + 1);
      }
    };
    for (std::size_t e : graph.out_edges(v)) visit(graph.dst_index(e));
    for (std::size_t e : graph.in_edges(v)) visit(graph.src_index(e));
  }
  return reached;
}

}  // namespace

Subgraph traverse(const KnowledgeGraph& graph, std::span<const SeedMatch> seeds,
                  const CentralityTable& table, const TraversalConfig& config) {
  config.validate();
  Subgraph sub;
  const double threshold = salience_threshold(table, config);
  for (const auto& seed : seeds) {
    const Node& node = graph.at(seed.node);
    const auto* scores = table.find(node.id);
    const int budget = hop_budget(scores ? scores->salience : 0.0, threshold, config);
    auto existing = std::find_if(sub.seeds.begin(), sub.seeds.end(),
                                 [&](const SubgraphSeed& s) { return s.node == node.id; });
    if (existing == sub.seeds.end()) {
      sub.seeds.push_back({node.id, budget});
    } else {
      existing->budget = std::max(existing->budget, budget);
    }
  }
  for (const auto& seed : sub.seeds) {
    for (auto [index, d] : bounded_bfs(graph, *graph.index_of(seed.node), seed.budget)) {
      const auto& id = graph.nodes()[index].id;
      auto [it, fresh] = sub.hops.emplace(id, d);
      if (!fresh) it->second = std::min(it->second, d);
    }
  }
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    const Edge& edge = graph.edges()[e];
    if (sub.contains(edge.src) && sub.contains(edge.dst)) sub.edges.push_back(e);
  }
  return sub;
}

// ---- paths -----------------------------------------------------------------

double path_score(const RiskPath& path, const CentralityTable& table, PathRanking ranking) {
  if (ranking == PathRanking::WeightProduct) {
    double score = 1.0;
    for (const auto& step : path.steps) {
      if (step.weight_percent) score *= *step.weight_percent / 100.0;
    }
    return score;
  }
  if (path.nodes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& id : path.nodes) {
    if (const auto* s = table.find(id)) total += s->salience;
  }
  return total / static_cast<double>(path.nodes.size());
}

void rank_paths(std::vector<RiskPath>& paths) {
  auto step_key = [](const PathStep& s) {
    return std::make_tuple(s.kind, s.orientation, s.weight_percent.has_value(),
                           s.weight_percent.value_or(0.0));
  };
  std::sort(paths.begin(), paths.end(), [&](const RiskPath& a, const RiskPath& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.nodes != b.nodes) return a.nodes < b.nodes;
    return std::lexicographical_compare(
        a.steps.begin(), a.steps.end(), b.steps.begin(), b.steps.end(),
        [&](const PathStep& x, const PathStep& y) { return step_key(x) < step_key(y); });
  });
}

namespace {

struct Incidence {
  std::size_t edge;
  std::size_t far;
  Orientation orientation;
};

class PathEnumerator {
 public:
  PathEnumerator(const KnowledgeGraph& graph, const Subgraph& sub)
      : graph_(graph), incident_(graph.node_count()) {
    for (std::size_t e : sub.edges) {
      const auto s = *graph.src_index(e);
      const auto d = *graph.dst_index(e);
      incident_[s].push_back({e, d, Orientation::Forward});
      incident_[d].push_back({e, s, Orientation::Inverse});
    }
  }

  void run(std::size_t seed, int budget, std::vector<RiskPath>& out) {
    budget_ = budget;
    dist_.assign(graph_.node_count(), -1);
    std::vector<std::size_t> queue{seed};
    dist_[seed] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto v = queue[head];
      for (const auto& inc : incident_[v]) {
        if (dist_[inc.far] < 0) {
          dist_[inc.far] = dist_[v] + 1;
          queue.push_back(inc.far);
        }
      }
    }
    current_ = RiskPath{};
    current_.nodes.push_back(graph_.nodes()[seed].id);
    walk(seed, 0, out);
  }

 private:
  void walk(std::size_t v, int depth, std::vector<RiskPath>& out) {
    bool extended = false;
    if (depth < budget_) {
      for (const auto& inc : incident_[v]) {
        if (dist_[inc.far] != depth + 1) continue;
        extended = true;
        const Edge& edge = graph_.edges()[inc.edge];
        current_.nodes.push_back(graph_.nodes()[inc.far].id);
        current_.steps.push_back({edge.kind, inc.orientation, edge.weight_percent});
        walk(inc.far, depth + 1, out);
        current_.nodes.pop_back();
        current_.steps.pop_back();
      }
    }
    if (!extended && depth > 0) out.push_back(current_);
  }

  const KnowledgeGraph& graph_;
  std::vector<std::vector<Incidence>> incident_;
  std::vector<int> dist_;
  int budget_ = 0;
  RiskPath current_;
};

}  // namespace

std::vector<RiskPath> extract_paths(const KnowledgeGraph& graph, const Subgraph& subgraph,
                                    const CentralityTable& table, const TraversalConfig& config) {
  std::vector<RiskPath> paths;
  PathEnumerator enumerator(graph, subgraph);
  for (const auto& seed : subgraph.seeds) {
    const auto index = graph.index_of(seed.node);
    if (!index) throw GraphError(GraphError::Kind::UnknownNode, "unknown seed '" + seed.node + "'");
    enumerator.run(*index, seed.budget, paths);
  }
  for (auto& path : paths) path.score = path_score(path, table, config.ranking);
  rank_paths(paths);
  if (config.max_paths != 0 && paths.size() > config.max_paths) paths.resize(config.max_paths);
  return paths;
}

bool path_in_graph(const RiskPath& path, const KnowledgeGraph& graph) {
  if (path.nodes.size() != path.steps.size() + 1) return false;
  std::set<NodeId> seen(path.nodes.begin(), path.nodes.end());
  if (seen.size() != path.nodes.size()) return false;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& step = path.steps[i];
    const bool forward = step.orientation == Orientation::Forward;
    const auto& src = forward ? path.nodes[i] : path.nodes[i + 1];
    const auto& dst = forward ? path.nodes[i + 1] : path.nodes[i];
    const bool found = std::any_of(graph.edges().begin(), graph.edges().end(), [&](const Edge& e) {
      return e.src == src && e.dst == dst && e.kind == step.kind &&
             e.weight_percent == step.weight_percent;
    });
    if (!found) return false;
  }
  return true;
}

// ---- serialization -----------------------------------------------------------

void write_subgraph(std::ostream& out, const KnowledgeGraph& graph, const Subgraph& subgraph) {
  for (const auto& [id, hops] : subgraph.hops) {
    json node = records::to_json(graph.at(id));
    out << node.dump() << '\n';
  }
  for (std::size_t e : subgraph.edges) out << records::to_json(graph.edges()[e]).dump() << '\n';
}

void write_paths(std::ostream& out, std::span<const RiskPath> paths) {
  for (const auto& path : paths) {
    json steps = json::array();
    for (const auto& step : path.steps) {
      json s{{"kind", to_string(step.kind)}, {"orientation", to_string(step.orientation)}};
      if (step.weight_percent) s["weight_percent"] = *step.weight_percent;
      steps.push_back(std::move(s));
    }
    out << json{{"rec", "path"}, {"nodes", path.nodes}, {"edges", std::move(steps)}, {"score", path.score}}
               .dump()
        << '\n';
  }
}

std::vector<RiskPath> read_paths(std::istream& in) {
  std::vector<RiskPath> paths;
  std::string line;
  for (std::size_t record = 0; std::getline(in, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.value("rec", "") != "path") continue;
      records::require_known_fields(j, {"rec", "nodes", "edges", "score"}, "path");
      RiskPath path;
      path.nodes = j.at("nodes").get<std::vector<NodeId>>();
      for (const auto& s : j.at("edges")) {
        records::require_known_fields(s, {"kind", "orientation", "weight_percent"}, "path edge");
        PathStep step;
        const auto kind = parse_edge_kind(s.at("kind").get<std::string>());
        const auto orientation = parse_orientation(s.value("orientation", "forward"));
        if (!kind || !orientation) throw GraphError(GraphError::Kind::Malformed, "bad path edge");
        step.kind = *kind;
        step.orientation = *orientation;
        if (s.contains("weight_percent")) step.weight_percent = s["weight_percent"].get<double>();
        path.steps.push_back(step);
      }
      path.score = j.value("score", 0.0);
      if (path.nodes.size() != path.steps.size() + 1) {
        throw GraphError(GraphError::Kind::Malformed, "path needs one more node than edges");
      }
      paths.push_back(std::move(path));
    } catch (const GraphError& e) {
      throw GraphError(e.kind(), e.what(), record);
    } catch (const json::exception& e) {
      throw GraphError(GraphError::Kind::Malformed, e.what(), record);
    }
  }
  return paths;
}

}  // namespace chainsight
