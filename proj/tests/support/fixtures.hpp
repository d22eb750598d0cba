#pragma once

// Test fixtures: bundled data files and seeded synthetic graphs.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "chainsight/centrality.hpp"
#include "chainsight/kg.hpp"

namespace chainsight::testing {

inline std::string data_path(const std::string& relative) {
  return std::string(CHAINSIGHT_DATA_DIR) + "/" + relative;
}

inline KnowledgeGraph apple_graph() { return load_graph_file(data_path("apple/graph.jsonl")); }

using VertexPair = std::pair<UndirectedGraph::Vertex, UndirectedGraph::Vertex>;

inline UndirectedGraph make_undirected(std::size_t n, std::vector<VertexPair> edges) {
  return UndirectedGraph(n, edges);
}

inline UndirectedGraph path3() { return make_undirected(3, {{0, 1}, {1, 2}}); }
inline UndirectedGraph triangle() { return make_undirected(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline UndirectedGraph star(std::size_t leaves) {
  std::vector<VertexPair> edges;
  for (std::size_t i = 1; i <= leaves; ++i) edges.emplace_back(0, static_cast<UndirectedGraph::Vertex>(i));
  return make_undirected(leaves + 1, edges);
}

/// Connected random graph: a random spanning tree plus extra edges with
/// probability `density`.
inline UndirectedGraph random_connected(std::size_t n, double density, std::mt19937_64& rng) {
  std::vector<VertexPair> edges;
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> parent(0, v - 1);
    edges.emplace_back(static_cast<UndirectedGraph::Vertex>(parent(rng)), static_cast<UndirectedGraph::Vertex>(v));
  }
  std::bernoulli_distribution extra(density);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (extra(rng)) edges.emplace_back(static_cast<UndirectedGraph::Vertex>(a), static_cast<UndirectedGraph::Vertex>(b));
    }
  }
  return make_undirected(n, edges);
}

inline std::string node_id(NodeKind kind, std::size_t i) {
  return std::string(to_string(kind)) + "_" + std::to_string(i);
}

/// Every (src kind, dst kind, edge kind) triple the schema allows.
inline std::vector<std::tuple<NodeKind, NodeKind, EdgeKind>> allowed_triples() {
  std::vector<std::tuple<NodeKind, NodeKind, EdgeKind>> out;
  for (auto e : all_edge_kinds())
    for (auto s : all_node_kinds())
      for (auto d : all_node_kinds())
        if (signature_allows(e, s, d)) out.emplace_back(s, d, e);
  return out;
}

inline Node make_node(NodeKind kind, std::size_t i) {
  Node node{node_id(kind, i), kind, std::string(display_label(kind)) + " " + std::to_string(i), {}};
  switch (kind) {
    case NodeKind::Company:
      node.meta = {{"ticker", "T" + std::to_string(i)}, {"total_revenue", 1.0e9 * static_cast<double>(i + 1)}};
      break;
    case NodeKind::Location:
      node.meta = {{"longitude", -170.0 + static_cast<double>(i % 340)},
                   {"latitude", -80.0 + static_cast<double>(i % 160)},
                   {"production_share", static_cast<double>(i % 101)}};
      break;
    case NodeKind::Industry: node.meta = {{"naics_code", std::to_string(300000 + i)}}; break;
    default: node.meta = {{"hs_code", std::to_string(8400 + i)}, {"production_cost_percentage", static_cast<double>(i % 100)}};
  }
  return node;
}

/// Random schema-valid graph with `n` nodes (kinds cycle so all six occur)
/// and about `edges_per_node * n` edges, some weighted.
inline KnowledgeGraph random_schema_graph(std::size_t n, double edges_per_node, std::mt19937_64& rng) {
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back(make_node(all_node_kinds()[i % kNodeKindCount], i));
  std::vector<Edge> edges;
  const auto target = static_cast<std::size_t>(edges_per_node * static_cast<double>(n));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::bernoulli_distribution weighted(0.7);
  std::uniform_int_distribution<int> weight(1, 100);
  std::size_t attempts = 0;
  while (edges.size() < target && attempts++ < target * 200) {
    const Node& a = nodes[pick(rng)];
    const Node& b = nodes[pick(rng)];
    if (a.id == b.id) continue;
    std::vector<EdgeKind> kinds;
    for (auto k : all_edge_kinds())
      if (signature_allows(k, a.kind, b.kind)) kinds.push_back(k);
    if (kinds.empty()) continue;
    std::uniform_int_distribution<std::size_t> pk(0, kinds.size() - 1);
    Edge e{a.id, b.id, kinds[pk(rng)], std::nullopt};
    if (weighted(rng)) e.weight_percent = weight(rng);
    edges.push_back(std::move(e));
  }
  return KnowledgeGraph(std::move(nodes), std::move(edges));
}

/// Schema-conformant supply network grown by preferential attachment:
/// companies produce products, products take inputs (hub inputs attract
/// more buyers), inputs are made in locations and belong to industries.
inline KnowledgeGraph scale_free_supply_graph(std::size_t companies, std::mt19937_64& rng) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<std::size_t> input_attach;  // repeated input indices, degree-proportional
  std::vector<Node> inputs;
  for (std::size_t i = 0; i < 4; ++i) {
    inputs.push_back(make_node(NodeKind::InputProduct, i));
    input_attach.push_back(i);
  }
  std::vector<Node> locations;
  for (std::size_t i = 0; i < 5; ++i) locations.push_back(make_node(NodeKind::Location, i));
  std::vector<Node> industries;
  for (std::size_t i = 0; i < 3; ++i) industries.push_back(make_node(NodeKind::Industry, i));

  std::uniform_int_distribution<int> w(1, 60);
  std::bernoulli_distribution new_input(0.25);
  std::size_t product_count = 0;
  std::vector<Node> products;
  for (std::size_t c = 0; c < companies; ++c) {
    Node company = make_node(NodeKind::Company, c);
    const std::size_t lines = 1 + c % 3;
    for (std::size_t l = 0; l < lines; ++l) {
      Node product = make_node(NodeKind::Product, product_count++);
      edges.push_back({company.id, product.id, EdgeKind::Produces, static_cast<double>(w(rng))});
      for (int k = 0; k < 2; ++k) {
        std::size_t input;
        if (new_input(rng)) {
          input = inputs.size();
          inputs.push_back(make_node(NodeKind::InputProduct, input));
        } else {
          std::uniform_int_distribution<std::size_t> pick(0, input_attach.size() - 1);
          input = input_attach[pick(rng)];
        }
        input_attach.push_back(input);
        Edge e{product.id, inputs[input].id, EdgeKind::HasInput, static_cast<double>(w(rng))};
        if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
      }
      edges.push_back({product.id, industries[product_count % industries.size()].id, EdgeKind::BelongsTo, std::nullopt});
      products.push_back(std::move(product));
    }
    nodes.push_back(std::move(company));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    edges.push_back({inputs[i].id, locations[i % locations.size()].id, EdgeKind::ManufacturedIn,
                     static_cast<double>(w(rng))});
  }
  for (auto* group : {&products, &inputs, &locations, &industries}) {
    for (auto& n : *group) nodes.push_back(std::move(n));
  }
  return KnowledgeGraph(std::move(nodes), std::move(edges));
}

}  // namespace chainsight::testing
