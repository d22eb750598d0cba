#include "chainsight/kg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "chainsight/records.hpp"
#include "chainsight/text.hpp"

namespace chainsight {

namespace {

constexpr std::array<NodeKind, kNodeKindCount> kNodeKinds = {
    NodeKind::Company,  NodeKind::Product,  NodeKind::InputProduct,
    NodeKind::InputToInputProduct, NodeKind::Industry, NodeKind::Location};

constexpr std::array<EdgeKind, kEdgeKindCount> kEdgeKinds = {
    EdgeKind::Produces,       EdgeKind::SoldBy,      EdgeKind::BelongsTo,
    EdgeKind::HasInput,       EdgeKind::InputTo,     EdgeKind::ManufacturedIn,
    EdgeKind::SourcedFrom,    EdgeKind::MadeWith,    EdgeKind::IncludesProduct,
    EdgeKind::ProductionLocationFor};

constexpr std::array<std::string_view, kNodeKindCount> kNodeKindNames = {
    "Company", "Product", "InputProduct", "InputToInputProduct", "Industry", "Location"};

constexpr std::array<std::string_view, kNodeKindCount> kNodeKindLabels = {
    "Company", "Product", "Input Product", "Input to Input Product", "Industry", "Location"};

constexpr std::array<std::string_view, kEdgeKindCount> kEdgeKindNames = {
    "Produces",    "SoldBy",   "BelongsTo",       "HasInput",
    "InputTo",     "ManufacturedIn", "SourcedFrom", "MadeWith",
    "IncludesProduct", "ProductionLocationFor"};

// Bit sets over NodeKind.
using KindMask = std::uint8_t;

constexpr KindMask bit(NodeKind k) { return static_cast<KindMask>(1u << static_cast<unsigned>(k)); }

constexpr KindMask kCompany = bit(NodeKind::Company);
constexpr KindMask kIndustry = bit(NodeKind::Industry);
constexpr KindMask kLocation = bit(NodeKind::Location);
// Goods a company can produce or sell directly.
constexpr KindMask kTraded = bit(NodeKind::Product) | bit(NodeKind::InputProduct);
constexpr KindMask kGoods = kTraded | bit(NodeKind::InputToInputProduct);
constexpr KindMask kInputs = bit(NodeKind::InputProduct) | bit(NodeKind::InputToInputProduct);

struct Signature {
  KindMask sources;
  KindMask targets;
};

constexpr std::array<Signature, kEdgeKindCount> kSignatures = {{
    {kCompany, kTraded},    // Produces
    {kTraded, kCompany},    // SoldBy
    {kGoods, kIndustry},    // BelongsTo
    {kGoods, kGoods},       // HasInput
    {kGoods, kGoods},       // InputTo
    {kGoods, kLocation},    // ManufacturedIn
    {kGoods, kLocation},    // SourcedFrom
    {kGoods, kInputs},      // MadeWith
    {kIndustry, kGoods},    // IncludesProduct
    {kLocation, kGoods},    // ProductionLocationFor
}};

constexpr MetaField kCompanyMeta[] = {{"ticker", MetaType::Text}, {"total_revenue", MetaType::Number}};
constexpr MetaField kGoodsMeta[] = {{"hs_code", MetaType::Text},
                                    {"total_revenue_share", MetaType::Percent},
                                    {"production_cost_percentage", MetaType::Percent}};
constexpr MetaField kIndustryMeta[] = {{"naics_code", MetaType::Text}};
constexpr MetaField kLocationMeta[] = {{"longitude", MetaType::Longitude},
                                       {"latitude", MetaType::Latitude},
                                       {"production_share", MetaType::Percent}};

template <std::size_t N>
std::optional<std::size_t> lookup(const std::array<std::string_view, N>& names, std::string_view text) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == text) return i;
  }
  return std::nullopt;
}

std::string edge_subject(std::size_t i) { return "edge #" + std::to_string(i); }

bool in_range(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

void check_metadata(const Node& node, ValidationReport& report) {
  const auto schema = metadata_schema(node.kind);
  for (const auto& [key, value] : node.meta) {
    const auto field = std::find_if(schema.begin(), schema.end(),
                                    [&](const MetaField& f) { return f.key == key; });
    if (field == schema.end()) {
      report.push_back({Violation::Kind::Metadata, node.id, std::nullopt,
                        "metadata key '" + key + "' not permitted for " +
                            std::string(to_string(node.kind))});
      continue;
    }
    if (field->type == MetaType::Text) {
      if (!std::holds_alternative<std::string>(value)) {
        report.push_back({Violation::Kind::Metadata, node.id, std::nullopt,
                          "metadata '" + key + "' must be a string"});
      }
      continue;
    }
    if (!std::holds_alternative<double>(value)) {
      report.push_back({Violation::Kind::Metadata, node.id, std::nullopt,
                        "metadata '" + key + "' must be numeric"});
      continue;
    }
    const double v = std::get<double>(value);
    bool ok = true;
    switch (field->type) {
      case MetaType::Percent: ok = in_range(v, 0.0, 100.0); break;
      case MetaType::Latitude: ok = in_range(v, -90.0, 90.0); break;
      case MetaType::Longitude: ok = in_range(v, -180.0, 180.0); break;
      case MetaType::Number: ok = std::isfinite(v); break;
      case MetaType::Text: break;
    }
    if (!ok) {
      report.push_back({Violation::Kind::OutOfRange, node.id, std::nullopt,
                        "metadata '" + key + "' value " + text::format_number(v) + " out of range"});
    }
  }
}

}  // namespace

std::string_view to_string(NodeKind kind) { return kNodeKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(EdgeKind kind) { return kEdgeKindNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(Orientation o) { return o == Orientation::Forward ? "forward" : "inverse"; }

std::string_view display_label(NodeKind kind) { return kNodeKindLabels[static_cast<std::size_t>(kind)]; }

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  if (auto i = lookup(kNodeKindNames, text)) return kNodeKinds[*i];
  return std::nullopt;
}

std::optional<EdgeKind> parse_edge_kind(std::string_view text) {
  if (auto i = lookup(kEdgeKindNames, text)) return kEdgeKinds[*i];
  return std::nullopt;
}

std::optional<Orientation> parse_orientation(std::string_view text) {
  if (text == "forward") return Orientation::Forward;
  if (text == "inverse") return Orientation::Inverse;
  return std::nullopt;
}

std::span<const NodeKind> all_node_kinds() { return kNodeKinds; }
std::span<const EdgeKind> all_edge_kinds() { return kEdgeKinds; }

bool signature_allows(EdgeKind kind, NodeKind src, NodeKind dst) {
  const auto& sig = kSignatures[static_cast<std::size_t>(kind)];
  return (sig.sources & bit(src)) != 0 && (sig.targets & bit(dst)) != 0;
}

std::span<const MetaField> metadata_schema(NodeKind kind) {
  switch (kind) {
    case NodeKind::Company: return kCompanyMeta;
    case NodeKind::Product:
    case NodeKind::InputProduct:
    case NodeKind::InputToInputProduct: return kGoodsMeta;
    case NodeKind::Industry: return kIndustryMeta;
    case NodeKind::Location: return kLocationMeta;
  }
  return {};
}

GraphError::GraphError(Kind kind, std::string message, std::optional<std::size_t> record)
    : std::runtime_error(record ? "record " + std::to_string(*record + 1) + ": " + message : message),
      kind_(kind),
      record_(record) {}

KnowledgeGraph::KnowledgeGraph(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second) {
      throw GraphError(GraphError::Kind::DuplicateNode, "duplicate node id '" + nodes_[i].id + "'");
    }
  }
  out_.resize(nodes_.size());
  in_.resize(nodes_.size());
  endpoints_.reserve(edges_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto s = index_of(edges_[e].src);
    auto d = index_of(edges_[e].dst);
    endpoints_.emplace_back(s, d);
    if (s && d) {
      out_[*s].push_back(e);
      in_[*d].push_back(e);
    }
  }
}

const Node* KnowledgeGraph::find(std::string_view id) const {
  auto i = index_of(id);
  return i ? &nodes_[*i] : nullptr;
}

const Node& KnowledgeGraph::at(std::string_view id) const {
  if (const Node* n = find(id)) return *n;
  throw GraphError(GraphError::Kind::UnknownNode, "unknown node id '" + std::string(id) + "'");
}

std::optional<std::size_t> KnowledgeGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ValidationReport validate(const KnowledgeGraph& graph) {
  ValidationReport report;
  for (const Node& node : graph.nodes()) {
    if (text::trim(node.name).empty()) {
      report.push_back({Violation::Kind::EmptyName, node.id, std::nullopt, "node name is empty"});
    }
    check_metadata(node, report);
  }
  const auto& edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    const Node* src = graph.find(edge.src);
    const Node* dst = graph.find(edge.dst);
    if (!src || !dst) {
      report.push_back({Violation::Kind::Dangling, edge_subject(e), e,
                        "dangling endpoint '" + (!src ? edge.src : edge.dst) + "'"});
    } else if (!signature_allows(edge.kind, src->kind, dst->kind)) {
      report.push_back({Violation::Kind::Schema, edge_subject(e), e,
                        std::string(to_string(edge.kind)) + " cannot link " +
                            std::string(to_string(src->kind)) + " to " +
                            std::string(to_string(dst->kind))});
    }
    if (edge.weight_percent && !in_range(*edge.weight_percent, 0.0, 100.0)) {
      report.push_back({Violation::Kind::OutOfRange, edge_subject(e), e,
                        "weight_percent " + text::format_number(*edge.weight_percent) +
                            " outside [0,100]"});
    }
  }
  return report;
}

namespace {

struct ParsedDocument {
  KnowledgeGraph graph;
  std::vector<std::size_t> node_records;
  std::vector<std::size_t> edge_records;
};

ParsedDocument parse_document(std::istream& source) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<std::size_t> node_records;
  std::vector<std::size_t> edge_records;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  for (std::size_t record = 0; std::getline(source, line); ++record) {
    if (text::trim(line).empty()) continue;
    records::json j;
    try {
      j = records::json::parse(line);
    } catch (const records::json::parse_error& e) {
      throw GraphError(GraphError::Kind::Malformed, std::string("invalid JSON: ") + e.what(), record);
    }
    try {
      if (!j.is_object() || !j.contains("rec") || !j["rec"].is_string()) {
        throw GraphError(GraphError::Kind::Malformed, "record needs a string 'rec' field");
      }
      const auto rec = j["rec"].get<std::string>();
      if (rec == "node") {
        Node node = records::node_from_json(j);
        if (auto [it, fresh] = seen.emplace(node.id, record); !fresh) {
          throw GraphError(GraphError::Kind::DuplicateNode,
                           "duplicate node id '" + node.id + "' (first at record " +
                               std::to_string(it->second + 1) + ")");
        }
        nodes.push_back(std::move(node));
        node_records.push_back(record);
      } else if (rec == "edge") {
        edges.push_back(records::edge_from_json(j));
        edge_records.push_back(record);
      } else {
        throw GraphError(GraphError::Kind::Malformed, "unknown record type '" + rec + "'");
      }
    } catch (const GraphError& e) {
      if (e.record()) throw;
      throw GraphError(e.kind(), e.what(), record);
    }
  }
  return {KnowledgeGraph(std::move(nodes), std::move(edges)), std::move(node_records),
          std::move(edge_records)};
}

GraphError::Kind error_kind(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::Dangling: return GraphError::Kind::DanglingEdge;
    default: return GraphError::Kind::SchemaViolation;
  }
}

}  // namespace

KnowledgeGraph parse_graph(std::istream& source) { return parse_document(source).graph; }

KnowledgeGraph load_graph(std::istream& source) {
  ParsedDocument doc = parse_document(source);
  const ValidationReport report = validate(doc.graph);
  if (!report.empty()) {
    const Violation& first = report.front();
    std::optional<std::size_t> record;
    if (first.edge_index) {
      record = doc.edge_records[*first.edge_index];
    } else if (auto i = doc.graph.index_of(first.subject)) {
      record = doc.node_records[*i];
    }
    throw GraphError(error_kind(first.kind), first.subject + ": " + first.message, record);
  }
  return std::move(doc.graph);
}

KnowledgeGraph load_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file '" + path + "'");
  return load_graph(in);
}

void write_graph(std::ostream& out, const KnowledgeGraph& graph) {
  for (const Node& node : graph.nodes()) out << records::to_json(node).dump() << '\n';
  for (const Edge& edge : graph.edges()) out << records::to_json(edge).dump() << '\n';
}

std::vector<Neighbor> neighbors(const KnowledgeGraph& graph, std::string_view node,
                                Direction direction, std::span<const EdgeKind> kinds) {
  const auto index = graph.index_of(node);
  if (!index) {
    throw GraphError(GraphError::Kind::UnknownNode, "unknown node id '" + std::string(node) + "'");
  }
  auto wanted = [&](EdgeKind k) {
    return kinds.empty() || std::find(kinds.begin(), kinds.end(), k) != kinds.end();
  };
  std::vector<Neighbor> result;
  const auto& edges = graph.edges();
  const auto& nodes = graph.nodes();
  if (direction != Direction::In) {
    for (std::size_t e : graph.out_edges(*index)) {
      if (wanted(edges[e].kind)) {
        result.push_back({&edges[e], &nodes[*graph.dst_index(e)], Orientation::Forward});
      }
    }
  }
  if (direction != Direction::Out) {
    for (std::size_t e : graph.in_edges(*index)) {
      if (wanted(edges[e].kind)) {
        result.push_back({&edges[e], &nodes[*graph.src_index(e)], Orientation::Inverse});
      }
    }
  }
  std::stable_sort(result.begin(), result.end(), [](const Neighbor& a, const Neighbor& b) {
    return std::tie(a.node->id, a.edge->kind) < std::tie(b.node->id, b.edge->kind);
  });
  return result;
}

std::vector<const Node*> find_nodes_by_name(const KnowledgeGraph& graph, std::string_view query) {
  std::vector<const Node*> result;
  if (query.empty()) return result;
  const std::string needle = text::to_lower(query);
  for (const Node& node : graph.nodes()) {
    if (text::to_lower(node.name).find(needle) != std::string::npos) result.push_back(&node);
  }
  std::sort(result.begin(), result.end(), [](const Node* a, const Node* b) {
    return std::make_tuple(a->name.size(), std::string_view(a->id)) <
           std::make_tuple(b->name.size(), std::string_view(b->id));
  });
  return result;
}

}  // namespace chainsight
