#pragma once

// Typed supply-chain knowledge graph: schema, ingestion, validation and
// neighborhood queries.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace chainsight {

enum class NodeKind : std::uint8_t {
  Company,
  Product,
  InputProduct,
  InputToInputProduct,
  Industry,
  Location,
};

enum class EdgeKind : std::uint8_t {
  Produces,
  SoldBy,
  BelongsTo,
  HasInput,
  InputTo,
  ManufacturedIn,
  SourcedFrom,
  MadeWith,
  IncludesProduct,
  ProductionLocationFor,
};

inline constexpr std::size_t kNodeKindCount = 6;
inline constexpr std::size_t kEdgeKindCount = 10;

/// Direction an edge is walked relative to its stored direction.
enum class Orientation : std::uint8_t { Forward, Inverse };

enum class Direction : std::uint8_t { Out, In, Both };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);
std::string_view to_string(Orientation orientation);
std::optional<NodeKind> parse_node_kind(std::string_view text);
std::optional<EdgeKind> parse_edge_kind(std::string_view text);
std::optional<Orientation> parse_orientation(std::string_view text);

/// Human-readable label ("Input Product" rather than "InputProduct").
std::string_view display_label(NodeKind kind);

std::span<const NodeKind> all_node_kinds();
std::span<const EdgeKind> all_edge_kinds();

/// True when an edge of `kind` may run from a `src` node to a `dst` node.
bool signature_allows(EdgeKind kind, NodeKind src, NodeKind dst);

using NodeId = std::string;
using MetaValue = std::variant<std::string, double>;

enum class MetaType : std::uint8_t { Text, Number, Percent, Latitude, Longitude };

struct MetaField {
  std::string_view key;
  MetaType type;
};

/// Metadata keys permitted for a node kind, in rendering order.
std::span<const MetaField> metadata_schema(NodeKind kind);

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Company;
  std::string name;
  std::map<std::string, MetaValue, std::less<>> meta;

  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId src;
  NodeId dst;
  EdgeKind kind = EdgeKind::Produces;
  std::optional<double> weight_percent;

  bool operator==(const Edge&) const = default;
};

/// One adjacent edge seen from a node, with the node at its far end.
struct Neighbor {
  const Edge* edge = nullptr;
  const Node* node = nullptr;
  Orientation orientation = Orientation::Forward;
};

class GraphError : public std::runtime_error {
 public:
  enum class Kind { Malformed, DuplicateNode, DanglingEdge, SchemaViolation, UnknownNode };

  GraphError(Kind kind, std::string message, std::optional<std::size_t> record = {});

  Kind kind() const noexcept { return kind_; }
  /// Zero-based record (line) index in the source document, when known.
  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  Kind kind_;
  std::optional<std::size_t> record_;
};

/// Immutable node/edge store with per-node adjacency.
///
/// Construction only rejects duplicate node ids; dangling edges and schema
/// violations are retained so that `validate` can report them. Use
/// `load_graph` for checked ingestion.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<Node> nodes, std::vector<Edge> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  const Node* find(std::string_view id) const;
  const Node& at(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;

  /// Edge indices leaving / entering the node at `index`. Dangling edges are
  /// absent from both lists.
  const std::vector<std::size_t>& out_edges(std::size_t index) const { return out_[index]; }
  const std::vector<std::size_t>& in_edges(std::size_t index) const { return in_[index]; }

  /// Node indices of an edge's endpoints; nullopt for a dangling endpoint.
  std::optional<std::size_t> src_index(std::size_t edge) const { return endpoints_[edge].first; }
  std::optional<std::size_t> dst_index(std::size_t edge) const { return endpoints_[edge].second; }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::optional<std::size_t>, std::optional<std::size_t>>> endpoints_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

struct Violation {
  enum class Kind { Schema, OutOfRange, Dangling, Metadata, EmptyName };

  Kind kind;
  /// Node id for node-level entries, "edge #<i>" for edges.
  std::string subject;
  std::optional<std::size_t> edge_index;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const KnowledgeGraph& graph);

/// Parses and validates a line-delimited graph document. Throws GraphError on
/// the first problem, naming the offending record.
KnowledgeGraph load_graph(std::istream& source);
KnowledgeGraph load_graph_file(const std::string& path);

/// Parses without validation; only malformed records and duplicate ids throw.
KnowledgeGraph parse_graph(std::istream& source);

void write_graph(std::ostream& out, const KnowledgeGraph& graph);

/// Adjacent edges matching `direction` and `kinds`, ordered by far-end node id
/// then edge kind. Throws GraphError(UnknownNode).
std::vector<Neighbor> neighbors(const KnowledgeGraph& graph, std::string_view node,
                                Direction direction,
                                std::span<const EdgeKind> kinds = {});

/// Case-insensitive substring match over names; shortest name first, then id.
std::vector<const Node*> find_nodes_by_name(const KnowledgeGraph& graph, std::string_view query);

}  // namespace chainsight
