#pragma once

// Natural-language rendering of graph paths, graph nodes and factor rows.

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chainsight/kg.hpp"
#include "chainsight/shell.hpp"
#include "chainsight/traversal.hpp"

namespace chainsight {

/// Clause template for one (edge kind, orientation).
///
/// Slots: {src}, {dst}, {w}. A bracketed segment "[...]" is kept only when a
/// weight is present; {w} must sit inside one. `relative` is the form used
/// when chaining onto the previous clause ("which spends ..."); without it
/// the clause starts a new sentence.
struct PhraseTemplate {
  std::string text;
  std::optional<std::string> relative;
};

class PhraseTable {
 public:
  /// Built-in phrases for all twenty (kind, orientation) pairs.
  static const PhraseTable& defaults();

  const PhraseTemplate& at(EdgeKind kind, Orientation orientation) const;
  void set(EdgeKind kind, Orientation orientation, PhraseTemplate phrase);

  /// Applies line-delimited {kind, orientation, template[, relative]} records
  /// on top of the current entries.
  void load_overrides(std::istream& in);

 private:
  std::array<std::array<PhraseTemplate, 2>, kEdgeKindCount> entries_;
};

/// Fills a template. Throws std::invalid_argument for an unknown slot or a
/// {w} outside a bracketed segment.
std::string render_template(std::string_view tmpl, std::string_view src, std::string_view dst,
                            std::optional<double> weight);

std::string edge_phrase(EdgeKind kind, Orientation orientation, std::string_view src,
                        std::string_view dst, std::optional<double> weight,
                        const PhraseTable& table = PhraseTable::defaults());

/// Name used in narratives: company names lose a trailing legal suffix
/// ("Apple Inc." -> "Apple"); other kinds are unchanged.
std::string display_name(const Node& node);

/// One sentence chaining the path's edge phrases in order. Throws
/// std::invalid_argument when the path does not match the graph.
ContextShell verbalize_path(const RiskPath& path, const KnowledgeGraph& graph,
                            const PhraseTable& table = PhraseTable::defaults());

ContextShell render_node_shell(const Node& node, const KnowledgeGraph& graph);
std::vector<ContextShell> render_node_shells(const KnowledgeGraph& graph);

// ---- factor context shells ---------------------------------------------------

struct FactorDefinition {
  std::string name;
  std::string description;
  std::string when_high;
  std::string when_low;

  bool operator==(const FactorDefinition&) const = default;
};

using FactorCatalog = std::map<std::string, FactorDefinition, std::less<>>;

/// Line-delimited {name, description, when_high, when_low} records.
FactorCatalog load_factor_definitions(std::istream& in);
FactorCatalog load_factor_definitions_file(const std::string& path);

struct FactorRecord {
  std::string security_name;
  std::string ticker;
  double weight_percent = 0.0;
  /// Factor name and z-score, in presentation order.
  std::vector<std::pair<std::string, double>> z_scores;
  FactorCatalog definitions;
};

/// Renders the position paragraph followed by one block per factor. Throws
/// std::invalid_argument for a factor without a definition or a weight
/// outside [0,100].
ContextShell render_factor_shell(const FactorRecord& record);

/// Comma-separated table: Security Name, Ticker, Weight, then one column per
/// factor. Every factor column must be defined in `catalog`.
std::vector<FactorRecord> load_factor_table(std::istream& in, const FactorCatalog& catalog);
std::vector<FactorRecord> load_factor_table_file(const std::string& path, const FactorCatalog& catalog);

/// True when text still carries a template marker: a {slot} or a [`...'] field.
bool has_unfilled_placeholder(std::string_view text);

}  // namespace chainsight
