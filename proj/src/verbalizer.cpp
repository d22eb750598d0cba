#include "chainsight/verbalizer.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "chainsight/records.hpp"
#include "chainsight/text.hpp"

namespace chainsight {

using records::json;

namespace {

struct DefaultPhrase {
  EdgeKind kind;
  Orientation orientation;
  std::string_view text;
  std::string_view relative;
};

constexpr auto F = Orientation::Forward;
constexpr auto I = Orientation::Inverse;

// Walked forward a phrase reads src -> dst in the stored edge direction; walked
// inverse, {src} is the stored edge's target.
constexpr DefaultPhrase kDefaultPhrases[] = {
    {EdgeKind::Produces, F, "{src} generates[ {w}% of its] revenue from selling {dst}",
     "which generates[ {w}% of its] revenue from selling {dst}"},
    {EdgeKind::Produces, I, "{src} is produced by {dst}[, generating {w}% of its revenue]",
     "which is produced by {dst}[, generating {w}% of its revenue]"},
    {EdgeKind::SoldBy, F, "{src} is sold by {dst}[, generating {w}% of its revenue]",
     "which is sold by {dst}[, generating {w}% of its revenue]"},
    {EdgeKind::SoldBy, I, "{src} sells {dst}[, generating {w}% of its revenue]",
     "which sells {dst}[, generating {w}% of its revenue]"},
    {EdgeKind::BelongsTo, F, "{src} belongs to the {dst} industry[ ({w}% share)]",
     "which belongs to the {dst} industry[ ({w}% share)]"},
    {EdgeKind::BelongsTo, I, "the {src} industry includes {dst}[ ({w}% share)]",
     "which includes {dst}[ ({w}% share)]"},
    {EdgeKind::HasInput, F, "{src} spends[ {w}% of] its production budget on {dst}",
     "which spends[ {w}% of] its production budget on {dst}"},
    {EdgeKind::HasInput, I, "{src} is an input to {dst}[, taking {w}% of its production budget]",
     "which is an input to {dst}[, taking {w}% of its production budget]"},
    {EdgeKind::InputTo, F, "{src} is an input to {dst}[, taking {w}% of its production budget]",
     "which is an input to {dst}[, taking {w}% of its production budget]"},
    {EdgeKind::InputTo, I, "{src} spends[ {w}% of] its production budget on {dst}",
     "which spends[ {w}% of] its production budget on {dst}"},
    {EdgeKind::ManufacturedIn, F, "[{w}% of ]{src} are produced in {dst}",
     "[{w}% of ]which are produced in {dst}"},
    {EdgeKind::ManufacturedIn, I, "{src} produces[ {w}% of all] {dst}",
     "which produces[ {w}% of all] {dst}"},
    {EdgeKind::SourcedFrom, F, "[{w}% of ]{src} is sourced from {dst}",
     "[{w}% of ]which is sourced from {dst}"},
    {EdgeKind::SourcedFrom, I, "{src} supplies[ {w}% of all] {dst}",
     "which supplies[ {w}% of all] {dst}"},
    {EdgeKind::MadeWith, F, "{src} is made with {dst}[ ({w}% of production cost)]",
     "which is made with {dst}[ ({w}% of production cost)]"},
    {EdgeKind::MadeWith, I, "{src} is used to make {dst}[ ({w}% of production cost)]",
     "which is used to make {dst}[ ({w}% of production cost)]"},
    {EdgeKind::IncludesProduct, F, "the {src} industry includes {dst}[ ({w}% share)]",
     "which includes {dst}[ ({w}% share)]"},
    {EdgeKind::IncludesProduct, I, "{src} belongs to the {dst} industry[ ({w}% share)]",
     "which belongs to the {dst} industry[ ({w}% share)]"},
    {EdgeKind::ProductionLocationFor, F, "{src} is a production location for {dst}[ ({w}% of production)]",
     "which is a production location for {dst}[ ({w}% of production)]"},
    {EdgeKind::ProductionLocationFor, I, "[{w}% of ]{src} is produced in {dst}",
     "[{w}% of ]which is produced in {dst}"},
};

std::size_t slot(Orientation o) { return o == Orientation::Forward ? 0 : 1; }

// Expands slots in a segment that lies inside (optional == true) or outside
// a bracketed part of the template.
void expand(std::string_view segment, bool optional, std::string_view src, std::string_view dst,
            const std::string& weight, std::string& out) {
  std::size_t i = 0;
  while (i < segment.size()) {
    if (segment[i] != '{') {
      out.push_back(segment[i++]);
      continue;
    }
    const auto close = segment.find('}', i);
    if (close == std::string_view::npos) throw std::invalid_argument("unterminated slot in phrase template");
    const auto name = segment.substr(i + 1, close - i - 1);
    if (name == "src") {
      out += src;
    } else if (name == "dst") {
      out += dst;
    } else if (name == "w") {
      if (!optional) throw std::invalid_argument("{w} must sit inside a [...] segment");
      out += weight;
    } else {
      throw std::invalid_argument("unknown slot {" + std::string(name) + "} in phrase template");
    }
    i = close + 1;
  }
}

constexpr std::string_view kCompanySuffixes[] = {
    " Incorporated", " Corporation", " Inc.", " Inc", " Corp.", " Corp", " Ltd.", " Ltd",
    " Limited", " PLC", " plc", " N.V.", " S.A.", " AG", " SE", " Co.", " LLC"};

std::string meta_label(std::string_view key) {
  if (key == "ticker") return "Ticker";
  if (key == "total_revenue") return "Total revenue";
  if (key == "hs_code") return "HS code";
  if (key == "total_revenue_share") return "Total revenue share";
  if (key == "production_cost_percentage") return "Production cost percentage";
  if (key == "naics_code") return "NAICS code";
  if (key == "longitude") return "Longitude";
  if (key == "latitude") return "Latitude";
  if (key == "production_share") return "Production share";
  return std::string(key);
}

std::string meta_value(const MetaField& field, const MetaValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  const double v = std::get<double>(value);
  return text::format_number(v) + (field.type == MetaType::Percent ? "%" : "");
}

// Minimal RFC 4180 field splitting: quoted fields may contain commas and
// doubled quotes.
}  // namespace

// ---- phrases -----------------------------------------------------------------

const PhraseTable& PhraseTable::defaults() {
  static const PhraseTable table = [] {
    PhraseTable t;
    for (const auto& p : kDefaultPhrases) {
      t.set(p.kind, p.orientation, {std::string(p.text), std::string(p.relative)});
    }
    return t;
  }();
  return table;
}

const PhraseTemplate& PhraseTable::at(EdgeKind kind, Orientation orientation) const {
  return entries_[static_cast<std::size_t>(kind)][slot(orientation)];
}

void PhraseTable::set(EdgeKind kind, Orientation orientation, PhraseTemplate phrase) {
  // Validate both forms once with and once without a weight.
  for (const auto* t : {&phrase.text, phrase.relative ? &*phrase.relative : nullptr}) {
    if (!t) continue;
    render_template(*t, "a", "b", 1.0);
    render_template(*t, "a", "b", std::nullopt);
  }
  if (phrase.text.empty()) throw std::invalid_argument("phrase template must be non-empty");
  entries_[static_cast<std::size_t>(kind)][slot(orientation)] = std::move(phrase);
}

void PhraseTable::load_overrides(std::istream& in) {
  std::string line;
  for (std::size_t record = 1; std::getline(in, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      records::require_known_fields(j, {"kind", "orientation", "template", "relative"}, "phrase");
      const auto kind = parse_edge_kind(j.at("kind").get<std::string>());
      const auto orientation = parse_orientation(j.value("orientation", "forward"));
      if (!kind || !orientation) throw std::invalid_argument("unknown edge kind or orientation");
      PhraseTemplate phrase{j.at("template").get<std::string>(), std::nullopt};
      if (j.contains("relative") && !j["relative"].is_null()) {
        phrase.relative = j["relative"].get<std::string>();
      }
      set(*kind, *orientation, std::move(phrase));
    } catch (const std::exception& e) {
      throw std::invalid_argument("phrase record " + std::to_string(record) + ": " + e.what());
    }
  }
}

std::string render_template(std::string_view tmpl, std::string_view src, std::string_view dst,
                            std::optional<double> weight) {
  const std::string w = weight ? text::format_number(*weight) : std::string();
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const auto open = tmpl.find('[', i);
    expand(tmpl.substr(i, open == std::string_view::npos ? std::string_view::npos : open - i), false,
           src, dst, w, out);
    if (open == std::string_view::npos) break;
    const auto close = tmpl.find(']', open);
    if (close == std::string_view::npos) throw std::invalid_argument("unterminated [ in phrase template");
    if (weight) expand(tmpl.substr(open + 1, close - open - 1), true, src, dst, w, out);
    i = close + 1;
  }
  return out;
}

std::string edge_phrase(EdgeKind kind, Orientation orientation, std::string_view src,
                        std::string_view dst, std::optional<double> weight, const PhraseTable& table) {
  return render_template(table.at(kind, orientation).text, src, dst, weight);
}

std::string display_name(const Node& node) {
  if (node.kind != NodeKind::Company) return node.name;
  std::string name = node.name;
  for (auto suffix : kCompanySuffixes) {
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      name.erase(name.size() - suffix.size());
      while (!name.empty() && (name.back() == ',' || name.back() == ' ')) name.pop_back();
      break;
    }
  }
  return name.empty() ? node.name : name;
}

ContextShell verbalize_path(const RiskPath& path, const KnowledgeGraph& graph, const PhraseTable& table) {
  if (path.steps.empty() || !path_in_graph(path, graph)) {
    throw std::invalid_argument("path does not match the graph");
  }
  std::vector<std::string> names;
  names.reserve(path.nodes.size());
  for (const auto& id : path.nodes) names.push_back(display_name(graph.at(id)));

  std::string sentence;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& step = path.steps[i];
    const auto& phrase = table.at(step.kind, step.orientation);
    if (i == 0) {
      sentence = text::capitalize_first(render_template(phrase.text, names[0], names[1], step.weight_percent));
    } else if (phrase.relative) {
      sentence += ", " + render_template(*phrase.relative, names[i], names[i + 1], step.weight_percent);
    } else {
      sentence += ". " + text::capitalize_first(
                             render_template(phrase.text, names[i], names[i + 1], step.weight_percent));
    }
  }
  sentence += '.';

  ContextShell shell;
  shell.text = std::move(sentence);
  shell.source = Modality::GraphPath;
  std::string ids;
  for (const auto& id : path.nodes) ids += (ids.empty() ? "" : " > ") + id;
  shell.metadata = {{"path", ids},
                    {"seed", path.nodes.front()},
                    {"length", std::to_string(path.length())},
                    {"score", text::format_number(path.score)}};
  return shell;
}

ContextShell render_node_shell(const Node& node, const KnowledgeGraph& graph) {
  const Node& stored = graph.at(node.id);
  std::string out = stored.name + " is a " + std::string(display_label(stored.kind)) +
                    " in the supply-chain knowledge graph.";
  for (const auto& field : metadata_schema(stored.kind)) {
    auto it = stored.meta.find(field.key);
    if (it == stored.meta.end()) continue;
    out += " " + meta_label(field.key) + ": " + meta_value(field, it->second) + ".";
  }
  std::set<NodeId> listed;
  std::string linked;
  for (const auto& nb : neighbors(graph, stored.id, Direction::Both)) {
    if (!listed.insert(nb.node->id).second) continue;
    linked += (linked.empty() ? "" : ", ") + nb.node->name + " (" +
              std::string(display_label(nb.node->kind)) + ")";
  }
  if (!linked.empty()) out += " Linked to: " + linked + ".";

  ContextShell shell;
  shell.text = std::move(out);
  shell.source = Modality::GraphNode;
  shell.metadata = {{"node_id", stored.id},
                    {"kind", std::string(to_string(stored.kind))},
                    {"name", stored.name}};
  return shell;
}

std::vector<ContextShell> render_node_shells(const KnowledgeGraph& graph) {
  std::vector<ContextShell> shells;
  shells.reserve(graph.node_count());
  for (const Node& node : graph.nodes()) shells.push_back(render_node_shell(node, graph));
  return shells;
}

// ---- factors -----------------------------------------------------------------

FactorCatalog load_factor_definitions(std::istream& in) {
  FactorCatalog catalog;
  std::string line;
  for (std::size_t record = 1; std::getline(in, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      records::require_known_fields(j, {"name", "description", "when_high", "when_low"}, "factor definition");
      FactorDefinition def{j.at("name").get<std::string>(), j.at("description").get<std::string>(),
                           j.at("when_high").get<std::string>(), j.at("when_low").get<std::string>()};
      if (def.name.empty()) throw std::invalid_argument("factor name must be non-empty");
      if (!catalog.emplace(def.name, def).second) {
        throw std::invalid_argument("duplicate factor '" + def.name + "'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("factor definition " + std::to_string(record) + ": " + e.what());
    }
  }
  return catalog;
}

FactorCatalog load_factor_definitions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open factor definitions '" + path + "'");
  return load_factor_definitions(in);
}

ContextShell render_factor_shell(const FactorRecord& record) {
  if (!(record.weight_percent >= 0.0 && record.weight_percent <= 100.0)) {
    throw std::invalid_argument("position weight outside [0,100] for " + record.ticker);
  }
  std::string out = "The position in the portfolio is associated with the security " +
                    record.security_name + " represented by the ticker " + record.ticker +
                    ". This position constitutes " + text::format_number(record.weight_percent) +
                    "% of the total portfolio. Each of the following factors is given a z-score "
                    "(mean 0, sd 1) for this equity relative to all other equities.";
  for (const auto& [factor, z] : record.z_scores) {
    auto def = record.definitions.find(factor);
    if (def == record.definitions.end()) {
      throw std::invalid_argument("no definition for factor '" + factor + "'");
    }
    out += "\n\n" + record.security_name + " " + factor + ": " + text::format_significant(z, 4);
    out += "\nDescription: " + def->second.description;
    out += "\nWhen High: " + def->second.when_high;
    out += "\nWhen Low: " + def->second.when_low;
  }
  ContextShell shell;
  shell.text = std::move(out);
  shell.source = Modality::Factor;
  shell.metadata = {{"security", record.security_name},
                    {"ticker", record.ticker},
                    {"weight", text::format_number(record.weight_percent)}};
  return shell;
}

std::vector<FactorRecord> load_factor_table(std::istream& in, const FactorCatalog& catalog) {
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = text::csv_fields(line);
  if (header.size() < 3 || header[0] != "Security Name" || header[1] != "Ticker" || header[2] != "Weight") {
    throw std::invalid_argument("factor table must start with columns Security Name, Ticker, Weight");
  }
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (!catalog.contains(header[c])) {
      throw std::invalid_argument("factor column '" + header[c] + "' has no definition");
    }
  }
  std::vector<FactorRecord> rows;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::csv_fields(line);
    const std::string where = "factor table row " + std::to_string(row);
    if (fields.size() != header.size()) throw std::invalid_argument(where + ": wrong column count");
    FactorRecord rec;
    rec.security_name = fields[0];
    rec.ticker = fields[1];
    rec.weight_percent = text::parse_number(fields[2], where + " weight");
    for (std::size_t c = 3; c < header.size(); ++c) {
      if (fields[c].empty()) continue;
      rec.z_scores.emplace_back(header[c], text::parse_number(fields[c], where + " " + header[c]));
      rec.definitions.emplace(header[c], catalog.find(header[c])->second);
    }
    rows.push_back(std::move(rec));
  }
  return rows;
}

std::vector<FactorRecord> load_factor_table_file(const std::string& path, const FactorCatalog& catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open factor table '" + path + "'");
  return load_factor_table(in, catalog);
}

bool has_unfilled_placeholder(std::string_view text) {
  if (text.find("[`") != std::string_view::npos || text.find("['") != std::string_view::npos) return true;
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    const auto close = text.find('}', open);
    if (close == std::string_view::npos) return false;
    const auto name = text.substr(open + 1, close - open - 1);
    if (!name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ' ';
        })) {
      return true;
    }
  }
  return false;
}

}  // namespace chainsight
