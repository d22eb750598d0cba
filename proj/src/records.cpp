#include "chainsight/records.hpp"

#include <algorithm>

namespace chainsight::records {

namespace {

[[noreturn]] void malformed(std::string message) {
  throw GraphError(GraphError::Kind::Malformed, std::move(message));
}

std::string required_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    malformed(std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}

}  // namespace

void require_known_fields(const json& record, std::initializer_list<std::string_view> allowed,
                          std::string_view what) {
  for (const auto& [key, _] : record.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      malformed("unknown field '" + key + "' in " + std::string(what) + " record");
    }
  }
}

json to_json(const Node& node) {
  json meta = json::object();
  for (const auto& [key, value] : node.meta) {
    std::visit([&](const auto& v) { meta[key] = v; }, value);
  }
  return json{{"rec", "node"},
              {"id", node.id},
              {"kind", to_string(node.kind)},
              {"name", node.name},
              {"meta", std::move(meta)}};
}

json to_json(const Edge& edge) {
  json j{{"rec", "edge"}, {"src", edge.src}, {"dst", edge.dst}, {"kind", to_string(edge.kind)}};
  if (edge.weight_percent) j["weight_percent"] = *edge.weight_percent;
  return j;
}

Node node_from_json(const json& record) {
  require_known_fields(record, {"rec", "id", "kind", "name", "meta"}, "node");
  Node node;
  node.id = required_string(record, "id");
  if (node.id.empty()) malformed("node id must be non-empty");
  const auto kind = required_string(record, "kind");
  const auto parsed = parse_node_kind(kind);
  if (!parsed) malformed("unknown node kind '" + kind + "'");
  node.kind = *parsed;
  node.name = required_string(record, "name");
  if (auto it = record.find("meta"); it != record.end()) {
    if (!it->is_object()) malformed("field 'meta' must be an object");
    for (const auto& [key, value] : it->items()) {
      if (value.is_string()) {
        node.meta.emplace(key, value.get<std::string>());
      } else if (value.is_number()) {
        node.meta.emplace(key, value.get<double>());
      } else {
        malformed("metadata '" + key + "' must be a string or number");
      }
    }
  }
  return node;
}

Edge edge_from_json(const json& record) {
  require_known_fields(record, {"rec", "src", "dst", "kind", "weight_percent"}, "edge");
  Edge edge;
  edge.src = required_string(record, "src");
  edge.dst = required_string(record, "dst");
  const auto kind = required_string(record, "kind");
  const auto parsed = parse_edge_kind(kind);
  if (!parsed) malformed("unknown edge kind '" + kind + "'");
  edge.kind = *parsed;
  if (auto it = record.find("weight_percent"); it != record.end() && !it->is_null()) {
    if (!it->is_number()) malformed("field 'weight_percent' must be a number");
    edge.weight_percent = it->get<double>();
  }
  return edge;
}

json to_json(const ContextShell& shell) {
  return json{{"text", shell.text}, {"source", to_string(shell.source)}, {"metadata", shell.metadata}};
}

ContextShell shell_from_json(const json& record) {
  ContextShell shell;
  shell.text = required_string(record, "text");
  const auto source = parse_modality(required_string(record, "source"));
  if (!source) malformed("unknown shell source");
  shell.source = *source;
  if (auto it = record.find("metadata"); it != record.end()) {
    if (!it->is_object()) malformed("shell metadata must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) malformed("shell metadata '" + key + "' must be a string");
      shell.metadata.emplace(key, value.get<std::string>());
    }
  }
  return shell;
}

}  // namespace chainsight::records
