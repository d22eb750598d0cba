#pragma once

// JSON record forms shared by the line-delimited file formats and the HTTP
// service.

#include "json.hpp"

#include "chainsight/kg.hpp"
#include "chainsight/shell.hpp"

namespace chainsight::records {

using nlohmann::json;

json to_json(const Node& node);
json to_json(const Edge& edge);

/// Strict parsers: unknown fields, wrong types and unknown kind strings throw
/// GraphError(Malformed).
Node node_from_json(const json& record);
Edge edge_from_json(const json& record);

/// {text, source, metadata}.
json to_json(const ContextShell& shell);
ContextShell shell_from_json(const json& record);

/// Rejects any key of `record` not listed in `allowed`.
void require_known_fields(const json& record, std::initializer_list<std::string_view> allowed,
                          std::string_view what);

}  // namespace chainsight::records
