#pragma once

// The three retrieval tools: declared schemas, argument validation and
// execution against the read-only stores.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainsight/centrality.hpp"
#include "chainsight/kg.hpp"
#include "chainsight/records.hpp"
#include "chainsight/shell.hpp"
#include "chainsight/traversal.hpp"
#include "chainsight/vecstore.hpp"
#include "chainsight/verbalizer.hpp"

namespace chainsight {

using records::json;

enum class ToolName { GetFactors, GetNews, GraphTraverser };

std::string_view to_string(ToolName tool);
std::optional<ToolName> parse_tool_name(std::string_view text);

/// Checks `value` against a JSON-schema subset: type, properties, required,
/// additionalProperties (false only), enum, minimum, maximum, minLength,
/// minItems, maxItems, items and format "date-time". Returns one message per
/// problem; empty means valid.
std::vector<std::string> validate_against_schema(const json& value, const json& schema,
                                                 const std::string& where = "arguments");

/// Parameter schema of one tool.
const json& tool_parameters(ToolName tool);

/// All three tools in chat-completions "tools" form.
const json& tool_registry();

struct ToolInvocation {
  std::string id;
  ToolName tool = ToolName::GetFactors;
  json arguments = json::object();
  std::vector<ContextShell> results;
  std::optional<std::string> error;
};

/// Everything the tools read. Pointers may be null when a store is not
/// loaded; invoking a tool that needs it records an error.
struct ToolStores {
  const Embedder* embedder = nullptr;
  const VectorIndex* factors = nullptr;
  const VectorIndex* news = nullptr;
  const VectorIndex* nodes = nullptr;
  const KnowledgeGraph* graph = nullptr;
  const CentralityTable* centrality = nullptr;
  const PhraseTable* phrases = nullptr;
  TraversalConfig traversal;
  std::size_t default_k = 3;
};

/// Runs one invocation in place. Failures land in `invocation.error`.
void execute_tool(ToolInvocation& invocation, const ToolStores& stores);
void execute_tools(std::vector<ToolInvocation>& invocations, const ToolStores& stores);

/// Source label for a tool's results, e.g. "Supply-chain paths for coltan"
/// or "News article". Empty when there is nothing to cite.
std::vector<std::string> reference_labels(const ToolInvocation& invocation);

/// One-line trace summary, e.g. "Retrieved: News article, pages 3, 4 and 1".
std::string result_summary(const ToolInvocation& invocation);

/// "3", "3 and 4", "3, 4 and 1".
std::string join_with_and(const std::vector<std::string>& items);

}  // namespace chainsight
