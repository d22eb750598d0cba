#include "chainsight/tools.hpp"

#include <algorithm>
#include <stdexcept>

namespace chainsight {

std::string_view to_string(ToolName tool) {
  switch (tool) {
    case ToolName::GetFactors: return "get_factors";
    case ToolName::GetNews: return "get_news";
    case ToolName::GraphTraverser: return "graph_traverser";
  }
  return "get_factors";
}

std::optional<ToolName> parse_tool_name(std::string_view text) {
  for (auto t : {ToolName::GetFactors, ToolName::GetNews, ToolName::GraphTraverser})
    if (to_string(t) == text) return t;
  return std::nullopt;
}

namespace {

bool has_type(const json& value, std::string_view type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "boolean") return value.is_boolean();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "null") return value.is_null();
  return false;
}

void check(const json& value, const json& schema, const std::string& where, std::vector<std::string>& errors) {
  if (auto t = schema.find("type"); t != schema.end() && !has_type(value, t->get<std::string>())) {
    errors.push_back(where + ": expected " + t->get<std::string>());
    return;
  }
  if (auto e = schema.find("enum"); e != schema.end()) {
    if (std::find(e->begin(), e->end(), value) == e->end()) errors.push_back(where + ": not one of " + e->dump());
  }
  if (value.is_number()) {
    const double x = value.get<double>();
    if (auto m = schema.find("minimum"); m != schema.end() && x < m->get<double>())
      errors.push_back(where + ": below minimum " + m->dump());
    if (auto m = schema.find("maximum"); m != schema.end() && x > m->get<double>())
      errors.push_back(where + ": above maximum " + m->dump());
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (auto m = schema.find("minLength"); m != schema.end() && s.size() < m->get<std::size_t>())
      errors.push_back(where + ": shorter than " + m->dump() + " characters");
    if (schema.value("format", "") == "date-time") {
      try {
        parse_rfc3339(s);
      } catch (const std::invalid_argument&) {
        errors.push_back(where + ": not an RFC 3339 date-time");
      }
    }
  }
  if (value.is_array()) {
    if (auto m = schema.find("minItems"); m != schema.end() && value.size() < m->get<std::size_t>())
      errors.push_back(where + ": fewer than " + m->dump() + " items");
    if (auto m = schema.find("maxItems"); m != schema.end() && value.size() > m->get<std::size_t>())
      errors.push_back(where + ": more than " + m->dump() + " items");
    if (auto items = schema.find("items"); items != schema.end())
      for (std::size_t i = 0; i < value.size(); ++i)
        check(value[i], *items, where + "[" + std::to_string(i) + "]", errors);
  }
  if (value.is_object()) {
    const json props = schema.value("properties", json::object());
    for (const auto& name : schema.value("required", json::array()))
      if (!value.contains(name.get<std::string>()))
        errors.push_back(where + ": missing required '" + name.get<std::string>() + "'");
    const bool closed = schema.contains("additionalProperties") && schema["additionalProperties"] == false;
    for (const auto& [key, v] : value.items()) {
      if (auto p = props.find(key); p != props.end()) {
        check(v, *p, where + "." + key, errors);
      } else if (closed) {
        errors.push_back(where + ": unexpected property '" + key + "'");
      }
    }
  }
}

json object_schema(json properties, json required) {
  return {{"type", "object"},
          {"properties", std::move(properties)},
          {"required", std::move(required)},
          {"additionalProperties", false}};
}

const json& parameters_table(ToolName tool) {
  static const json factors = object_schema(
      {{"query", {{"type", "string"}, {"minLength", 1}, {"description", "What to look up in the factor exposures"}}},
       {"k", {{"type", "integer"}, {"minimum", 1}, {"maximum", 50}, {"description", "Number of shells"}}}},
      {"query"});
  static const json news = object_schema(
      {{"query", {{"type", "string"}, {"minLength", 1}, {"description", "Semantic description of the news wanted"}}},
       {"k", {{"type", "integer"}, {"minimum", 1}, {"maximum", 20}, {"description", "Number of chunks"}}},
       {"since", {{"type", "string"}, {"format", "date-time"}, {"description", "Only items published at or after"}}},
       {"stream", {{"type", "string"}, {"enum", {"macro", "stock-specific"}}}}},
      {"query"});
  static const json graph = object_schema(
      {{"mentions",
        {{"type", "array"},
         {"items", {{"type", "string"}, {"minLength", 1}}},
         {"minItems", 1},
         {"maxItems", 8},
         {"description", "Entity names to locate in the supply-chain graph"}}},
       {"hops", {{"type", "integer"}, {"minimum", 1}, {"maximum", 6}}},
       {"max_paths", {{"type", "integer"}, {"minimum", 1}, {"maximum", 100}}}},
      {"mentions"});
  switch (tool) {
    case ToolName::GetFactors: return factors;
    case ToolName::GetNews: return news;
    case ToolName::GraphTraverser: return graph;
  }
  return factors;
}

std::size_t k_argument(const json& args, std::size_t fallback) {
  return args.contains("k") ? args["k"].get<std::size_t>() : fallback;
}

std::vector<ContextShell> collect(const std::vector<SearchHit>& hits) {
  std::vector<ContextShell> out;
  for (const auto& h : hits) out.push_back(*h.shell);
  return out;
}

template <class T>
const T& require(const T* store, std::string_view what) {
  if (!store) throw std::runtime_error(std::string(what) + " is not loaded");
  return *store;
}

std::vector<std::string> mentions_of(const ToolInvocation& inv) {
  std::vector<std::string> out;
  if (inv.arguments.contains("mentions"))
    for (const auto& m : inv.arguments["mentions"]) out.push_back(m.get<std::string>());
  return out;
}

std::string meta(const ContextShell& s, const char* key) {
  auto it = s.metadata.find(key);
  return it == s.metadata.end() ? std::string() : it->second;
}

std::string news_label(const ContextShell& s) {
  const auto title = meta(s, "title");
  return title.empty() ? "News article" : title;
}

}  // namespace

std::vector<std::string> validate_against_schema(const json& value, const json& schema, const std::string& where) {
  std::vector<std::string> errors;
  check(value, schema, where, errors);
  return errors;
}

const json& tool_parameters(ToolName tool) { return parameters_table(tool); }

const json& tool_registry() {
  static const json registry = [] {
    const std::pair<ToolName, const char*> tools[] = {
        {ToolName::GetFactors, "Retrieve factor-exposure context shells for portfolio securities."},
        {ToolName::GetNews, "Retrieve curated macro and stock-specific news chunks, optionally recent only."},
        {ToolName::GraphTraverser, "Walk the supply-chain knowledge graph from named entities and return narrative paths."}};
    json out = json::array();
    for (const auto& [tool, description] : tools) {
      out.push_back({{"type", "function"},
                     {"function",
                      {{"name", to_string(tool)}, {"description", description}, {"parameters", tool_parameters(tool)}}}});
    }
    return out;
  }();
  return registry;
}

void execute_tool(ToolInvocation& inv, const ToolStores& stores) {
  inv.results.clear();
  inv.error.reset();
  try {
    if (auto problems = validate_against_schema(inv.arguments, tool_parameters(inv.tool)); !problems.empty()) {
      throw std::invalid_argument(problems.front());
    }
    const auto& args = inv.arguments;
    const Embedder& embedder = require(stores.embedder, "embedder");
    switch (inv.tool) {
      case ToolName::GetFactors: {
        const auto& index = require(stores.factors, "factor index");
        inv.results = collect(search(index, embedder, args["query"].get<std::string>(), k_argument(args, stores.default_k)));
        break;
      }
      case ToolName::GetNews: {
        const auto& index = require(stores.news, "news index");
        std::optional<Timestamp> since;
        if (args.contains("since")) since = parse_rfc3339(args["since"].get<std::string>());
        const std::string stream = args.value("stream", "");
        ShellFilter filter;
        if (since || !stream.empty()) {
          const ShellFilter recent = since ? recency_filter(*since) : ShellFilter{};
          filter = [recent, stream](const ContextShell& s) {
            if (recent && !recent(s)) return false;
            return stream.empty() || meta(s, "stream") == stream;
          };
        }
        inv.results = collect(search(index, embedder, args["query"].get<std::string>(), k_argument(args, stores.default_k), filter));
        break;
      }
      case ToolName::GraphTraverser: {
        const auto& graph = require(stores.graph, "knowledge graph");
        const auto& table = require(stores.centrality, "centrality table");
        const auto& nodes = require(stores.nodes, "node index");
        TraversalConfig config = stores.traversal;
        if (args.contains("hops")) {
          config.fixed_hops = args["hops"].get<int>();
          config.max_hops = std::max(config.max_hops, *config.fixed_hops);
        }
        if (args.contains("max_paths")) config.max_paths = args["max_paths"].get<std::size_t>();
        const auto mentions = mentions_of(inv);
        const auto seeds = resolve_seeds(mentions, nodes, embedder, graph, config);
        const auto sub = traverse(graph, seeds, table, config);
        const PhraseTable& phrases = stores.phrases ? *stores.phrases : PhraseTable::defaults();
        for (const auto& path : extract_paths(graph, sub, table, config)) {
          ContextShell shell = verbalize_path(path, graph, phrases);
          for (const auto& s : seeds)
            if (s.node == path.nodes.front()) shell.metadata["mention"] = s.mention;
          inv.results.push_back(std::move(shell));
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    inv.results.clear();
    inv.error = e.what();
  }
}

void execute_tools(std::vector<ToolInvocation>& invocations, const ToolStores& stores) {
  for (auto& inv : invocations) execute_tool(inv, stores);
}

std::string join_with_and(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += i + 1 == items.size() ? " and " : ", ";
    out += items[i];
  }
  return out;
}

std::vector<std::string> reference_labels(const ToolInvocation& inv) {
  std::vector<std::string> labels;
  if (inv.error || inv.results.empty()) return labels;
  auto add = [&](std::string label) {
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(std::move(label));
  };
  switch (inv.tool) {
    case ToolName::GraphTraverser: add("Supply-chain paths for " + join_with_and(mentions_of(inv))); break;
    case ToolName::GetNews:
      for (const auto& s : inv.results) add(news_label(s));
      break;
    case ToolName::GetFactors: {
      std::vector<std::string> tickers;
      for (const auto& s : inv.results) {
        auto t = meta(s, "ticker");
        if (!t.empty() && std::find(tickers.begin(), tickers.end(), t) == tickers.end()) tickers.push_back(t);
      }
      add("Factor exposures for " + join_with_and(tickers));
      break;
    }
  }
  return labels;
}

std::string result_summary(const ToolInvocation& inv) {
  if (inv.error) return "Failed: " + *inv.error;
  if (inv.results.empty()) return "Retrieved: nothing";
  switch (inv.tool) {
    case ToolName::GetNews: {
      std::vector<std::pair<std::string, std::vector<std::string>>> groups;
      for (const auto& s : inv.results) {
        const auto label = news_label(s);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == label; });
        if (it == groups.end()) it = groups.insert(groups.end(), {label, {}});
        it->second.push_back(meta(s, "page"));
      }
      std::string out = "Retrieved: ";
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (i) out += "; ";
        out += groups[i].first + (groups[i].second.size() == 1 ? ", page " : ", pages ") + join_with_and(groups[i].second);
      }
      return out;
    }
    case ToolName::GetFactors: return "Retrieved: " + reference_labels(inv).front();
    case ToolName::GraphTraverser:
      return "Retrieved: " + std::to_string(inv.results.size()) +
             (inv.results.size() == 1 ? " supply-chain path for " : " supply-chain paths for ") +
             join_with_and(mentions_of(inv));
  }
  return {};
}

}  // namespace chainsight
