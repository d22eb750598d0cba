#include "chainsight/app.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "chainsight/text.hpp"

namespace chainsight {

namespace fs = std::filesystem;

namespace {

std::string resolve(const json& value, const fs::path& base) {
  const auto s = value.get<std::string>();
  if (s.empty()) return s;
  const fs::path p(s);
  return (p.is_absolute() ? p : base / p).lexically_normal().string();
}

template <typename T>
T bounded(const json& value, T lo, T hi, const char* what) {
  const auto v = value.get<T>();
  if (v < lo || v > hi) throw std::invalid_argument(std::string(what) + " out of range");
  return v;
}

void require_file(const std::string& path, const char* what) {
  if (!path.empty() && !fs::is_regular_file(path)) {
    throw std::invalid_argument(std::string(what) + " file not found: " + path);
  }
}

}  // namespace

void AppConfig::validate() const {
  require_file(graph, "graph");
  require_file(factors, "factor table");
  require_file(factor_definitions, "factor definitions");
  require_file(news, "news corpus");
  require_file(phrases, "phrase table");
  require_file(portfolio, "portfolio");
  if (!factors.empty() && factor_definitions.empty()) {
    throw std::invalid_argument("a factor table needs factor_definitions");
  }
  if (embedding_dimension == 0) throw std::invalid_argument("embedding_dimension must be positive");
  if (chunk_words == 0) throw std::invalid_argument("chunk_words must be positive");
  if (default_k == 0) throw std::invalid_argument("default_k must be positive");
  traversal.validate();
  if (backend.max_attempts < 1) throw std::invalid_argument("backend max_attempts must be at least 1");
  if (backend.mode == BackendMode::Live) {
    if (backend.url.empty()) throw std::invalid_argument("live backend needs CHAINSIGHT_LLM_URL");
    if (backend.key.empty()) throw std::invalid_argument("live backend needs CHAINSIGHT_LLM_KEY");
  } else {
    require_file(backend.scenario, "scenario");
  }
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
}

json to_json(const TraversalConfig& c) {
  return {{"threshold_mode", to_string(c.threshold_mode)},
          {"threshold_quantile", c.threshold_quantile},
          {"threshold_absolute", c.threshold_absolute},
          {"hub_hops", c.hub_hops},
          {"peripheral_hops", c.peripheral_hops},
          {"max_hops", c.max_hops},
          {"fixed_hops", c.fixed_hops ? json(*c.fixed_hops) : json(nullptr)},
          {"max_paths", c.max_paths},
          {"ranking", to_string(c.ranking)},
          {"similarity_floor", c.similarity_floor},
          {"seeds_per_mention", c.seeds_per_mention}};
}

void apply_traversal_overrides(TraversalConfig& c, const json& overrides) {
  if (!overrides.is_object()) throw std::invalid_argument("traversal settings must be an object");
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "threshold_mode") {
        const auto m = parse_threshold_mode(value.get<std::string>());
        if (!m) throw std::invalid_argument("unknown threshold_mode");
        c.threshold_mode = *m;
      } else if (key == "threshold_quantile") {
        c.threshold_quantile = value.get<double>();
      } else if (key == "threshold_absolute") {
        c.threshold_absolute = value.get<double>();
      } else if (key == "hub_hops") {
        c.hub_hops = bounded(value, 1, 16, "hub_hops");
      } else if (key == "peripheral_hops") {
        c.peripheral_hops = bounded(value, 1, 16, "peripheral_hops");
      } else if (key == "max_hops") {
        c.max_hops = bounded(value, 1, 16, "max_hops");
      } else if (key == "fixed_hops") {
        if (value.is_null()) c.fixed_hops.reset();
        else c.fixed_hops = bounded(value, 1, 16, "fixed_hops");
      } else if (key == "max_paths") {
        c.max_paths = bounded<std::size_t>(value, 0, 100000, "max_paths");
      } else if (key == "ranking") {
        const auto r = parse_path_ranking(value.get<std::string>());
        if (!r) throw std::invalid_argument("unknown ranking");
        c.ranking = *r;
      } else if (key == "similarity_floor") {
        c.similarity_floor = value.get<double>();
      } else if (key == "seeds_per_mention") {
        c.seeds_per_mention = bounded<std::size_t>(value, 1, 100, "seeds_per_mention");
      } else {
        throw std::invalid_argument("unknown traversal setting '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("traversal settings: ") + e.what());
  }
  c.validate();
}

AppConfig parse_config(const json& doc, const fs::path& base) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  AppConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "graph") c.graph = resolve(value, base);
      else if (key == "factors") c.factors = resolve(value, base);
      else if (key == "factor_definitions") c.factor_definitions = resolve(value, base);
      else if (key == "news") c.news = resolve(value, base);
      else if (key == "phrases") c.phrases = resolve(value, base);
      else if (key == "portfolio") c.portfolio = resolve(value, base);
      else if (key == "session_log_dir") c.session_log_dir = resolve(value, base);
      else if (key == "embedding_dimension") c.embedding_dimension = bounded<std::size_t>(value, 1, 1u << 20, key.c_str());
      else if (key == "chunk_words") c.chunk_words = bounded<std::size_t>(value, 1, 100000, key.c_str());
      else if (key == "default_k") c.default_k = bounded<std::size_t>(value, 1, 1000, key.c_str());
      else if (key == "traversal") apply_traversal_overrides(c.traversal, value);
      else if (key == "backend") {
        records::require_known_fields(value, {"mode", "scenario", "model", "url", "timeout_seconds", "max_attempts", "single_call"},
                                      "backend");
        if (value.contains("mode")) {
          const auto mode = value["mode"].get<std::string>();
          if (mode != "mock" && mode != "live") throw std::invalid_argument("backend mode must be mock or live");
          c.backend.mode = mode == "live" ? BackendMode::Live : BackendMode::Mock;
        }
        if (value.contains("scenario")) c.backend.scenario = resolve(value["scenario"], base);
        if (value.contains("model")) c.backend.model = value["model"].get<std::string>();
        if (value.contains("url")) c.backend.url = value["url"].get<std::string>();
        if (value.contains("timeout_seconds")) c.backend.timeout_seconds = bounded(value["timeout_seconds"], 1, 3600, "timeout_seconds");
        if (value.contains("max_attempts")) c.backend.max_attempts = bounded(value["max_attempts"], 1, 10, "max_attempts");
        if (value.contains("single_call")) c.backend.single_call = value["single_call"].get<bool>();
      } else if (key == "service") {
        records::require_known_fields(value, {"host", "port"}, "service");
        if (value.contains("host")) c.host = value["host"].get<std::string>();
        if (value.contains("port")) c.port = bounded(value["port"], 0, 65535, "port");
      } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  } catch (const GraphError& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

AppConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return parse_config(doc, fs::absolute(path).parent_path());
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

void apply_env_overrides(AppConfig& c, const EnvLookup& env) {
  if (auto v = env("CHAINSIGHT_LLM_URL")) c.backend.url = *v;
  if (auto v = env("CHAINSIGHT_LLM_KEY")) c.backend.key = *v;
  if (auto v = env("CHAINSIGHT_LLM_MODEL")) c.backend.model = *v;
  if (auto v = env("CHAINSIGHT_SCENARIO")) c.backend.scenario = *v;
  if (auto v = env("CHAINSIGHT_BACKEND")) {
    if (*v != "mock" && *v != "live") throw std::invalid_argument("CHAINSIGHT_BACKEND must be mock or live");
    c.backend.mode = *v == "live" ? BackendMode::Live : BackendMode::Mock;
  }
  if (auto v = env("CHAINSIGHT_HOST")) c.host = *v;
  if (auto v = env("CHAINSIGHT_PORT")) c.port = static_cast<int>(text::parse_number(*v, "CHAINSIGHT_PORT"));
}

// ---- workspace -------------------------------------------------------------------

Workspace::Workspace(AppConfig config)
    : config_(std::move(config)), embedder_(config_.embedding_dimension), phrases_(PhraseTable::defaults()) {}

std::unique_ptr<Workspace> Workspace::load(const AppConfig& config) {
  config.validate();
  std::unique_ptr<Workspace> ws(new Workspace(config));
  if (!config.phrases.empty()) {
    std::ifstream in(config.phrases);
    ws->phrases_.load_overrides(in);
  }
  if (!config.graph.empty()) {
    ws->graph_ = load_graph_file(config.graph);
    ws->centrality_ = salience(*ws->graph_);
    const auto shells = render_node_shells(*ws->graph_);
    ws->nodes_ = build_index(shells, ws->embedder_, Modality::GraphNode);
  }
  if (!config.factors.empty()) {
    const auto catalog = load_factor_definitions_file(config.factor_definitions);
    ws->factor_records_ = load_factor_table_file(config.factors, catalog);
    std::vector<ContextShell> shells;
    for (const auto& r : ws->factor_records_) shells.push_back(render_factor_shell(r));
    ws->factors_ = build_index(shells, ws->embedder_, Modality::Factor);
  }
  if (!config.news.empty()) {
    std::vector<ContextShell> shells;
    for (const auto& doc : load_news_corpus_file(config.news)) {
      for (auto& s : chunk_news(doc, {config.chunk_words})) shells.push_back(std::move(s));
    }
    ws->news_ = build_index(shells, ws->embedder_, Modality::News);
  }
  if (!config.portfolio.empty()) ws->portfolio_ = load_portfolio_file(config.portfolio);
  return ws;
}

const VectorIndex* Workspace::index(Modality modality) const noexcept {
  switch (modality) {
    case Modality::Factor: return factor_index();
    case Modality::News: return news_index();
    case Modality::GraphNode: return node_index();
    case Modality::GraphPath: return nullptr;
  }
  return nullptr;
}

ToolStores Workspace::stores() const {
  ToolStores s;
  s.embedder = &embedder_;
  s.factors = factor_index();
  s.news = news_index();
  s.nodes = node_index();
  s.graph = graph();
  s.centrality = centrality();
  s.phrases = &phrases_;
  s.traversal = config_.traversal;
  s.default_k = config_.default_k;
  return s;
}

const KnowledgeGraph& Workspace::require_graph() const {
  if (!graph_) throw std::runtime_error("no graph loaded (set \"graph\" in the config)");
  return *graph_;
}

}  // namespace chainsight

namespace chainsight {

TraversalRun run_traversal(const Workspace& ws, std::span<const std::string> mentions, const TraversalConfig& config) {
  config.validate();
  const auto& graph = ws.require_graph();
  TraversalRun run;
  run.seeds = resolve_seeds(mentions, *ws.node_index(), ws.embedder(), graph, config);
  run.subgraph = traverse(graph, run.seeds, *ws.centrality(), config);
  run.paths = extract_paths(graph, run.subgraph, *ws.centrality(), config);
  for (const auto& p : run.paths) run.narratives.push_back(verbalize_path(p, graph, ws.phrases()));
  return run;
}

json to_json(const SeedMatch& s) { return {{"mention", s.mention}, {"node", s.node}, {"similarity", s.similarity}}; }

json to_json(const RiskPath& path) {
  json steps = json::array();
  for (const auto& step : path.steps) {
    json s{{"kind", to_string(step.kind)}, {"orientation", to_string(step.orientation)}};
    if (step.weight_percent) s["weight_percent"] = *step.weight_percent;
    steps.push_back(std::move(s));
  }
  return {{"nodes", path.nodes}, {"edges", std::move(steps)}, {"score", path.score}};
}

json to_json(const TraversalRun& run) {
  json seeds = json::array();
  for (const auto& s : run.seeds) seeds.push_back(to_json(s));
  json hops = json::object();
  for (const auto& [id, h] : run.subgraph.hops) hops[id] = h;
  json paths = json::array();
  for (std::size_t i = 0; i < run.paths.size(); ++i) {
    json p = to_json(run.paths[i]);
    p["text"] = run.narratives[i].text;
    paths.push_back(std::move(p));
  }
  return {{"seeds", std::move(seeds)}, {"hops", std::move(hops)}, {"paths", std::move(paths)}};
}

json node_view(const Workspace& ws, std::string_view id) {
  const auto& graph = ws.require_graph();
  const Node* node = graph.find(id);
  if (!node) throw GraphError(GraphError::Kind::UnknownNode, "unknown node '" + std::string(id) + "'");
  const auto& c = ws.centrality()->at(id);
  json neighbors = json::array();
  for (const auto& n : chainsight::neighbors(graph, id, Direction::Both)) {
    neighbors.push_back({{"edge", records::to_json(*n.edge)},
                         {"orientation", to_string(n.orientation)},
                         {"node", records::to_json(*n.node)}});
  }
  return {{"node", records::to_json(*node)},
          {"centrality",
           {{"degree", c.degree}, {"closeness", c.closeness}, {"betweenness", c.betweenness}, {"salience", c.salience}}},
          {"shell", render_node_shell(*node, graph).text},
          {"neighbors", std::move(neighbors)}};
}

}  // namespace chainsight
