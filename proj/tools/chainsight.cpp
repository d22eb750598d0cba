// chainsight command-line interface.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "chainsight/agents.hpp"
#include "chainsight/app.hpp"
#include "chainsight/llm_client.hpp"
#include "chainsight/service.hpp"
#include "chainsight/text.hpp"

using namespace chainsight;

namespace {

struct Options {
  std::string config;
  std::string graph, factors, factor_definitions, news, phrases, portfolio, scenario;
  std::optional<std::size_t> dimension;
};

AppConfig resolve_config(const Options& o) {
  AppConfig c = o.config.empty() ? AppConfig{} : load_config_file(o.config);
  if (!o.graph.empty()) c.graph = o.graph;
  if (!o.factors.empty()) c.factors = o.factors;
  if (!o.factor_definitions.empty()) c.factor_definitions = o.factor_definitions;
  if (!o.news.empty()) c.news = o.news;
  if (!o.phrases.empty()) c.phrases = o.phrases;
  if (!o.portfolio.empty()) c.portfolio = o.portfolio;
  if (o.dimension) c.embedding_dimension = *o.dimension;
  apply_env_overrides(c);
  if (!o.scenario.empty()) c.backend.scenario = o.scenario;
  return c;
}

std::string meta_or(const ContextShell& s, const std::string& key, const std::string& fallback = "") {
  auto it = s.metadata.find(key);
  return it == s.metadata.end() ? fallback : it->second;
}

std::string hit_label(const ContextShell& s) {
  switch (s.source) {
    case Modality::Factor: return meta_or(s, "ticker") + " " + meta_or(s, "security");
    case Modality::News: return meta_or(s, "title", "News article") + ", page " + meta_or(s, "page") + " (" + meta_or(s, "timestamp") + ")";
    case Modality::GraphNode: return meta_or(s, "node_id");
    case Modality::GraphPath: return "path";
  }
  return {};
}

// ---- subcommands -------------------------------------------------------------

int run_ingest(const Options& o, const std::string& out_graph) {
  const AppConfig c = resolve_config(o);
  int violations = 0;
  if (!c.graph.empty()) {
    std::ifstream in(c.graph);
    if (!in) throw std::runtime_error("cannot open graph '" + c.graph + "'");
    const auto graph = parse_graph(in);
    const auto report = validate(graph);
    std::cout << "graph " << c.graph << ": " << graph.node_count() << " nodes, " << graph.edge_count() << " edges, "
              << report.size() << " violations\n";
    for (const auto& issue : report) std::cout << "  " << issue.subject << ": " << issue.message << '\n';
    violations += static_cast<int>(report.size());
    if (!out_graph.empty() && report.empty()) {
      std::ofstream out(out_graph);
      write_graph(out, graph);
    }
  }
  if (!c.factors.empty()) {
    const auto catalog = load_factor_definitions_file(c.factor_definitions);
    const auto rows = load_factor_table_file(c.factors, catalog);
    std::size_t bad = 0;
    for (const auto& r : rows) {
      try {
        render_factor_shell(r);
      } catch (const std::exception& e) {
        ++bad;
        std::cout << "  " << r.ticker << ": " << e.what() << '\n';
      }
    }
    std::cout << "factors " << c.factors << ": " << rows.size() << " securities, " << catalog.size()
              << " factor definitions, " << bad << " violations\n";
    violations += static_cast<int>(bad);
  }
  if (!c.news.empty()) {
    const auto docs = load_news_corpus_file(c.news);
    std::size_t chunks = 0;
    for (const auto& d : docs) chunks += chunk_news(d, {c.chunk_words}).size();
    std::cout << "news " << c.news << ": " << docs.size() << " documents, " << chunks << " chunks\n";
  }
  if (!c.portfolio.empty()) {
    try {
      const auto p = load_portfolio_file(c.portfolio);
      std::cout << "portfolio " << c.portfolio << ": " << p.positions.size() << " positions\n";
    } catch (const std::invalid_argument& e) {
      std::cout << "portfolio " << c.portfolio << ": " << e.what() << '\n';
      ++violations;
    }
  }
  if (!c.backend.scenario.empty()) {
    const auto s = ScenarioBackend::from_file(c.backend.scenario);
    std::cout << "scenario " << c.backend.scenario << ": " << s.size() << " (turn, phase) entries\n";
  }
  return violations == 0 ? 0 : 1;
}

int run_centrality(const Options& o, const std::string& out_path) {
  AppConfig c = resolve_config(o);
  if (c.graph.empty()) throw std::runtime_error("centrality needs a graph (--graph or config)");
  const auto graph = load_graph_file(c.graph);
  const auto table = salience(graph);
  if (out_path.empty() || out_path == "-") {
    write_centrality_table(std::cout, table);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_centrality_table(out, table);
  }
  return 0;
}

int run_traverse(const Options& o, const std::vector<std::string>& seeds, std::optional<int> hops,
                 std::optional<std::size_t> max_paths, const std::string& ranking, bool jsonl) {
  AppConfig c = resolve_config(o);
  c.factors.clear();
  c.news.clear();
  c.portfolio.clear();
  c.backend.scenario.clear();
  auto ws = Workspace::load(c);
  TraversalConfig config = c.traversal;
  json overrides = json::object();
  if (hops) overrides["fixed_hops"] = *hops;
  if (hops && *hops > config.max_hops) overrides["max_hops"] = *hops;
  if (max_paths) overrides["max_paths"] = *max_paths;
  if (!ranking.empty()) overrides["ranking"] = ranking;
  apply_traversal_overrides(config, overrides);
  const auto run = run_traversal(*ws, seeds, config);
  const auto& graph = ws->require_graph();
  if (jsonl) {
    write_subgraph(std::cout, graph, run.subgraph);
    write_paths(std::cout, run.paths);
    return 0;
  }
  for (const auto& s : run.seeds) {
    std::cout << "seed: " << s.mention << " -> " << s.node << " (" << graph.at(s.node).name
              << ", similarity " << text::format_significant(s.similarity, 4) << ")\n";
  }
  for (const auto& s : run.subgraph.seeds) std::cout << "budget: " << s.node << " " << s.budget << " hops\n";
  std::cout << "subgraph: " << run.subgraph.hops.size() << " nodes, " << run.subgraph.edges.size() << " edges\n";
  for (std::size_t i = 0; i < run.paths.size(); ++i) {
    std::cout << i + 1 << ". [" << text::format_significant(run.paths[i].score, 6) << "] " << run.narratives[i].text << '\n';
  }
  return 0;
}

int run_verbalize(const Options& o, const std::string& path_file) {
  AppConfig c = resolve_config(o);
  if (c.graph.empty()) throw std::runtime_error("verbalize needs a graph (--graph or config)");
  const auto graph = load_graph_file(c.graph);
  PhraseTable phrases = PhraseTable::defaults();
  if (!c.phrases.empty()) {
    std::ifstream in(c.phrases);
    phrases.load_overrides(in);
  }
  std::vector<RiskPath> paths;
  if (path_file == "-") {
    paths = read_paths(std::cin);
  } else {
    std::ifstream in(path_file);
    if (!in) throw std::runtime_error("cannot open paths '" + path_file + "'");
    paths = read_paths(in);
  }
  for (const auto& p : paths) std::cout << verbalize_path(p, graph, phrases).text << '\n';
  return 0;
}

int run_search(const Options& o, const std::string& modality_name, const std::string& query, std::size_t k,
               const std::string& since, bool show_text) {
  AppConfig c = resolve_config(o);
  const auto modality = parse_modality(modality_name == "node" ? "graph-node" : modality_name);
  if (!modality || *modality == Modality::GraphPath) {
    throw CLI::ValidationError("--modality", "must be factor, news or node");
  }
  if (*modality != Modality::Factor) c.factors.clear();
  if (*modality != Modality::News) c.news.clear();
  if (*modality != Modality::GraphNode) c.graph.clear();
  c.portfolio.clear();
  c.backend.scenario.clear();
  auto ws = Workspace::load(c);
  const VectorIndex* index = ws->index(*modality);
  if (!index) throw std::runtime_error("no " + modality_name + " data configured");
  ShellFilter filter;
  if (!since.empty()) filter = recency_filter(parse_rfc3339(since));
  const auto hits = search(*index, ws->embedder(), query, k, filter);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    std::cout << i + 1 << '\t' << std::fixed << std::setprecision(6) << hits[i].score << std::defaultfloat << '\t'
              << hit_label(*hits[i].shell) << '\n';
    if (show_text) std::cout << hits[i].shell->text << "\n\n";
  }
  return 0;
}

void print_event(std::ostream& out, const AgentEvent& e) {
  if (e.name == "triage") {
    out << "[triage] " << e.data.value("decision", "") << '\n';
  } else if (e.name == "tool_call") {
    out << "Tool called: " << e.data.value("tool", "") << '\n';
    const json& args = e.data["arguments"];
    if (args.contains("query")) out << "Query embedding: \"" << args["query"].get<std::string>() << "\"\n";
    if (args.contains("mentions")) {
      out << "Mentions: " << join_with_and(args["mentions"].get<std::vector<std::string>>()) << '\n';
    }
  } else if (e.name == "tool_result") {
    out << e.data.value("summary", "") << '\n';
  } else if (e.name == "answer") {
    out << "System: " << e.data.value("text", "") << '\n';
  } else if (e.name == "references") {
    const auto refs = e.data["references"].get<std::vector<std::string>>();
    if (!refs.empty()) {
      out << "Reference: ";
      for (std::size_t i = 0; i < refs.size(); ++i) out << (i ? "; " : "") << refs[i];
      out << ".\n";
    }
  }
}

int run_chat(const Options& o, const std::string& log_path, bool trace) {
  AppConfig c = resolve_config(o);
  auto ws = Workspace::load(c);
  if (!ws->portfolio()) throw std::runtime_error("chat needs a portfolio (--portfolio or config)");
  auto backend = make_backend(c.backend);
  Orchestrator orchestrator(*backend, ws->stores(), {c.backend.max_attempts, c.backend.single_call});
  Session session = orchestrator.start_session("cli", *ws->portfolio());
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write '" + log_path + "'");
    write_session_header(log, session);
  }
  std::string line;
  while (true) {
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    const auto message = text::trim(line);
    if (message.empty()) continue;
    if (message == "/quit" || message == "/exit") break;
    if (!trace) std::cout << "User: " << message << '\n';
    try {
      const auto& turn = orchestrator.handle(session, message, [&](const AgentEvent& e) {
        if (trace || e.name == "answer" || e.name == "references" || e.name == "tool_call" || e.name == "tool_result")
          print_event(std::cout, e);
      });
      if (log) {
        append_turn(log, turn);
        log.flush();
      }
    } catch (const BackendUnavailable& e) {
      std::cout << "error: " << e.what() << '\n';
    } catch (const ToolCallRejected& e) {
      std::cout << "error: " << e.what() << '\n';
      for (const auto& p : e.problems()) std::cout << "  " << p << '\n';
    }
  }
  std::cout << '\n';
  return 0;
}

ChatService* g_service = nullptr;

int run_serve(const Options& o, const std::string& host, std::optional<int> port) {
  AppConfig c = resolve_config(o);
  if (!host.empty()) c.host = host;
  if (port) c.port = *port;
  auto ws = Workspace::load(c);
  auto backend = make_backend(c.backend);
  ChatService service(*ws, *backend, {c.backend.max_attempts, c.backend.single_call});
  const int bound = service.bind(c.host, c.port);
  if (bound < 0) throw std::runtime_error("cannot bind " + c.host + ":" + std::to_string(c.port));
  std::cout << "listening on http://" << c.host << ":" << bound << std::endl;
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  service.serve();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chainsight: supply-chain risk retrieval over a knowledge graph, factors and news"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--graph", o.graph, "Graph document (overrides config)")->check(CLI::ExistingFile);
  app.add_option("--factors", o.factors, "Factor table (overrides config)")->check(CLI::ExistingFile);
  app.add_option("--factor-definitions", o.factor_definitions, "Factor definitions")->check(CLI::ExistingFile);
  app.add_option("--news", o.news, "News corpus (overrides config)")->check(CLI::ExistingFile);
  app.add_option("--phrases", o.phrases, "Phrase-table overrides")->check(CLI::ExistingFile);
  app.add_option("--portfolio", o.portfolio, "Portfolio table")->check(CLI::ExistingFile);
  app.add_option("--dimension", o.dimension, "Embedding dimension")->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "Validate data files and print the report");
  std::string out_graph;
  ingest->add_option("--out-graph", out_graph, "Write the normalized graph here when valid");

  auto* centrality = app.add_subcommand("centrality", "Write the centrality table");
  std::string centrality_out;
  centrality->add_option("-o,--out", centrality_out, "Output file (default stdout)");

  auto* traverse_cmd = app.add_subcommand("traverse", "Expand around seeds and print ranked paths");
  std::vector<std::string> seeds;
  std::optional<int> hops;
  std::optional<std::size_t> max_paths;
  std::string ranking;
  bool jsonl = false;
  traverse_cmd->add_option("--seed", seeds, "Entity mention (repeatable)")->required();
  traverse_cmd->add_option("--hops", hops, "Fixed hop budget for every seed")->check(CLI::Range(1, 16));
  traverse_cmd->add_option("--max-paths", max_paths, "Keep this many paths (0 keeps all)");
  traverse_cmd->add_option("--ranking", ranking, "weight-product or salience-sum")
      ->check(CLI::IsMember({"weight-product", "salience-sum"}));
  traverse_cmd->add_flag("--jsonl", jsonl, "Print subgraph and path records instead of narratives");

  auto* verbalize_cmd = app.add_subcommand("verbalize", "Print narratives for path records");
  std::string path_file;
  verbalize_cmd->add_option("--path", path_file, "Path records file, or - for stdin")->required();

  auto* search_cmd = app.add_subcommand("search", "Search one modality index");
  std::string modality, query, since;
  std::size_t k = 3;
  bool show_text = false;
  search_cmd->add_option("--modality", modality, "factor, news or node")
      ->required()
      ->check(CLI::IsMember({"factor", "news", "node"}));
  search_cmd->add_option("--query", query, "Query text")->required();
  search_cmd->add_option("-k", k, "Number of hits")->check(CLI::PositiveNumber);
  search_cmd->add_option("--since", since, "Keep shells stamped at or after this RFC 3339 time");
  search_cmd->add_flag("--text", show_text, "Print shell text under each hit");

  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat over the agent loop");
  std::string log_path;
  bool trace = false;
  chat_cmd->add_option("--scenario", o.scenario, "Scenario file for the mock backend")->check(CLI::ExistingFile);
  chat_cmd->add_option("--log", log_path, "Write the session log here");
  chat_cmd->add_flag("--trace", trace, "Print every agent event");

  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
  std::string host;
  std::optional<int> port;
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--scenario", o.scenario, "Scenario file for the mock backend")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return run_ingest(o, out_graph);
    if (*centrality) return run_centrality(o, centrality_out);
    if (*traverse_cmd) return run_traverse(o, seeds, hops, max_paths, ranking, jsonl);
    if (*verbalize_cmd) return run_verbalize(o, path_file);
    if (*search_cmd) return run_search(o, modality, query, k, since, show_text);
    if (*chat_cmd) return run_chat(o, log_path, trace);
    if (*serve_cmd) return run_serve(o, host, port);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
