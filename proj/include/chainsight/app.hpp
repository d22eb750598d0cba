#pragma once

// Configuration and the loaded, read-only stores shared by the CLI and the
// HTTP service.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chainsight/agents.hpp"
#include "chainsight/centrality.hpp"
#include "chainsight/kg.hpp"
#include "chainsight/records.hpp"
#include "chainsight/tools.hpp"
#include "chainsight/traversal.hpp"
#include "chainsight/vecstore.hpp"
#include "chainsight/verbalizer.hpp"

namespace chainsight {

enum class BackendMode { Mock, Live };

struct BackendConfig {
  BackendMode mode = BackendMode::Mock;
  /// Scenario file for mock mode.
  std::string scenario;
  std::string model = "gpt-4o";
  /// Chat-completions endpoint, e.g. https://api.openai.com/v1/chat/completions.
  std::string url;
  /// Only ever taken from the environment.
  std::string key;
  int timeout_seconds = 60;
  int max_attempts = 3;
  bool single_call = false;
};

struct AppConfig {
  // Data files; empty means "not loaded". Relative paths in a config file
  // are resolved against the file's directory.
  std::string graph;
  std::string factors;
  std::string factor_definitions;
  std::string news;
  std::string phrases;
  std::string portfolio;

  std::size_t embedding_dimension = HashingEmbedder::kDefaultDimension;
  std::size_t chunk_words = 400;
  std::size_t default_k = 3;
  TraversalConfig traversal;
  BackendConfig backend;

  std::string host = "127.0.0.1";
  int port = 8080;
  /// Directory for per-session logs; empty disables them.
  std::string session_log_dir;

  /// Throws std::invalid_argument when a referenced file is missing, a value
  /// is out of range, or live mode lacks its endpoint variables.
  void validate() const;
};

/// Reads a JSON config document. Unknown keys are rejected.
AppConfig parse_config(const json& document, const std::filesystem::path& base_dir);
AppConfig load_config_file(const std::string& path);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

/// Process environment.
std::optional<std::string> process_env(const char* name);

/// CHAINSIGHT_LLM_URL, CHAINSIGHT_LLM_KEY, CHAINSIGHT_LLM_MODEL,
/// CHAINSIGHT_BACKEND (mock|live), CHAINSIGHT_SCENARIO, CHAINSIGHT_HOST and
/// CHAINSIGHT_PORT override the file values.
void apply_env_overrides(AppConfig& config, const EnvLookup& env = process_env);

/// Applies a {"hub_hops": 1, "ranking": "salience-sum", ...} object onto
/// `config`. Throws std::invalid_argument on unknown keys or bad values.
void apply_traversal_overrides(TraversalConfig& config, const json& overrides);
json to_json(const TraversalConfig& config);

/// Everything loaded from an AppConfig. Not copyable: ToolStores points into it.
class Workspace {
 public:
  static std::unique_ptr<Workspace> load(const AppConfig& config);

  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const AppConfig& config() const noexcept { return config_; }
  const HashingEmbedder& embedder() const noexcept { return embedder_; }
  const PhraseTable& phrases() const noexcept { return phrases_; }

  const KnowledgeGraph* graph() const noexcept { return graph_ ? &*graph_ : nullptr; }
  const CentralityTable* centrality() const noexcept { return graph_ ? &centrality_ : nullptr; }
  const VectorIndex* node_index() const noexcept { return nodes_ ? &*nodes_ : nullptr; }
  const VectorIndex* factor_index() const noexcept { return factors_ ? &*factors_ : nullptr; }
  const VectorIndex* news_index() const noexcept { return news_ ? &*news_ : nullptr; }
  const std::vector<FactorRecord>& factor_records() const noexcept { return factor_records_; }
  const std::optional<Portfolio>& portfolio() const noexcept { return portfolio_; }

  /// Index for "factor", "news" or "graph-node"; null when not loaded.
  const VectorIndex* index(Modality modality) const noexcept;

  ToolStores stores() const;

  /// Graph, or std::runtime_error naming the missing config entry.
  const KnowledgeGraph& require_graph() const;

 private:
  explicit Workspace(AppConfig config);

  AppConfig config_;
  HashingEmbedder embedder_;
  PhraseTable phrases_;
  std::optional<KnowledgeGraph> graph_;
  CentralityTable centrality_;
  std::optional<VectorIndex> nodes_;
  std::optional<VectorIndex> factors_;
  std::optional<VectorIndex> news_;
  std::vector<FactorRecord> factor_records_;
  std::optional<Portfolio> portfolio_;
};

/// Seed resolution, expansion, path extraction and verbalization in one go.
struct TraversalRun {
  std::vector<SeedMatch> seeds;
  Subgraph subgraph;
  std::vector<RiskPath> paths;
  /// One narrative per path, same order.
  std::vector<ContextShell> narratives;
};

TraversalRun run_traversal(const Workspace& workspace, std::span<const std::string> mentions,
                           const TraversalConfig& config);

json to_json(const SeedMatch& seed);
json to_json(const RiskPath& path);
json to_json(const TraversalRun& run);

/// Node record, salience scores and one-hop neighborhood. Throws
/// GraphError(UnknownNode).
json node_view(const Workspace& workspace, std::string_view id);

}  // namespace chainsight
