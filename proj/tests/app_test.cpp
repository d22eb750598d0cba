#include <gtest/gtest.h>

#include <map>

#include "chainsight/app.hpp"
#include "workspace.hpp"

using namespace chainsight;
using chainsight::testing::coltan_workspace;
using chainsight::testing::data_path;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST(Config, BundledFileResolvesRelativePaths) {
  const auto c = load_config_file(data_path("coltan/config.json"));
  EXPECT_TRUE(std::filesystem::is_regular_file(c.graph));
  EXPECT_TRUE(std::filesystem::is_regular_file(c.portfolio));
  EXPECT_TRUE(std::filesystem::is_regular_file(c.backend.scenario));
  EXPECT_DOUBLE_EQ(c.traversal.threshold_quantile, 0.9);
  EXPECT_EQ(c.traversal.peripheral_hops, 3);
  EXPECT_EQ(c.traversal.max_paths, 20u);
  EXPECT_EQ(c.backend.mode, BackendMode::Mock);
  EXPECT_EQ(c.port, 8080);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config({{"grpah", "g.jsonl"}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config({{"backend", {{"key", "sk-123"}}}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config({{"backend", {{"mode", "remote"}}}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config({{"traversal", {{"hub_hops", 0}}}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config({{"traversal", {{"ranking", "random"}}}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config({{"service", {{"port", 70000}}}}, "/tmp"), std::invalid_argument);
  EXPECT_THROW(parse_config(json::array(), "/tmp"), std::invalid_argument);
}

TEST(Config, MissingFilesFailValidation) {
  auto c = parse_config({{"graph", "nope.jsonl"}}, "/tmp");
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = parse_config({{"factors", data_path("factors.csv")}}, "/tmp");
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, EnvironmentOverridesFile) {
  auto c = load_config_file(data_path("coltan/config.json"));
  apply_env_overrides(c, env_of({{"CHAINSIGHT_BACKEND", "live"},
                                 {"CHAINSIGHT_LLM_URL", "http://127.0.0.1:9/v1/chat/completions"},
                                 {"CHAINSIGHT_LLM_MODEL", "local-model"},
                                 {"CHAINSIGHT_PORT", "9090"}}));
  EXPECT_EQ(c.backend.mode, BackendMode::Live);
  EXPECT_EQ(c.backend.model, "local-model");
  EXPECT_EQ(c.port, 9090);
  EXPECT_THROW(c.validate(), std::invalid_argument);  // no key yet
  apply_env_overrides(c, env_of({{"CHAINSIGHT_LLM_KEY", "sk-test"}}));
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(apply_env_overrides(c, env_of({{"CHAINSIGHT_BACKEND", "cloud"}})), std::invalid_argument);
  EXPECT_THROW(apply_env_overrides(c, env_of({{"CHAINSIGHT_PORT", "eighty"}})), std::invalid_argument);
}

TEST(Config, TraversalOverridesRoundTrip) {
  TraversalConfig t;
  apply_traversal_overrides(t, {{"hub_hops", 2}, {"ranking", "salience-sum"}, {"fixed_hops", 4}});
  EXPECT_EQ(t.hub_hops, 2);
  ASSERT_TRUE(t.fixed_hops);
  EXPECT_EQ(*t.fixed_hops, 4);
  TraversalConfig back;
  apply_traversal_overrides(back, to_json(t));
  EXPECT_EQ(to_json(back), to_json(t));
  EXPECT_THROW(apply_traversal_overrides(t, {{"hops", 2}}), std::invalid_argument);
}

TEST(Workspace, LoadsEveryStore) {
  const auto& ws = coltan_workspace();
  ASSERT_NE(ws.graph(), nullptr);
  EXPECT_EQ(ws.graph()->node_count(), 33u);
  EXPECT_EQ(ws.node_index()->size(), 33u);
  EXPECT_EQ(ws.factor_index()->size(), 50u);
  EXPECT_GT(ws.news_index()->size(), 5u);
  ASSERT_TRUE(ws.portfolio());
  EXPECT_EQ(ws.portfolio()->positions.size(), 50u);
  EXPECT_EQ(ws.index(Modality::News), ws.news_index());
  EXPECT_EQ(ws.index(Modality::GraphPath), nullptr);
}

TEST(Workspace, MissingGraphIsNamed) {
  AppConfig c;
  c.backend.scenario = data_path("coltan/scenario.jsonl");
  const auto ws = Workspace::load(c);
  EXPECT_EQ(ws->graph(), nullptr);
  EXPECT_THROW(ws->require_graph(), std::runtime_error);
  EXPECT_EQ(ws->stores().graph, nullptr);
}

TEST(NodeView, CompanyNeighborsAreProducts) {
  const auto v = node_view(coltan_workspace(), "apple");
  EXPECT_EQ(v["node"]["kind"], "Company");
  ASSERT_FALSE(v["neighbors"].empty());
  for (const auto& n : v["neighbors"]) EXPECT_EQ(n["node"]["kind"], "Product") << n.dump();
  EXPECT_GE(v["centrality"]["salience"].get<double>(), 0.0);
  EXPECT_LE(v["centrality"]["salience"].get<double>(), 1.0);
  EXPECT_THROW(node_view(coltan_workspace(), "atlantis"), GraphError);
}

TEST(RunTraversal, JsonCarriesPathsAndNarratives) {
  const std::vector<std::string> mentions{"coltan"};
  const auto run = run_traversal(coltan_workspace(), mentions, coltan_workspace().config().traversal);
  ASSERT_EQ(run.paths.size(), run.narratives.size());
  const auto j = to_json(run);
  ASSERT_EQ(j["paths"].size(), run.paths.size());
  EXPECT_EQ(j["seeds"][0]["node"], "coltan");
  for (std::size_t i = 0; i < run.paths.size(); ++i) {
    EXPECT_EQ(j["paths"][i]["text"], run.narratives[i].text);
    EXPECT_EQ(j["paths"][i]["nodes"].size(), j["paths"][i]["edges"].size() + 1);
  }
}
