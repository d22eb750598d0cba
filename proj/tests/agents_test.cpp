#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "chainsight/agents.hpp"
#include "workspace.hpp"

using namespace chainsight;
using namespace chainsight::testing;

namespace {

Portfolio small_portfolio() {
  return Portfolio{{{"Apple Inc.", "AAPL", 60.0}, {"Tesla, Inc.", "TSLA", 40.0}}};
}

struct Run {
  Session session;
  std::vector<AgentEvent> events;
};

Run run_coltan(OrchestratorOptions options = {}) {
  auto backend = coltan_scenario();
  Orchestrator orch(backend, coltan_workspace().stores(), options);
  Run r{orch.start_session("t", *coltan_workspace().portfolio()), {}};
  for (const char* m : kColtanMessages) orch.handle(r.session, m, [&](const AgentEvent& e) { r.events.push_back(e); });
  return r;
}

std::vector<std::string> tools_called(const AgentTurn& t) {
  std::vector<std::string> out;
  for (const auto& inv : t.invocations) out.emplace_back(to_string(inv.tool));
  return out;
}

std::string step(int turn, const char* phase, const char* action, const json& payload) {
  return json{{"turn", turn}, {"phase", phase}, {"action", action}, {"payload", payload}}.dump() + "\n";
}

}  // namespace

// ---- portfolio ---------------------------------------------------------------------

TEST(Portfolio, BundledTableSumsToHundred) {
  const auto p = load_portfolio_file(data_path("portfolio_top50.csv"));
  EXPECT_EQ(p.positions.size(), 50u);
  EXPECT_EQ(p.positions[0].ticker, "AAPL");
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(portfolio_from_json(to_json(p)), p);
}

TEST(Portfolio, RejectsBadTables) {
  EXPECT_THROW((Portfolio{{{"A", "A", 50}, {"B", "B", 49}}}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((Portfolio{{{"A", "A", 50}, {"B", "B", 49.995}}}.validate()));
  EXPECT_THROW((Portfolio{{{"A", "A", 50}, {"B", "A", 50}}}.validate()), std::invalid_argument);
  EXPECT_THROW((Portfolio{{{"A", "A", 120}, {"B", "B", -20}}}.validate()), std::invalid_argument);
  std::istringstream header("Name,Ticker,Weight\nA,A,100\n");
  EXPECT_THROW(load_portfolio(header), std::invalid_argument);
  std::istringstream weight("Security Name,Ticker,Weight\nA,A,lots\n");
  EXPECT_THROW(load_portfolio(weight), std::invalid_argument);
  std::istringstream quoted("Security Name,Ticker,Weight\n\"Tesla, Inc.\",TSLA,100\n");
  EXPECT_EQ(load_portfolio(quoted).positions[0].security_name, "Tesla, Inc.");
}

TEST(Portfolio, DigestListsEveryPosition) {
  const auto d = small_portfolio().digest();
  EXPECT_EQ(d,
            "Portfolio under review (2 positions, weights in percent of total):\n"
            "- Apple Inc. (AAPL): 60%\n"
            "- Tesla, Inc. (TSLA): 40%");
}

// ---- references --------------------------------------------------------------------

TEST(SplitReferences, TrailingLinesOnly) {
  auto [body, refs] = split_references("Answer text.\n\nReference: Supply-chain paths for coltan.");
  EXPECT_EQ(body, "Answer text.");
  EXPECT_EQ(refs, (std::vector<std::string>{"Supply-chain paths for coltan"}));

  std::tie(body, refs) = split_references("Line one.\nReferences: A; B.\n");
  EXPECT_EQ(body, "Line one.");
  EXPECT_EQ(refs, (std::vector<std::string>{"A", "B"}));

  std::tie(body, refs) = split_references("Reference: early.\nThen more text.");
  EXPECT_EQ(body, "Reference: early.\nThen more text.");
  EXPECT_TRUE(refs.empty());
}

// ---- scenario backend --------------------------------------------------------------

TEST(Scenario, AttemptIndexesSteps) {
  auto b = scenario_from(step(1, "triage", "fail", "down") + step(1, "triage", "reply", "augment"));
  CompletionRequest r;
  EXPECT_THROW(b.complete(r), BackendError);
  r.attempt = 1;
  EXPECT_EQ(b.complete(r).text, "augment");
  r.attempt = 7;
  EXPECT_EQ(b.complete(r).text, "augment");
  r.phase = Phase::Synthesize;
  EXPECT_THROW(b.complete(r), BackendError);
}

TEST(Scenario, RejectsMalformedRecords) {
  EXPECT_THROW(scenario_from(step(1, "dance", "reply", "x")), std::invalid_argument);
  EXPECT_THROW(scenario_from(step(1, "triage", "shout", "x")), std::invalid_argument);
  EXPECT_THROW(scenario_from("{\"turn\":1}\n"), std::invalid_argument);
  EXPECT_THROW(scenario_from("not json\n"), std::invalid_argument);
  EXPECT_EQ(coltan_scenario().size(), 7u);
}

// ---- the coltan dialogue -----------------------------------------------------------

TEST(Dialogue, ColtanThreeTurns) {
  const auto r = run_coltan();
  const auto& turns = r.session.turns;
  ASSERT_EQ(turns.size(), 3u);

  EXPECT_EQ(turns[0].decision, TriageDecision::Augment);
  EXPECT_EQ(tools_called(turns[0]), (std::vector<std::string>{"graph_traverser"}));
  EXPECT_EQ(turns[0].invocations[0].arguments, (json{{"mentions", {"coltan"}}}));
  EXPECT_EQ(turns[0].references, (std::vector<std::string>{"Supply-chain paths for coltan"}));
  EXPECT_NE(turns[0].response.find("Apple and Tesla rely on both minerals"), std::string::npos);

  EXPECT_EQ(turns[1].decision, TriageDecision::Augment);
  EXPECT_EQ(tools_called(turns[1]), (std::vector<std::string>{"get_news"}));
  EXPECT_EQ(turns[1].invocations[0].arguments["query"], "recent news on coltan & cobalt supply-chain issues in the DRC");
  EXPECT_EQ(result_summary(turns[1].invocations[0]), "Retrieved: News article, pages 3, 4 and 1");
  EXPECT_EQ(turns[1].references, (std::vector<std::string>{"News article"}));

  EXPECT_EQ(turns[2].decision, TriageDecision::FromMemory);
  EXPECT_TRUE(turns[2].invocations.empty());
  EXPECT_EQ(turns[2].response.rfind("(i) Supply-chain delays", 0), 0u);
  EXPECT_NE(turns[2].response.find("(ii) Reputational risk"), std::string::npos);
  EXPECT_NE(turns[2].response.find("(iii) Margin pressure"), std::string::npos);
  EXPECT_EQ(turns[2].references, (std::vector<std::string>{"Apple supply-chain paths"}));
  EXPECT_EQ(turns[2].response.find("Reference:"), std::string::npos);
}

TEST(Dialogue, InvocationCountMatchesDecision) {
  for (const auto& t : run_coltan().session.turns) {
    if (t.decision == TriageDecision::FromMemory) EXPECT_TRUE(t.invocations.empty());
    else EXPECT_FALSE(t.invocations.empty());
  }
}

TEST(Dialogue, PortfolioDigestOpensEveryPrompt) {
  const auto r = run_coltan();
  const auto digest = r.session.portfolio.digest();
  std::size_t prompts = 0;
  for (const auto& t : r.session.turns) {
    for (const auto& e : t.exchanges) {
      ASSERT_FALSE(e.messages.empty());
      EXPECT_EQ(e.messages[0]["role"], "system");
      EXPECT_EQ(e.messages[0]["content"], digest);
      EXPECT_EQ(e.messages.back()["role"], "user");
      EXPECT_EQ(e.messages.back()["content"], t.user_message);
      ++prompts;
    }
  }
  EXPECT_EQ(prompts, 7u);
}

TEST(Dialogue, SynthesisPromptOrder) {
  const auto r = run_coltan();
  const auto& t2 = r.session.turns[1];
  const auto it = std::find_if(t2.exchanges.begin(), t2.exchanges.end(),
                               [](const Exchange& e) { return e.phase == Phase::Synthesize; });
  ASSERT_NE(it, t2.exchanges.end());
  const json& m = it->messages;
  // digest, instruction, turn-1 user and assistant, retrieved context, user.
  ASSERT_EQ(m.size(), 6u);
  EXPECT_EQ(m[1]["content"], phase_instruction(Phase::Synthesize));
  EXPECT_EQ(m[2]["content"], kColtanMessages[0]);
  EXPECT_EQ(m[3]["role"], "assistant");
  EXPECT_NE(m[3]["content"].get<std::string>().find("Reference: Supply-chain paths for coltan."), std::string::npos);
  const auto context = m[4]["content"].get<std::string>();
  for (const auto& shell : t2.invocations[0].results) EXPECT_NE(context.find(shell.text), std::string::npos);
  EXPECT_TRUE(it->tools.empty());
}

TEST(Dialogue, TransientShellsDoNotLeakIntoLaterTurns) {
  const auto r = run_coltan();
  const auto& paths = r.session.turns[0].invocations[0].results;
  ASSERT_FALSE(paths.empty());
  for (std::size_t t = 1; t < r.session.turns.size(); ++t) {
    for (const auto& e : r.session.turns[t].exchanges) {
      const auto prompt = e.messages.dump();
      for (const auto& s : paths) EXPECT_EQ(prompt.find(s.text), std::string::npos);
    }
  }
  EXPECT_TRUE(r.session.transient_store.empty());
}

TEST(Dialogue, EventsFollowTurnOrderAndMatchRecord) {
  const auto r = run_coltan();
  std::vector<std::string> names;
  for (const auto& e : r.events) names.push_back(e.name);
  const std::vector<std::string> expected{
      "triage", "tool_call", "tool_result", "answer", "references", "turn",
      "triage", "tool_call", "tool_result", "answer", "references", "turn",
      "triage", "answer",    "references",  "turn"};
  EXPECT_EQ(names, expected);
  std::size_t turn = 0;
  for (const auto& e : r.events) {
    if (e.name == "turn") {
      EXPECT_EQ(e.data, to_json(r.session.turns[turn]));
      ++turn;
    }
  }
  // The streamed pieces agree with the stored record.
  EXPECT_EQ(r.events[3].data["text"], r.session.turns[0].response);
  EXPECT_EQ(r.events[4].data["references"], r.session.turns[0].references);
  EXPECT_EQ(r.events[2].data["results"], to_json(r.session.turns[0].invocations[0])["results"]);
}

TEST(Dialogue, SingleCallMode) {
  const std::string script = step(1, "triage", "tool_calls", json::array({{{"name", "get_news"}, {"arguments", {{"query", "coltan"}}}}})) +
                             step(1, "synthesize", "reply", "Summary.") +
                             step(2, "triage", "reply", "Straight answer.");
  auto backend = scenario_from(script);
  Orchestrator orch(backend, coltan_workspace().stores(), {3, true});
  auto s = orch.start_session("x", small_portfolio());
  orch.handle(s, "news?");
  orch.handle(s, "again?");
  EXPECT_EQ(s.turns[0].decision, TriageDecision::Augment);
  EXPECT_EQ(s.turns[0].exchanges.size(), 2u);
  EXPECT_FALSE(s.turns[0].exchanges[0].tools.empty());
  EXPECT_EQ(s.turns[1].decision, TriageDecision::FromMemory);
  EXPECT_EQ(s.turns[1].response, "Straight answer.");
}

TEST(Dialogue, EmptyRetrievalGivesNoReferences) {
  const std::string script =
      step(1, "triage", "reply", "augment") +
      step(1, "reroute", "tool_calls",
           json::array({{{"name", "get_news"}, {"arguments", {{"query", "coltan"}, {"since", "2031-01-01T00:00:00Z"}}}}})) +
      step(1, "synthesize", "reply", "Nothing recent was found.");
  auto backend = scenario_from(script);
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  const auto& t = orch.handle(s, "Any news since 2031?");
  EXPECT_TRUE(t.invocations[0].results.empty());
  EXPECT_TRUE(t.references.empty());
  EXPECT_EQ(t.response, "Nothing recent was found.");
}

// ---- retries and repair ------------------------------------------------------------

TEST(Retries, TransientFailuresAreRetried) {
  auto backend = scenario_from(step(1, "triage", "fail", "timeout") + step(1, "triage", "fail", "timeout") +
                               step(1, "triage", "reply", "from-memory: Fine."));
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  const auto& t = orch.handle(s, "hi");
  EXPECT_EQ(t.response, "Fine.");
  ASSERT_EQ(t.exchanges.size(), 3u);
  EXPECT_EQ(t.exchanges[0].error, "timeout");
  EXPECT_EQ(t.exchanges[2].attempt, 2);
  EXPECT_TRUE(t.exchanges[2].reply);
}

TEST(Retries, ExhaustionLeavesSessionUnchanged) {
  auto backend = scenario_from(step(1, "triage", "fail", "connection refused"));
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  const auto before = log_text(s);
  EXPECT_THROW(orch.handle(s, "hi"), BackendUnavailable);
  EXPECT_EQ(log_text(s), before);
  EXPECT_TRUE(s.turns.empty());
}

TEST(Repair, OneRoundFixesAnUnknownTool) {
  const std::string script =
      step(1, "triage", "reply", "augment") +
      step(1, "reroute", "tool_calls", json::array({{{"name", "get_weather"}, {"arguments", {{"city", "Kinshasa"}}}}})) +
      step(1, "reroute", "tool_calls", json::array({{{"name", "get_news"}, {"arguments", {{"query", "coltan"}, {"k", 2}}}}})) +
      step(1, "synthesize", "reply", "Done.");
  auto backend = scenario_from(script);
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  const auto& t = orch.handle(s, "news?");
  ASSERT_EQ(t.invocations.size(), 1u);
  EXPECT_EQ(t.invocations[0].tool, ToolName::GetNews);
  ASSERT_EQ(t.exchanges.size(), 4u);
  const auto& repair = t.exchanges[2];
  EXPECT_EQ(repair.phase, Phase::Reroute);
  EXPECT_EQ(repair.attempt, 1);
  const auto prompt = repair.messages.dump();
  EXPECT_NE(prompt.find("unknown tool 'get_weather'"), std::string::npos);
  bool tool_message = false;
  for (const auto& m : repair.messages) tool_message |= m["role"] == "tool";
  EXPECT_TRUE(tool_message);
}

TEST(Repair, SecondFailureIsSurfaced) {
  const std::string script =
      step(1, "triage", "reply", "augment") +
      step(1, "reroute", "tool_calls", json::array({{{"name", "get_weather"}, {"arguments", json::object()}}}));
  auto backend = scenario_from(script);
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  try {
    orch.handle(s, "weather?");
    FAIL() << "expected ToolCallRejected";
  } catch (const ToolCallRejected& e) {
    ASSERT_FALSE(e.problems().empty());
    EXPECT_NE(e.problems()[0].find("get_weather"), std::string::npos);
  }
  EXPECT_TRUE(s.turns.empty());
}

TEST(Repair, TextInsteadOfToolCallsCountsAsAProblem) {
  auto backend = scenario_from(step(1, "triage", "reply", "augment") + step(1, "reroute", "reply", "I would search news."));
  Orchestrator orch(backend, coltan_workspace().stores());
  auto s = orch.start_session("x", small_portfolio());
  EXPECT_THROW(orch.handle(s, "news?"), ToolCallRejected);
}

TEST(Validation, RandomMalformedStubsAreAllRejected) {
  auto backend = coltan_scenario();
  Orchestrator orch(backend, coltan_workspace().stores());
  std::mt19937 rng(20250227);
  const std::vector<json> junk{json(nullptr), json(3), json("text"), json::array(), json(-1), json(1000), json(""),
                               json({{"nested", 1}})};
  auto pick = [&](const std::vector<json>& v) { return v[rng() % v.size()]; };
  std::size_t rejected = 0;
  for (int trial = 0; trial < 500; ++trial) {
    ToolCallStub stub{"call", "", json::object()};
    const int tool = static_cast<int>(rng() % 3);
    stub.name = std::string(to_string(static_cast<ToolName>(tool)));
    json good = tool == 2 ? json{{"mentions", {"coltan"}}} : json{{"query", "coltan"}};
    switch (rng() % 6) {
      case 0:  // unknown tool name
        stub.name = std::vector<std::string>{"get_weather", "GET_NEWS", "", "graph-traverser"}[rng() % 4];
        stub.arguments = good;
        break;
      case 1:  // required argument missing
        stub.arguments = json::object();
        break;
      case 2:  // required argument of the wrong type
        stub.arguments = good;
        stub.arguments[tool == 2 ? "mentions" : "query"] = pick({json(3), json(nullptr), json::object(), json(true)});
        break;
      case 3:  // undeclared property
        stub.arguments = good;
        stub.arguments["extra_" + std::to_string(rng() % 100)] = pick(junk);
        break;
      case 4:  // out-of-range integer
        stub.arguments = good;
        stub.arguments[tool == 2 ? "hops" : "k"] = pick({json(0), json(-5), json(1000), json(2.5)});
        break;
      default:  // arguments that are not an object
        stub.arguments = pick({json(nullptr), json::array(), json("{}"), json(7)});
        break;
    }
    std::vector<std::string> problems;
    const auto accepted = orch.validate_stubs({stub}, problems);
    EXPECT_TRUE(accepted.empty()) << stub.name << " " << stub.arguments.dump();
    EXPECT_FALSE(problems.empty());
    rejected += accepted.empty();
  }
  EXPECT_EQ(rejected, 500u);

  std::vector<std::string> problems;
  const auto ok = orch.validate_stubs({{"a", "get_news", {{"query", "coltan"}, {"k", 2}}},
                                       {"b", "graph_traverser", {{"mentions", {"cobalt"}}, {"hops", 2}}}},
                                      problems);
  EXPECT_TRUE(problems.empty());
  EXPECT_EQ(ok.size(), 2u);
}

// ---- logs and replay ---------------------------------------------------------------

TEST(SessionLog, RoundTripsByteForByte) {
  const auto r = run_coltan();
  const auto text = log_text(r.session);
  std::istringstream in(text);
  const auto back = read_session_log(in);
  EXPECT_EQ(log_text(back), text);
  EXPECT_EQ(back.turns.size(), 3u);
}

TEST(SessionLog, RejectsBrokenLogs) {
  std::istringstream empty("");
  EXPECT_THROW(read_session_log(empty), std::invalid_argument);
  std::istringstream orphan(R"({"rec":"turn","turn":1})" "\n");
  EXPECT_THROW(read_session_log(orphan), std::invalid_argument);
  const auto text = log_text(run_coltan().session);
  const auto second = text.find('\n') + 1;
  const auto third = text.find('\n', second) + 1;
  std::istringstream skipped(text.substr(0, second) + text.substr(third));
  EXPECT_THROW(read_session_log(skipped), std::invalid_argument);
}

TEST(Replay, ReproducesPromptsAndResponses) {
  const auto first = run_coltan();
  LogReplayBackend replay(first.session);
  Orchestrator orch(replay, coltan_workspace().stores());
  const auto again = replay_session(first.session, orch);
  EXPECT_EQ(log_text(again), log_text(first.session));
}

TEST(Replay, DetectsDivergence) {
  auto recorded = run_coltan().session;
  LogReplayBackend replay(recorded);
  Orchestrator orch(replay, coltan_workspace().stores());
  auto s = orch.start_session(recorded.id, recorded.portfolio);
  EXPECT_THROW(orch.handle(s, "A different opening question."), ReplayDivergence);

  auto other = orch.start_session(recorded.id, small_portfolio());
  EXPECT_THROW(orch.handle(other, kColtanMessages[0]), ReplayDivergence);
}

TEST(Replay, RecordedFailuresReplayAsFailures) {
  auto backend = scenario_from(step(1, "triage", "fail", "blip") + step(1, "triage", "reply", "from-memory: ok"));
  Orchestrator live(backend, coltan_workspace().stores());
  auto s = live.start_session("x", small_portfolio());
  live.handle(s, "hi");
  LogReplayBackend replay(s);
  Orchestrator orch(replay, coltan_workspace().stores());
  EXPECT_EQ(log_text(replay_session(s, orch)), log_text(s));
}
