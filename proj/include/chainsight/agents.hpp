#pragma once

// Agent loop: triage, tool rerouting, tool execution, synthesis, and the
// session memory that carries the portfolio at the top of every prompt.

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "chainsight/records.hpp"
#include "chainsight/tools.hpp"

namespace chainsight {

// ---- portfolio ---------------------------------------------------------------

struct Position {
  std::string security_name;
  std::string ticker;
  double weight_percent = 0.0;

  bool operator==(const Position&) const = default;
};

struct Portfolio {
  std::vector<Position> positions;

  /// Throws std::invalid_argument unless weights sum to 100 +- 0.01, each lies
  /// in [0,100] and tickers are unique.
  void validate() const;

  /// Plain-text block pinned first in every prompt.
  std::string digest() const;

  bool operator==(const Portfolio&) const = default;
};

/// Comma-separated "Security Name,Ticker,Weight" table (extra columns ignored).
Portfolio load_portfolio(std::istream& in);
Portfolio load_portfolio_file(const std::string& path);

json to_json(const Portfolio& portfolio);
Portfolio portfolio_from_json(const json& value);

// ---- backend -------------------------------------------------------------------

enum class Phase { Triage, Reroute, Synthesize };

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view text);

struct ToolCallStub {
  std::string id;
  std::string name;
  /// Parsed arguments; null when the backend sent text that is not JSON.
  json arguments;

  bool operator==(const ToolCallStub&) const = default;
};

/// A backend answer: text, tool calls, or (rarely) both.
struct Completion {
  std::string text;
  std::vector<ToolCallStub> tool_calls;

  bool operator==(const Completion&) const = default;
};

json to_json(const Completion& completion);
Completion completion_from_json(const json& value);

struct CompletionRequest {
  /// Chat-completions messages.
  json messages = json::array();
  /// Chat-completions tool declarations; empty array when tools are not offered.
  json tools = json::array();
  /// 1-based turn within the session.
  int turn = 1;
  Phase phase = Phase::Triage;
  /// Earlier calls for the same (turn, phase): retries and repair rounds.
  int attempt = 0;
};

/// Transport or service failure. Retried by the orchestrator.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
};

/// Scripted replies keyed on (turn, phase). The n-th call for a key gets the
/// n-th record for that key, or the last one once they run out.
///
/// Record: {"turn": 1, "phase": "reroute", "action": "tool_calls",
///          "payload": [{"name": "get_news", "arguments": {...}}]}
/// Actions: "reply" (payload: text), "tool_calls" (payload: stubs),
/// "fail" (payload: error message, thrown as BackendError).
class ScenarioBackend final : public ChatBackend {
 public:
  struct Step {
    enum class Action { Reply, ToolCalls, Fail };
    Action action = Action::Reply;
    Completion completion;
    std::string failure;
  };

  explicit ScenarioBackend(std::istream& scenario);
  static ScenarioBackend from_file(const std::string& path);

  Completion complete(const CompletionRequest& request) override;

  std::size_t size() const noexcept { return steps_.size(); }

 private:
  ScenarioBackend() = default;
  std::map<std::pair<int, Phase>, std::vector<Step>> steps_;
};

// ---- session -------------------------------------------------------------------

enum class TriageDecision { FromMemory, Augment };

std::string_view to_string(TriageDecision decision);

/// One backend consultation, kept so a session can be replayed exactly.
struct Exchange {
  Phase phase = Phase::Triage;
  int attempt = 0;
  json messages = json::array();
  json tools = json::array();
  std::optional<Completion> reply;
  std::optional<std::string> error;
};

struct AgentTurn {
  int index = 1;
  std::string user_message;
  TriageDecision decision = TriageDecision::FromMemory;
  std::vector<ToolInvocation> invocations;
  std::string response;
  std::vector<std::string> references;
  std::vector<Exchange> exchanges;
};

json to_json(const ToolInvocation& invocation);
ToolInvocation invocation_from_json(const json& value);
json to_json(const Exchange& exchange);
Exchange exchange_from_json(const json& value);
json to_json(const AgentTurn& turn);
AgentTurn turn_from_json(const json& value);

struct Session {
  std::string id;
  Portfolio portfolio;
  std::vector<AgentTurn> turns;
  /// Shells retrieved for the turn in progress; cleared at turn start.
  std::vector<ContextShell> transient_store;
};

/// Line-delimited log: a {"rec":"session"} header, then one {"rec":"turn"}
/// record per turn. Turns are appended as they complete.
void write_session_header(std::ostream& out, const Session& session);
void append_turn(std::ostream& out, const AgentTurn& turn);
void write_session_log(std::ostream& out, const Session& session);
Session read_session_log(std::istream& in);

/// Trailing "Reference: ..." lines split off an answer. Returns the answer
/// without them and the labels they carried.
std::pair<std::string, std::vector<std::string>> split_references(std::string_view answer);

// ---- orchestration --------------------------------------------------------------

/// Progress notifications for one turn, in order: triage, then per tool
/// tool_call and tool_result, then answer, references and finally turn (the
/// stored record).
struct AgentEvent {
  std::string name;
  json data;
};

using EventSink = std::function<void(const AgentEvent&)>;

struct OrchestratorOptions {
  /// Attempts per backend consultation before a BackendError is surfaced.
  int max_attempts = 3;
  /// Fold triage and rerouting into one consultation that may answer or call tools.
  bool single_call = false;
};

/// Backend failed on every attempt.
class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stubs still invalid after the repair round.
class ToolCallRejected : public std::runtime_error {
 public:
  ToolCallRejected(std::string message, std::vector<std::string> problems)
      : std::runtime_error(std::move(message)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class Orchestrator {
 public:
  Orchestrator(ChatBackend& backend, ToolStores stores, OrchestratorOptions options = {});

  Session start_session(std::string id, Portfolio portfolio) const;

  /// Runs one turn and appends it to the session. On BackendUnavailable or
  /// ToolCallRejected the session is left unchanged.
  const AgentTurn& handle(Session& session, const std::string& message, const EventSink& sink = {});

  // Individual stages, usable on their own.
  std::vector<ToolCallStub> reroute(const Session& session, AgentTurn& turn);
  std::vector<ToolInvocation> validate_stubs(const std::vector<ToolCallStub>& stubs,
                                             std::vector<std::string>& problems) const;

  const ToolStores& stores() const noexcept { return stores_; }

 private:
  Completion consult(Phase phase, json messages, json tools, AgentTurn& turn);
  json base_messages(const Session& session, std::string_view instruction) const;

  ChatBackend& backend_;
  ToolStores stores_;
  OrchestratorOptions options_;
};

/// Prompt text used for each consultation.
std::string_view phase_instruction(Phase phase, bool single_call = false);

/// Serves the replies recorded in a session log, in order, and checks each
/// request against the recorded one (throws ReplayDivergence on mismatch).
class LogReplayBackend final : public ChatBackend {
 public:
  explicit LogReplayBackend(const Session& recorded);
  Completion complete(const CompletionRequest& request) override;

 private:
  std::map<std::tuple<int, Phase, int>, Exchange> exchanges_;
};

class ReplayDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Re-runs every user message of `recorded` through a fresh session on
/// `orchestrator` and returns the new session.
Session replay_session(const Session& recorded, Orchestrator& orchestrator);

}  // namespace chainsight
