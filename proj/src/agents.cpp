#include "chainsight/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "chainsight/text.hpp"

namespace chainsight {

// ---- portfolio ---------------------------------------------------------------

void Portfolio::validate() const {
  double total = 0.0;
  std::set<std::string> tickers;
  for (const auto& p : positions) {
    if (p.ticker.empty()) throw std::invalid_argument("position '" + p.security_name + "' has no ticker");
    if (!tickers.insert(p.ticker).second) throw std::invalid_argument("duplicate ticker " + p.ticker);
    if (!(p.weight_percent >= 0.0 && p.weight_percent <= 100.0)) {
      throw std::invalid_argument("weight of " + p.ticker + " outside [0,100]");
    }
    total += p.weight_percent;
  }
  if (std::abs(total - 100.0) > 0.01) {
    throw std::invalid_argument("portfolio weights sum to " + text::format_number(total) + ", not 100");
  }
}

std::string Portfolio::digest() const {
  std::string out = "Portfolio under review (" + std::to_string(positions.size()) +
                    " positions, weights in percent of total):";
  for (const auto& p : positions) {
    out += "\n- " + p.security_name + " (" + p.ticker + "): " + text::format_number(p.weight_percent) + "%";
  }
  return out;
}

Portfolio load_portfolio(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("portfolio table is empty");
  const auto header = text::csv_fields(line);
  if (header.size() < 3 || header[0] != "Security Name" || header[1] != "Ticker" || header[2] != "Weight") {
    throw std::invalid_argument("portfolio table must start with columns Security Name, Ticker, Weight");
  }
  Portfolio portfolio;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::csv_fields(line);
    if (fields.size() < 3) throw std::invalid_argument("portfolio row " + std::to_string(row) + ": too few columns");
    portfolio.positions.push_back(
        {fields[0], fields[1], text::parse_number(fields[2], "portfolio row " + std::to_string(row) + " weight")});
  }
  portfolio.validate();
  return portfolio;
}

Portfolio load_portfolio_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open portfolio '" + path + "'");
  return load_portfolio(in);
}

json to_json(const Portfolio& portfolio) {
  json out = json::array();
  for (const auto& p : portfolio.positions) {
    out.push_back({{"security_name", p.security_name}, {"ticker", p.ticker}, {"weight_percent", p.weight_percent}});
  }
  return out;
}

Portfolio portfolio_from_json(const json& value) {
  if (!value.is_array()) throw std::invalid_argument("portfolio must be an array of positions");
  Portfolio portfolio;
  for (const auto& p : value) {
    if (!p.is_object()) throw std::invalid_argument("position must be an object");
    records::require_known_fields(p, {"security_name", "ticker", "weight_percent"}, "position");
    portfolio.positions.push_back({p.at("security_name").get<std::string>(), p.at("ticker").get<std::string>(),
                                   p.at("weight_percent").get<double>()});
  }
  portfolio.validate();
  return portfolio;
}

// ---- backend records ---------------------------------------------------------------

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Triage: return "triage";
    case Phase::Reroute: return "reroute";
    case Phase::Synthesize: return "synthesize";
  }
  return "triage";
}

std::optional<Phase> parse_phase(std::string_view text) {
  for (auto p : {Phase::Triage, Phase::Reroute, Phase::Synthesize})
    if (to_string(p) == text) return p;
  return std::nullopt;
}

std::string_view to_string(TriageDecision decision) {
  return decision == TriageDecision::FromMemory ? "from-memory" : "augment";
}

json to_json(const Completion& c) {
  json calls = json::array();
  for (const auto& s : c.tool_calls) calls.push_back({{"id", s.id}, {"name", s.name}, {"arguments", s.arguments}});
  return {{"text", c.text}, {"tool_calls", std::move(calls)}};
}

Completion completion_from_json(const json& value) {
  Completion c;
  c.text = value.value("text", "");
  for (const auto& s : value.value("tool_calls", json::array())) {
    c.tool_calls.push_back({s.value("id", ""), s.at("name").get<std::string>(), s.value("arguments", json())});
  }
  return c;
}

// ---- scenario backend ------------------------------------------------------------

ScenarioBackend::ScenarioBackend(std::istream& scenario) {
  std::string line;
  for (std::size_t record = 0; std::getline(scenario, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      records::require_known_fields(j, {"turn", "phase", "action", "payload"}, "scenario step");
      const int turn = j.at("turn").get<int>();
      const auto phase = parse_phase(j.at("phase").get<std::string>());
      if (!phase) throw std::invalid_argument("unknown phase");
      const auto action = j.at("action").get<std::string>();
      const json& payload = j.at("payload");
      Step step;
      if (action == "reply") {
        step.action = Step::Action::Reply;
        step.completion.text = payload.get<std::string>();
      } else if (action == "tool_calls") {
        step.action = Step::Action::ToolCalls;
        int n = 0;
        for (const auto& call : payload) {
          ++n;
          const std::string id = call.value("id", "call_" + std::to_string(turn) + "_" + std::to_string(n));
          step.completion.tool_calls.push_back({id, call.at("name").get<std::string>(), call.value("arguments", json::object())});
        }
      } else if (action == "fail") {
        step.action = Step::Action::Fail;
        step.failure = payload.get<std::string>();
      } else {
        throw std::invalid_argument("unknown action '" + action + "'");
      }
      steps_[{turn, *phase}].push_back(std::move(step));
    } catch (const std::exception& e) {
      throw std::invalid_argument("scenario record " + std::to_string(record) + ": " + e.what());
    }
  }
}

ScenarioBackend ScenarioBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario '" + path + "'");
  return ScenarioBackend(in);
}

Completion ScenarioBackend::complete(const CompletionRequest& request) {
  auto it = steps_.find({request.turn, request.phase});
  if (it == steps_.end() || it->second.empty()) {
    throw BackendError("scenario has no step for turn " + std::to_string(request.turn) + " phase " +
                       std::string(to_string(request.phase)));
  }
  const auto& steps = it->second;
  const Step& step = steps[std::min<std::size_t>(static_cast<std::size_t>(request.attempt), steps.size() - 1)];
  if (step.action == Step::Action::Fail) throw BackendError(step.failure);
  return step.completion;
}

// ---- turn records -------------------------------------------------------------------

json to_json(const ToolInvocation& inv) {
  json results = json::array();
  for (const auto& s : inv.results) results.push_back(records::to_json(s));
  json out{{"id", inv.id}, {"tool", to_string(inv.tool)}, {"arguments", inv.arguments}, {"results", std::move(results)}};
  if (inv.error) out["error"] = *inv.error;
  return out;
}

ToolInvocation invocation_from_json(const json& value) {
  ToolInvocation inv;
  inv.id = value.at("id").get<std::string>();
  const auto tool = parse_tool_name(value.at("tool").get<std::string>());
  if (!tool) throw std::invalid_argument("unknown tool in record");
  inv.tool = *tool;
  inv.arguments = value.at("arguments");
  for (const auto& s : value.at("results")) inv.results.push_back(records::shell_from_json(s));
  if (value.contains("error")) inv.error = value["error"].get<std::string>();
  return inv;
}

json to_json(const Exchange& e) {
  json out{{"phase", to_string(e.phase)}, {"attempt", e.attempt}, {"messages", e.messages}, {"tools", e.tools}};
  if (e.reply) out["reply"] = to_json(*e.reply);
  if (e.error) out["error"] = *e.error;
  return out;
}

Exchange exchange_from_json(const json& value) {
  Exchange e;
  const auto phase = parse_phase(value.at("phase").get<std::string>());
  if (!phase) throw std::invalid_argument("unknown phase in record");
  e.phase = *phase;
  e.attempt = value.at("attempt").get<int>();
  e.messages = value.at("messages");
  e.tools = value.at("tools");
  if (value.contains("reply")) e.reply = completion_from_json(value["reply"]);
  if (value.contains("error")) e.error = value["error"].get<std::string>();
  return e;
}

json to_json(const AgentTurn& turn) {
  json invocations = json::array();
  for (const auto& inv : turn.invocations) invocations.push_back(to_json(inv));
  json exchanges = json::array();
  for (const auto& e : turn.exchanges) exchanges.push_back(to_json(e));
  return {{"rec", "turn"},
          {"turn", turn.index},
          {"user", turn.user_message},
          {"decision", to_string(turn.decision)},
          {"invocations", std::move(invocations)},
          {"response", turn.response},
          {"references", turn.references},
          {"exchanges", std::move(exchanges)}};
}

AgentTurn turn_from_json(const json& value) {
  records::require_known_fields(
      value, {"rec", "turn", "user", "decision", "invocations", "response", "references", "exchanges"}, "turn");
  AgentTurn turn;
  turn.index = value.at("turn").get<int>();
  turn.user_message = value.at("user").get<std::string>();
  const auto decision = value.at("decision").get<std::string>();
  if (decision != "from-memory" && decision != "augment") throw std::invalid_argument("unknown triage decision");
  turn.decision = decision == "augment" ? TriageDecision::Augment : TriageDecision::FromMemory;
  for (const auto& inv : value.at("invocations")) turn.invocations.push_back(invocation_from_json(inv));
  turn.response = value.at("response").get<std::string>();
  turn.references = value.at("references").get<std::vector<std::string>>();
  for (const auto& e : value.at("exchanges")) turn.exchanges.push_back(exchange_from_json(e));
  return turn;
}

void write_session_header(std::ostream& out, const Session& session) {
  out << json{{"rec", "session"}, {"id", session.id}, {"portfolio", to_json(session.portfolio)}}.dump() << '\n';
}

void append_turn(std::ostream& out, const AgentTurn& turn) { out << to_json(turn).dump() << '\n'; }

void write_session_log(std::ostream& out, const Session& session) {
  write_session_header(out, session);
  for (const auto& turn : session.turns) append_turn(out, turn);
}

Session read_session_log(std::istream& in) {
  Session session;
  bool header = false;
  std::string line;
  for (std::size_t record = 0; std::getline(in, line); ++record) {
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const auto rec = j.at("rec").get<std::string>();
      if (rec == "session") {
        if (header) throw std::invalid_argument("second session header");
        session.id = j.at("id").get<std::string>();
        session.portfolio = portfolio_from_json(j.at("portfolio"));
        header = true;
      } else if (rec == "turn") {
        if (!header) throw std::invalid_argument("turn before session header");
        session.turns.push_back(turn_from_json(j));
        if (session.turns.back().index != static_cast<int>(session.turns.size())) {
          throw std::invalid_argument("turns out of order");
        }
      } else {
        throw std::invalid_argument("unknown record '" + rec + "'");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("session log record " + std::to_string(record) + ": " + e.what());
    }
  }
  if (!header) throw std::invalid_argument("session log has no header");
  return session;
}

std::pair<std::string, std::vector<std::string>> split_references(std::string_view answer) {
  std::vector<std::string> lines = text::split(answer, '\n');
  std::vector<std::string> found;
  while (!lines.empty()) {
    const auto line = text::trim(lines.back());
    if (line.empty()) {
      lines.pop_back();
      continue;
    }
    constexpr std::string_view kTag = "reference:";
    constexpr std::string_view kTags = "references:";
    const auto lower = text::to_lower(line);
    std::size_t skip = 0;
    if (lower.rfind(kTags, 0) == 0) skip = kTags.size();
    else if (lower.rfind(kTag, 0) == 0) skip = kTag.size();
    else break;
    std::vector<std::string> labels;
    for (auto& part : text::split(std::string_view(line).substr(skip), ';')) {
      auto label = text::trim(part);
      while (!label.empty() && label.back() == '.') label.pop_back();
      if (!label.empty()) labels.push_back(std::move(label));
    }
    found.insert(found.begin(), labels.begin(), labels.end());
    lines.pop_back();
  }
  std::string body;
  for (std::size_t i = 0; i < lines.size(); ++i) body += (i ? "\n" : "") + lines[i];
  return {text::trim(body), found};
}

// ---- orchestration -----------------------------------------------------------------

std::string_view phase_instruction(Phase phase, bool single_call) {
  switch (phase) {
    case Phase::Triage:
      return single_call
                 ? "You are a risk assistant for the portfolio above. If the conversation so far answers the "
                   "latest message, answer it directly. Otherwise call one or more retrieval tools: "
                   "get_factors for factor exposures, get_news for curated news, graph_traverser for "
                   "supply-chain relationships."
                 : "You are the triage agent of a portfolio risk assistant. If the conversation so far and the "
                   "portfolio above are enough to answer the latest message, reply \"from-memory: \" followed "
                   "by the answer, ending with a \"Reference:\" line. If factor exposures, news or "
                   "supply-chain data are needed, reply with the single word \"augment\".";
    case Phase::Reroute:
      return "You are the rerouting agent of a portfolio risk assistant. Choose the retrieval tools and "
             "arguments that gather the evidence the latest message needs: get_factors for factor "
             "exposures, get_news for curated news, graph_traverser for supply-chain relationships. "
             "Respond only with tool calls.";
    case Phase::Synthesize:
      return "Answer the latest message for the portfolio above using the retrieved context. Keep figures "
             "from the context exact. End with a \"Reference:\" line naming the sources used.";
  }
  return {};
}

namespace {

std::string history_entry(const AgentTurn& turn) {
  std::string out = turn.response;
  if (!turn.references.empty()) {
    out += "\n\nReference: ";
    for (std::size_t i = 0; i < turn.references.size(); ++i) out += (i ? "; " : "") + turn.references[i];
    out += ".";
  }
  return out;
}

std::string context_block(const std::vector<ContextShell>& shells) {
  std::string out = "Retrieved context for the latest message:";
  if (shells.empty()) return out + "\n(none)";
  for (std::size_t i = 0; i < shells.size(); ++i) {
    out += "\n\n[" + std::to_string(i + 1) + "] " + std::string(to_string(shells[i].source)) + "\n" + shells[i].text;
  }
  return out;
}

json assistant_tool_calls(const std::vector<ToolCallStub>& stubs) {
  json calls = json::array();
  for (const auto& s : stubs) {
    calls.push_back({{"id", s.id},
                     {"type", "function"},
                     {"function", {{"name", s.name}, {"arguments", s.arguments.is_null() ? "" : s.arguments.dump()}}}});
  }
  return {{"role", "assistant"}, {"content", nullptr}, {"tool_calls", std::move(calls)}};
}

}  // namespace

Orchestrator::Orchestrator(ChatBackend& backend, ToolStores stores, OrchestratorOptions options)
    : backend_(backend), stores_(std::move(stores)), options_(options) {
  if (options_.max_attempts < 1) throw std::invalid_argument("max_attempts must be at least 1");
}

Session Orchestrator::start_session(std::string id, Portfolio portfolio) const {
  portfolio.validate();
  Session s;
  s.id = std::move(id);
  s.portfolio = std::move(portfolio);
  return s;
}

json Orchestrator::base_messages(const Session& session, std::string_view instruction) const {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", session.portfolio.digest()}});
  messages.push_back({{"role", "system"}, {"content", instruction}});
  for (const auto& turn : session.turns) {
    messages.push_back({{"role", "user"}, {"content", turn.user_message}});
    messages.push_back({{"role", "assistant"}, {"content", history_entry(turn)}});
  }
  return messages;
}

Completion Orchestrator::consult(Phase phase, json messages, json tools, AgentTurn& turn) {
  std::string last_error;
  for (int tries = 0; tries < options_.max_attempts; ++tries) {
    Exchange exchange;
    exchange.phase = phase;
    exchange.attempt = static_cast<int>(std::count_if(turn.exchanges.begin(), turn.exchanges.end(),
                                                      [&](const Exchange& e) { return e.phase == phase; }));
    exchange.messages = messages;
    exchange.tools = tools;
    CompletionRequest request{std::move(messages), std::move(tools), turn.index, phase, exchange.attempt};
    try {
      exchange.reply = backend_.complete(request);
      turn.exchanges.push_back(exchange);
      return *exchange.reply;
    } catch (const BackendError& e) {
      last_error = e.what();
      exchange.error = last_error;
      turn.exchanges.push_back(exchange);
    }
    messages = std::move(request.messages);
    tools = std::move(request.tools);
  }
  throw BackendUnavailable("chat backend failed after " + std::to_string(options_.max_attempts) +
                           " attempts: " + last_error);
}

std::vector<ToolInvocation> Orchestrator::validate_stubs(const std::vector<ToolCallStub>& stubs,
                                                         std::vector<std::string>& problems) const {
  std::vector<ToolInvocation> out;
  if (stubs.empty()) problems.push_back("no tool call was made");
  for (const auto& stub : stubs) {
    const auto tool = parse_tool_name(stub.name);
    if (!tool) {
      problems.push_back(stub.id + ": unknown tool '" + stub.name + "'");
      continue;
    }
    if (stub.arguments.is_null()) {
      problems.push_back(stub.id + ": arguments are not valid JSON");
      continue;
    }
    const auto errors = validate_against_schema(stub.arguments, tool_parameters(*tool), stub.id + " " + stub.name);
    if (!errors.empty()) {
      problems.insert(problems.end(), errors.begin(), errors.end());
      continue;
    }
    out.push_back({stub.id, *tool, stub.arguments, {}, std::nullopt});
  }
  return out;
}

std::vector<ToolCallStub> Orchestrator::reroute(const Session& session, AgentTurn& turn) {
  json messages = base_messages(session, phase_instruction(Phase::Reroute));
  messages.push_back({{"role", "user"}, {"content", turn.user_message}});
  return consult(Phase::Reroute, std::move(messages), tool_registry(), turn).tool_calls;
}

const AgentTurn& Orchestrator::handle(Session& session, const std::string& message, const EventSink& sink) {
  auto emit = [&](std::string name, json data) {
    if (sink) sink({std::move(name), std::move(data)});
  };
  session.transient_store.clear();
  AgentTurn turn;
  turn.index = static_cast<int>(session.turns.size()) + 1;
  turn.user_message = message;

  // Triage.
  std::string answer;
  std::vector<ToolCallStub> stubs;
  json reroute_messages;
  {
    json messages = base_messages(session, phase_instruction(Phase::Triage, options_.single_call));
    messages.push_back({{"role", "user"}, {"content", message}});
    const json tools = options_.single_call ? tool_registry() : json::array();
    const Completion reply = consult(Phase::Triage, messages, tools, turn);
    if (options_.single_call) {
      turn.decision = reply.tool_calls.empty() ? TriageDecision::FromMemory : TriageDecision::Augment;
      answer = reply.text;
      stubs = reply.tool_calls;
      reroute_messages = std::move(messages);
    } else {
      const auto trimmed = text::trim(reply.text);
      const auto lower = text::to_lower(trimmed);
      if (lower.rfind("augment", 0) == 0) {
        turn.decision = TriageDecision::Augment;
      } else {
        turn.decision = TriageDecision::FromMemory;
        constexpr std::string_view kPrefix = "from-memory:";
        answer = lower.rfind(kPrefix, 0) == 0 ? text::trim(std::string_view(trimmed).substr(kPrefix.size())) : trimmed;
      }
    }
  }

  // Rerouting, with one repair round.
  if (turn.decision == TriageDecision::Augment) {
    if (!options_.single_call) {
      reroute_messages = base_messages(session, phase_instruction(Phase::Reroute));
      reroute_messages.push_back({{"role", "user"}, {"content", message}});
      stubs = consult(Phase::Reroute, reroute_messages, tool_registry(), turn).tool_calls;
    }
    std::vector<std::string> problems;
    turn.invocations = validate_stubs(stubs, problems);
    if (!problems.empty()) {
      json repair = reroute_messages;
      if (!stubs.empty()) repair.push_back(assistant_tool_calls(stubs));
      for (const auto& stub : stubs) {
        repair.push_back({{"role", "tool"}, {"tool_call_id", stub.id}, {"content", "rejected: resubmit all tool calls"}});
      }
      std::string feedback = "The tool calls were rejected:";
      for (const auto& p : problems) feedback += "\n- " + p;
      feedback += "\nUse only the declared tools with arguments matching their schemas.";
      repair.push_back({{"role", "system"}, {"content", feedback}});
      stubs = consult(Phase::Reroute, std::move(repair), tool_registry(), turn).tool_calls;
      problems.clear();
      turn.invocations = validate_stubs(stubs, problems);
      if (!problems.empty()) throw ToolCallRejected("tool calls rejected after repair round", problems);
    }
  }
  emit("triage", {{"turn", turn.index}, {"decision", to_string(turn.decision)}});

  // Tool execution into the transient store.
  for (auto& inv : turn.invocations) {
    emit("tool_call", {{"id", inv.id}, {"tool", to_string(inv.tool)}, {"arguments", inv.arguments}});
    execute_tool(inv, stores_);
    session.transient_store.insert(session.transient_store.end(), inv.results.begin(), inv.results.end());
    json data = to_json(inv);
    data["summary"] = result_summary(inv);
    emit("tool_result", std::move(data));
  }

  // Synthesis.
  if (turn.decision == TriageDecision::Augment) {
    json messages = base_messages(session, phase_instruction(Phase::Synthesize));
    messages.push_back({{"role", "system"}, {"content", context_block(session.transient_store)}});
    messages.push_back({{"role", "user"}, {"content", message}});
    answer = consult(Phase::Synthesize, std::move(messages), json::array(), turn).text;
  }

  auto [body, cited] = split_references(answer);
  turn.response = std::move(body);
  auto add_reference = [&](const std::string& label) {
    const auto folded = text::to_lower(label);
    const bool seen = std::any_of(turn.references.begin(), turn.references.end(),
                                  [&](const std::string& r) { return text::to_lower(r) == folded; });
    if (!seen) turn.references.push_back(label);
  };
  for (const auto& inv : turn.invocations)
    for (const auto& label : reference_labels(inv)) add_reference(label);
  for (const auto& label : cited) add_reference(label);

  emit("answer", {{"turn", turn.index}, {"text", turn.response}});
  emit("references", {{"turn", turn.index}, {"references", turn.references}});
  session.turns.push_back(std::move(turn));
  emit("turn", to_json(session.turns.back()));
  return session.turns.back();
}

// ---- replay --------------------------------------------------------------------------

LogReplayBackend::LogReplayBackend(const Session& recorded) {
  for (const auto& turn : recorded.turns)
    for (const auto& e : turn.exchanges) exchanges_[{turn.index, e.phase, e.attempt}] = e;
}

Completion LogReplayBackend::complete(const CompletionRequest& request) {
  auto it = exchanges_.find({request.turn, request.phase, request.attempt});
  const std::string where = "turn " + std::to_string(request.turn) + " " + std::string(to_string(request.phase)) +
                            " attempt " + std::to_string(request.attempt);
  if (it == exchanges_.end()) throw ReplayDivergence("no recorded exchange for " + where);
  if (it->second.messages != request.messages) throw ReplayDivergence("prompt differs at " + where);
  if (it->second.tools != request.tools) throw ReplayDivergence("tool declarations differ at " + where);
  if (it->second.error) throw BackendError(*it->second.error);
  return *it->second.reply;
}

Session replay_session(const Session& recorded, Orchestrator& orchestrator) {
  Session session = orchestrator.start_session(recorded.id, recorded.portfolio);
  for (const auto& turn : recorded.turns) orchestrator.handle(session, turn.user_message);
  return session;
}

}  // namespace chainsight
