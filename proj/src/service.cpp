#include "chainsight/service.hpp"

#include <httplib.h>

#include <filesystem>
#include <fstream>

#include "chainsight/text.hpp"

namespace chainsight {

std::string format_sse(const AgentEvent& event) {
  return "event: " + event.name + "\ndata: " + event.data.dump() + "\n\n";
}

std::vector<AgentEvent> parse_sse(std::string_view stream) {
  std::vector<AgentEvent> events;
  AgentEvent current;
  std::string data;
  bool open = false;
  for (const auto& raw : text::split(stream, '\n')) {
    const std::string_view line(raw);
    if (line.empty()) {
      if (open) {
        current.data = json::parse(data, nullptr, false);
        if (current.data.is_discarded()) throw std::invalid_argument("event '" + current.name + "' carries invalid JSON");
        events.push_back(std::move(current));
      }
      current = {};
      data.clear();
      open = false;
    } else if (line.rfind("event: ", 0) == 0) {
      current.name = std::string(line.substr(7));
      open = true;
    } else if (line.rfind("data: ", 0) == 0) {
      if (!data.empty()) data += '\n';
      data += line.substr(6);
      open = true;
    } else if (line[0] != ':') {
      throw std::invalid_argument("unexpected stream line");
    }
  }
  if (open) throw std::invalid_argument("stream ends inside an event");
  return events;
}

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  reply_json(res, status, extra);
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    reply_error(res, 400, "body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

json transcript(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  return {{"session_id", s.id}, {"portfolio", to_json(s.portfolio)}, {"turns", std::move(turns)}};
}

}  // namespace

ChatService::ChatService(const Workspace& workspace, ChatBackend& backend, OrchestratorOptions options)
    : workspace_(workspace), orchestrator_(backend, workspace.stores(), options) {}

ChatService::~ChatService() { stop(); }

std::shared_ptr<ChatService::Entry> ChatService::find(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void ChatService::mount(httplib::Server& server) {
  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    const auto* g = workspace_.graph();
    std::size_t sessions;
    {
      std::lock_guard lock(sessions_mutex_);
      sessions = sessions_.size();
    }
    reply_json(res, 200,
               {{"status", "ok"},
                {"backend", workspace_.config().backend.mode == BackendMode::Live ? "live" : "mock"},
                {"graph_nodes", g ? g->node_count() : 0},
                {"graph_edges", g ? g->edge_count() : 0},
                {"sessions", sessions}});
  });

  server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    Portfolio portfolio;
    try {
      records::require_known_fields(*body, {"portfolio"}, "session request");
      if (body->contains("portfolio")) {
        portfolio = portfolio_from_json((*body)["portfolio"]);
      } else if (workspace_.portfolio()) {
        portfolio = *workspace_.portfolio();
      } else {
        return reply_error(res, 400, "no portfolio given and none configured");
      }
    } catch (const std::exception& e) {
      return reply_error(res, 400, e.what());
    }
    auto entry = std::make_shared<Entry>();
    const std::string id = "s" + std::to_string(next_id_++);
    entry->session = orchestrator_.start_session(id, std::move(portfolio));
    const auto& dir = workspace_.config().session_log_dir;
    if (!dir.empty()) {
      std::filesystem::create_directories(dir);
      entry->log_path = (std::filesystem::path(dir) / (id + ".jsonl")).string();
      std::ofstream out(entry->log_path, std::ios::trunc);
      write_session_header(out, entry->session);
    }
    const auto positions = entry->session.portfolio.positions.size();
    {
      std::lock_guard lock(sessions_mutex_);
      sessions_.emplace(id, std::move(entry));
    }
    reply_json(res, 200, {{"session_id", id}, {"positions", positions}});
  });

  server.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto entry = find(req.matches[1]);
    if (!entry) return reply_error(res, 404, "unknown session");
    std::unique_lock lock(entry->busy, std::try_to_lock);
    if (!lock.owns_lock()) return reply_error(res, 409, "a message is in flight for this session");
    reply_json(res, 200, transcript(entry->session));
  });

  server.Post(R"(/sessions/([^/]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
    auto entry = find(req.matches[1]);
    if (!entry) return reply_error(res, 404, "unknown session");
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!body->contains("text") || !(*body)["text"].is_string() || text::trim((*body)["text"].get<std::string>()).empty()) {
      return reply_error(res, 400, "body needs a non-empty \"text\" string");
    }
    std::unique_lock lock(entry->busy, std::try_to_lock);
    if (!lock.owns_lock()) return reply_error(res, 409, "a message is already in flight for this session");
    std::string stream;
    try {
      orchestrator_.handle(entry->session, (*body)["text"].get<std::string>(),
                           [&](const AgentEvent& e) { stream += format_sse(e); });
    } catch (const BackendUnavailable& e) {
      return reply_error(res, 503, e.what());
    } catch (const ToolCallRejected& e) {
      return reply_error(res, 502, e.what(), {{"problems", e.problems()}});
    }
    if (!entry->log_path.empty()) {
      std::ofstream out(entry->log_path, std::ios::app);
      append_turn(out, entry->session.turns.back());
    }
    res.status = 200;
    res.set_header("Cache-Control", "no-cache");
    res.set_content(stream, "text/event-stream");
  });

  server.Get(R"(/graph/nodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!workspace_.graph()) return reply_error(res, 404, "no graph loaded");
    try {
      reply_json(res, 200, node_view(workspace_, req.matches[1].str()));
    } catch (const GraphError& e) {
      reply_error(res, 404, e.what());
    }
  });

  server.Post("/traverse", [this](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req, res);
    if (!body) return;
    if (!workspace_.graph()) return reply_error(res, 404, "no graph loaded");
    std::vector<std::string> mentions;
    TraversalConfig config = workspace_.config().traversal;
    try {
      records::require_known_fields(*body, {"mentions", "overrides"}, "traverse request");
      const json& m = body->value("mentions", json());
      if (!m.is_array() || m.empty()) throw std::invalid_argument("\"mentions\" must be a non-empty array of strings");
      for (const auto& v : m) {
        if (!v.is_string() || v.get<std::string>().empty()) throw std::invalid_argument("mentions must be non-empty strings");
        mentions.push_back(v.get<std::string>());
      }
      if (body->contains("overrides")) apply_traversal_overrides(config, (*body)["overrides"]);
    } catch (const std::exception& e) {
      return reply_error(res, 400, e.what());
    }
    json out = to_json(run_traversal(workspace_, mentions, config));
    out["config"] = to_json(config);
    reply_json(res, 200, out);
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    } catch (...) {
      reply_error(res, 500, "internal error");
    }
  });
}

int ChatService::bind(const std::string& host, int port) {
  if (!server_) {
    server_ = std::make_unique<httplib::Server>();
    mount(*server_);
  }
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  return port_;
}

void ChatService::serve() {
  if (server_) server_->listen_after_bind();
}

bool ChatService::listen(const std::string& host, int port) {
  if (bind(host, port) < 0) return false;
  return server_->listen_after_bind();
}

void ChatService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace chainsight
