#pragma once

// HTTP surface for chat sessions and graph queries.
//
//   POST /sessions                {"portfolio": [...]}?   -> {"session_id", "positions"}
//   POST /sessions/{id}/messages  {"text": "..."}         -> text/event-stream
//   GET  /sessions/{id}                                    -> transcript
//   GET  /graph/nodes/{id}                                 -> node + one-hop neighborhood
//   POST /traverse                {"mentions": [...], "overrides": {...}}
//   GET  /health
//
// Message events: triage, tool_call, tool_result, answer, references, turn.
// Errors are {"error": "..."} with 400, 404, 409 (message already in flight
// for the session), 502 (tool calls rejected) or 503 (backend unavailable).

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "chainsight/agents.hpp"
#include "chainsight/app.hpp"

namespace httplib {
class Server;
}

namespace chainsight {

/// "event: <name>\ndata: <json>\n\n".
std::string format_sse(const AgentEvent& event);

/// Inverse of format_sse over a whole stream. Throws std::invalid_argument.
std::vector<AgentEvent> parse_sse(std::string_view stream);

class ChatService {
 public:
  ChatService(const Workspace& workspace, ChatBackend& backend, OrchestratorOptions options = {});
  ~ChatService();

  ChatService(const ChatService&) = delete;
  ChatService& operator=(const ChatService&) = delete;

  /// Registers every route on `server`.
  void mount(httplib::Server& server);

  /// Binds and serves until stop(). Port 0 picks a free port; see port().
  bool listen(const std::string& host, int port);
  /// Binds without serving; then call serve(). Returns the bound port or -1.
  int bind(const std::string& host, int port);
  void serve();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Entry {
    std::mutex busy;
    Session session;
    std::string log_path;
  };

  std::shared_ptr<Entry> find(const std::string& id);

  const Workspace& workspace_;
  Orchestrator orchestrator_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::atomic<int> next_id_{1};
  int port_ = -1;
};

}  // namespace chainsight
