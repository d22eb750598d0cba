#pragma once

// OpenAI-compatible chat-completions backend.

#include <memory>
#include <string>

#include "chainsight/agents.hpp"
#include "chainsight/app.hpp"

namespace chainsight {

class ChatCompletionsBackend final : public ChatBackend {
 public:
  /// Throws std::invalid_argument for a malformed URL, or an https URL when
  /// built without TLS support.
  explicit ChatCompletionsBackend(BackendConfig config);

  Completion complete(const CompletionRequest& request) override;

  /// Request body: model, messages, temperature 0 and tools when offered.
  static json request_body(const CompletionRequest& request, const std::string& model);
  /// First choice of a response body. Tool-call arguments arrive as a JSON
  /// string; unparsable ones become null. Throws BackendError on a body
  /// without a message.
  static Completion parse_response(const json& body);

 private:
  BackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

/// Mock (scenario file) or live backend per the config.
std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

}  // namespace chainsight
