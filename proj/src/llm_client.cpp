#include "chainsight/llm_client.hpp"

#include <httplib.h>

#include <regex>

namespace chainsight {

ChatCompletionsBackend::ChatCompletionsBackend(BackendConfig config) : config_(std::move(config)) {
  static const std::regex kUrl(R"(^(https?)://([^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, kUrl)) {
    throw std::invalid_argument("chat endpoint must be an http(s) URL: '" + config_.url + "'");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (m[1] == "https") throw std::invalid_argument("built without TLS support; use an http endpoint");
#endif
  origin_ = m[1].str() + "://" + m[2].str();
  path_ = m[3].matched ? m[3].str() : "/v1/chat/completions";
}

json ChatCompletionsBackend::request_body(const CompletionRequest& request, const std::string& model) {
  json body{{"model", model}, {"messages", request.messages}, {"temperature", 0}};
  if (!request.tools.empty()) body["tools"] = request.tools;
  return body;
}

Completion ChatCompletionsBackend::parse_response(const json& body) {
  const auto* choices = body.is_object() && body.contains("choices") ? &body["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty() || !(*choices)[0].contains("message")) {
    throw BackendError("chat response has no message");
  }
  const json& message = (*choices)[0]["message"];
  Completion c;
  if (message.contains("content") && message["content"].is_string()) c.text = message["content"].get<std::string>();
  if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
    for (const auto& call : message["tool_calls"]) {
      ToolCallStub stub;
      stub.id = call.value("id", "");
      const json fn = call.value("function", json::object());
      stub.name = fn.value("name", "");
      const json args = fn.value("arguments", json());
      if (args.is_string()) {
        stub.arguments = json::parse(args.get<std::string>(), nullptr, false);
        if (stub.arguments.is_discarded()) stub.arguments = nullptr;
      } else if (args.is_object()) {
        stub.arguments = args;
      }
      c.tool_calls.push_back(std::move(stub));
    }
  }
  return c;
}

Completion ChatCompletionsBackend::complete(const CompletionRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_bearer_token_auth(config_.key);
  const auto res = client.Post(path_, request_body(request, config_.model).dump(), "application/json");
  if (!res) throw BackendError("chat endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BackendError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  const json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw BackendError("chat endpoint returned a non-JSON body");
  return parse_response(body);
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  if (config.mode == BackendMode::Live) return std::make_unique<ChatCompletionsBackend>(config);
  if (config.scenario.empty()) throw std::invalid_argument("mock backend needs a scenario file");
  return std::make_unique<ScenarioBackend>(ScenarioBackend::from_file(config.scenario));
}

}  // namespace chainsight
