#include <cstdlib>

#include "httplib.h"
#include "kggen/errors.hpp"
#include "kggen/mock_backend.hpp"
#include "kggen/model.hpp"

namespace kggen {

using nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must start with http:// or https://: " + url);
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + scheme);
  auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

RemoteChatBackend::RemoteChatBackend(const ModelConfig& config) : config_(config) {
  config_.validate();
  split_url(config_.endpoint);
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("environment variable " + config_.api_key_env + " is not set");
  }
  api_key_ = key;
}

std::string RemoteChatBackend::complete(const StructuredRequest& request) {
  auto [base, path] = split_url(config_.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(30);
  client.set_read_timeout(300);
  client.set_bearer_token_auth(api_key_);

  json messages = json::array({{{"role", "system"}, {"content", request.instruction}}});
  if (!request.user_message.empty()) {
    messages.push_back({{"role", "user"}, {"content", request.user_message}});
  }
  json body{{"model", config_.model_name}, {"temperature", config_.temperature}, {"messages", messages}};

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw BackendError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded()) throw BackendError("chat endpoint returned a non-JSON body");
  try {
    const json& content = reply.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected chat response shape: ") + e.what());
  }
}

std::shared_ptr<ModelBackend> make_backend(const ModelConfig& config, const std::string& mock_script_path) {
  config.validate();
  if (config.backend == BackendKind::Remote) return std::make_shared<RemoteChatBackend>(config);
  auto mock = std::make_shared<MockBackend>();
  if (!mock_script_path.empty()) mock->load_script_file(mock_script_path);
  return mock;
}

}  // namespace kggen
