// Eigen must precede httplib: <resolv.h> defines a macro that collides with Eigen internals.
#include "dropkit/clients.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dropkit/error.hpp"
#include "dropkit/util.hpp"

namespace dropkit {

using nlohmann::json;

std::string DecodingParams::canonical() const {
  std::ostringstream out;
  out << "temperature=" << temperature << ";max_tokens=" << max_tokens << ";seed=" << seed;
  return out.str();
}

CachingTextClient::CachingTextClient(std::shared_ptr<TextModelClient> inner,
                                     std::optional<std::filesystem::path> directory)
    : inner_(std::move(inner)), directory_(std::move(directory)) {
  if (directory_) std::filesystem::create_directories(*directory_);
}

std::string CachingTextClient::key(const std::string& prompt, const DecodingParams& params) const {
  return sha256_hex(inner_->tag() + '\n' + params.canonical() + '\n' + prompt);
}

std::string CachingTextClient::complete(const std::string& prompt, const DecodingParams& params) {
  const auto k = key(prompt, params);
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(k); it != memory_.end()) {
      ++hits_;
      return it->second;
    }
    if (directory_) {
      auto path = *directory_ / (k + ".txt");
      if (std::filesystem::exists(path)) {
        auto text = read_file(path.string());
        memory_.emplace(k, text);
        ++hits_;
        return text;
      }
    }
  }
  // The inner call runs unlocked so concurrent misses proceed in parallel.
  auto response = inner_->complete(prompt, params);
  ++misses_;
  std::lock_guard lock(mutex_);
  auto [it, inserted] = memory_.emplace(k, response);
  if (inserted && directory_) {
    std::ofstream out(*directory_ / (k + ".txt"), std::ios::binary);
    out << response;
  }
  return it->second;
}

namespace {

json post_json(const HttpEndpoint& endpoint, const std::string& default_path, const json& body) {
  httplib::Client client(endpoint.base_url);
  if (!client.is_valid()) throw TransportError("invalid endpoint URL '" + endpoint.base_url + "'");
  client.set_connection_timeout(endpoint.timeout_seconds, 0);
  client.set_read_timeout(endpoint.timeout_seconds, 0);
  httplib::Headers headers;
  if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);
  const auto& path = endpoint.path.empty() ? default_path : endpoint.path;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + endpoint.base_url + path + " failed: " +
                                 httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + endpoint.base_url + path);
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw TransportError("non-JSON response from " + endpoint.base_url + path);
  }
}

}  // namespace

HttpChatClient::HttpChatClient(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpChatClient::complete(const std::string& prompt, const DecodingParams& params) {
  json body = {{"model", endpoint_.model},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
               {"temperature", params.temperature},
               {"max_tokens", params.max_tokens},
               {"seed", params.seed}};
  auto reply = post_json(endpoint_, "/v1/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("chat response without choices[0].message.content");
  }
}

HttpEmbeddingClient::HttpEmbeddingClient(HttpEndpoint endpoint, int dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {}

Eigen::VectorXd HttpEmbeddingClient::embed(const std::string& text) {
  auto reply = post_json(endpoint_, "/v1/embeddings", {{"model", endpoint_.model}, {"input", text}});
  std::vector<double> values;
  try {
    values = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception&) {
    throw TransportError("embedding response without data[0].embedding");
  }
  if (static_cast<int>(values.size()) != dimension_)
    throw DimensionMismatch("embedding endpoint returned dimension " + std::to_string(values.size()) +
                            ", expected " + std::to_string(dimension_));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace dropkit
