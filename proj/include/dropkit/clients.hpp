#pragma once

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <unordered_map>
#include <vector>

namespace dropkit {

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 512;
  /// Bumped on each retry so re-asks are distinct requests (and distinct cache keys).
  std::uint64_t seed = 0;

  std::string canonical() const;
};

/// A text-completion model. Implementations return text or throw TransportError;
/// an empty prompt is a valid request.
class TextModelClient {
public:
  virtual ~TextModelClient() = default;
  virtual std::string complete(const std::string& prompt, const DecodingParams& params) = 0;
  /// Stable identity used in cache keys and run manifests.
  virtual std::string tag() const = 0;
};

/// Maps text to a fixed-dimension feature vector h.
class EmbeddingClient {
public:
  virtual ~EmbeddingClient() = default;
  virtual Eigen::VectorXd embed(const std::string& text) = 0;
  virtual int dimension() const = 0;
  virtual std::string tag() const = 0;
};

/// Memoizes responses keyed by (client tag, SHA-256 of params + prompt). With a directory,
/// entries persist across runs as one file per key. Thread-safe.
class CachingTextClient : public TextModelClient {
public:
  explicit CachingTextClient(std::shared_ptr<TextModelClient> inner,
                             std::optional<std::filesystem::path> directory = std::nullopt);

  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return inner_->tag(); }

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::string key(const std::string& prompt, const DecodingParams& params) const;

private:
  std::shared_ptr<TextModelClient> inner_;
  std::optional<std::filesystem::path> directory_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::string> memory_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.example.com
  std::string api_key;
  std::string model;
  std::string path;      // request path; defaults depend on the client
  int timeout_seconds = 60;
};

/// Chat-completions style endpoint: POST {model, messages:[{role:user, content}]} and read
/// choices[0].message.content.
class HttpChatClient : public TextModelClient {
public:
  explicit HttpChatClient(HttpEndpoint endpoint);
  std::string complete(const std::string& prompt, const DecodingParams& params) override;
  std::string tag() const override { return "http:" + endpoint_.model; }

private:
  HttpEndpoint endpoint_;
};

/// Embeddings endpoint: POST {model, input} and read data[0].embedding.
class HttpEmbeddingClient : public EmbeddingClient {
public:
  HttpEmbeddingClient(HttpEndpoint endpoint, int dimension);
  Eigen::VectorXd embed(const std::string& text) override;
  int dimension() const override { return dimension_; }
  std::string tag() const override { return "http-embed:" + endpoint_.model; }

private:
  HttpEndpoint endpoint_;
  int dimension_;
};

/// Applies `fn` to every item with at most `limit` calls in flight. Results come back in
/// input order. The first exception (by input position) is rethrown after all workers join.
template <typename In, typename Fn>
auto parallel_map(const std::vector<In>& items, std::size_t limit, Fn fn)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
  using Out = std::invoke_result_t<Fn&, const In&>;
  std::vector<std::optional<Out>> slots(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        slots[i].emplace(fn(items[i]));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(limit, items.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<Out> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace dropkit
