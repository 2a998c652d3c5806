#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rmcontrast/core.hpp"

namespace rmcontrast {

enum class EndpointKind { chat, reward, embedding };

std::string_view to_string(EndpointKind k);

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string model_name;
  double timeout_seconds = 60.0;
  int max_retries = 3;
  double temperature = 0.0;  // chat only
  std::string auth_token_env;
  std::chrono::milliseconds backoff_initial{250};

  void validate() const;

  friend bool operator==(const EndpointConfig&, const EndpointConfig&) = default;
};

// Weighted-sum scalarisation of a multi-dimensional reward.
struct ScalarisationSpec {
  std::vector<double> weights;

  friend bool operator==(const ScalarisationSpec&, const ScalarisationSpec&) = default;
};

struct CacheKey {
  std::string digest;  // hex SHA-256

  // Digest of (kind, base_url, model_name, temperature, canonical body).
  static CacheKey compute(EndpointKind kind, const EndpointConfig& config,
                          const nlohmann::json& body);

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

struct HttpResponse {
  int status = 0;  // 0: no response (connection failure or timeout)
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const std::string& body, const HttpHeaders& headers,
                            double timeout_seconds) = 0;
};

// cpp-httplib backed transport.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const HttpHeaders& headers, double timeout_seconds) override;
};

// Transport for replay: any attempt to reach the network fails.
class OfflineTransport final : public Transport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path, const std::string& body,
                    const HttpHeaders& headers, double timeout_seconds) override;
  std::size_t attempts() const { return attempts_.load(); }

 private:
  std::atomic<std::size_t> attempts_{0};
};

// One file per digest under the cache directory, holding the JSON envelope
// {request, response, timestamp}. An empty directory keeps entries in memory.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory = {});

  std::optional<HttpResponse> get(const CacheKey& key);
  void put(const CacheKey& key, const nlohmann::json& request, const HttpResponse& response);
  std::filesystem::path path_for(const CacheKey& key) const;
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  std::mutex mutex_;
  std::map<std::string, HttpResponse> memory_;
};

struct GatewayOptions {
  // Never contact the network; misses are collected for missing_digests().
  bool cache_only = false;
};

struct GatewayStats {
  std::size_t network_requests = 0;
  std::size_t cache_hits = 0;
  std::size_t retries = 0;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache,
          GatewayOptions options = {});

  // First completion's text. `seed`, when given, is forwarded in the request
  // body and so distinguishes otherwise identical requests.
  std::string chat(const EndpointConfig& config, const std::optional<std::string>& system_text,
                   const std::string& user_text, std::optional<int> seed = std::nullopt);

  RewardValue score(const EndpointConfig& config,
                    const std::optional<ScalarisationSpec>& scalarisation,
                    const std::string& prompt, const std::string& response);

  // Unit-L2 embedding.
  std::vector<double> embed(const EndpointConfig& config, const std::string& text);

  GatewayStats stats() const;
  std::vector<std::string> missing_digests() const;

 private:
  HttpResponse fetch(EndpointKind kind, const EndpointConfig& config, const std::string& path,
                     const nlohmann::json& body);
  HttpResponse fetch_uncached(const EndpointConfig& config, const std::string& path,
                              const std::string& payload);

  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  GatewayOptions options_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<HttpResponse>> inflight_;
  std::set<std::string> missing_;
  std::atomic<std::size_t> network_requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> retries_{0};
};

// Applies a weighted-sum scalarisation; throws Error{configuration} on a
// dimension mismatch.
double scalarise(const std::vector<double>& rewards, const ScalarisationSpec& spec);

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& base_url);

}  // namespace rmcontrast
