#include "rmcontrast/gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rmcontrast/digest.hpp"

namespace rmcontrast {

using nlohmann::json;

std::string_view to_string(EndpointKind k) {
  switch (k) {
    case EndpointKind::chat: return "chat";
    case EndpointKind::reward: return "reward";
    case EndpointKind::embedding: return "embedding";
  }
  return "chat";
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorKind::configuration, "endpoint without base_url");
  if (!(timeout_seconds > 0)) {
    throw Error(ErrorKind::configuration,
                fmt::format("{}: timeout must be positive", base_url));
  }
  if (max_retries < 0) {
    throw Error(ErrorKind::configuration, fmt::format("{}: max_retries must be >= 0", base_url));
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorKind::configuration,
                fmt::format("{}: temperature {} outside [0, 2]", base_url, temperature));
  }
}

namespace {

json cache_request(EndpointKind kind, const EndpointConfig& config, const json& body) {
  return {{"kind", to_string(kind)},
          {"base_url", config.base_url},
          {"model", config.model_name},
          {"temperature", kind == EndpointKind::chat ? config.temperature : 0.0},
          {"body", body}};
}

}  // namespace

CacheKey CacheKey::compute(EndpointKind kind, const EndpointConfig& config, const json& body) {
  // nlohmann::json objects are key-sorted and dump() is compact, which gives
  // the canonical form.
  return CacheKey{sha256_hex(cache_request(kind, config, body).dump())};
}

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  const auto scheme = base_url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = base_url.find('/', host_start);
  if (slash == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, slash), prefix};
}

HttpResponse OfflineTransport::post(const std::string&, const std::string&, const std::string&,
                                    const HttpHeaders&, double) {
  ++attempts_;
  return {0, "network disabled"};
}

ResponseCache::ResponseCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  if (!directory_.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec) {
      throw Error(ErrorKind::io, fmt::format("{}: cannot create cache directory: {}",
                                             directory_.string(), ec.message()));
    }
  }
}

std::filesystem::path ResponseCache::path_for(const CacheKey& key) const {
  return directory_ / (key.digest + ".json");
}

std::optional<HttpResponse> ResponseCache::get(const CacheKey& key) {
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key.digest); it != memory_.end()) return it->second;
  if (directory_.empty()) return std::nullopt;
  std::ifstream in(path_for(key));
  if (!in) return std::nullopt;
  json envelope;
  try {
    envelope = json::parse(in);
    HttpResponse r{envelope.at("response").at("status").get<int>(),
                   envelope.at("response").at("body").get<std::string>()};
    memory_.emplace(key.digest, r);
    return r;
  } catch (const json::exception& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", path_for(key).string(), e.what());
    return std::nullopt;
  }
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void ResponseCache::put(const CacheKey& key, const json& request, const HttpResponse& response) {
  std::lock_guard lock(mutex_);
  memory_[key.digest] = response;
  if (directory_.empty()) return;
  const json envelope = {{"request", request},
                         {"response", {{"status", response.status}, {"body", response.body}}},
                         {"timestamp", utc_timestamp()}};
  const auto target = path_for(key);
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, fmt::format("{}: cannot write cache entry", tmp.string()));
    out << envelope.dump(2) << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    throw Error(ErrorKind::io,
                fmt::format("{}: cannot store cache entry: {}", target.string(), ec.message()));
  }
}

Gateway::Gateway(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache,
                 GatewayOptions options)
    : transport_(std::move(transport)), cache_(std::move(cache)), options_(options) {
  if (!cache_) cache_ = std::make_shared<ResponseCache>();
}

GatewayStats Gateway::stats() const {
  return {network_requests_.load(), cache_hits_.load(), retries_.load()};
}

std::vector<std::string> Gateway::missing_digests() const {
  std::lock_guard lock(mutex_);
  return {missing_.begin(), missing_.end()};
}

namespace {

bool transient(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

HttpResponse Gateway::fetch_uncached(const EndpointConfig& config, const std::string& path,
                                     const std::string& payload) {
  HttpHeaders headers;
  if (!config.auth_token_env.empty()) {
    if (const char* token = std::getenv(config.auth_token_env.c_str())) {
      headers.emplace_back("Authorization", fmt::format("Bearer {}", token));
    }
  }
  HttpResponse last;
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0) {
      ++retries_;
      std::this_thread::sleep_for(config.backoff_initial * (1LL << std::min(attempt - 1, 20)));
    }
    ++network_requests_;
    last = transport_->post(config.base_url, path, payload, headers, config.timeout_seconds);
    if (!transient(last.status)) return last;
    spdlog::debug("{}{}: attempt {} failed with status {}", config.base_url, path, attempt + 1,
                  last.status);
  }
  throw Error(ErrorKind::transport,
              fmt::format("{}{}: giving up after {} attempts (last status {}: {})", config.base_url,
                          path, config.max_retries + 1, last.status, last.body));
}

HttpResponse Gateway::fetch(EndpointKind kind, const EndpointConfig& config,
                            const std::string& path, const json& body) {
  config.validate();
  const auto key = CacheKey::compute(kind, config, body);

  auto check = [&](const HttpResponse& r) -> HttpResponse {
    if (r.status < 200 || r.status >= 300) {
      throw Error(ErrorKind::transport, fmt::format("{}{}: HTTP {}: {}", config.base_url, path,
                                                    r.status, r.body));
    }
    return r;
  };

  std::promise<HttpResponse> promise;
  std::shared_future<HttpResponse> pending;
  std::optional<HttpResponse> hit;
  {
    // A finished request is stored before it leaves inflight_, so checking
    // both under the lock never misses it.
    std::lock_guard lock(mutex_);
    if (auto it = inflight_.find(key.digest); it != inflight_.end()) {
      pending = it->second;
    } else if (!(hit = cache_->get(key))) {
      inflight_.emplace(key.digest, promise.get_future().share());
    }
  }
  if (hit) {
    ++cache_hits_;
    return check(*hit);
  }
  if (pending.valid()) {
    ++cache_hits_;
    return check(pending.get());
  }

  auto finish = [&] {
    std::lock_guard lock(mutex_);
    inflight_.erase(key.digest);
  };

  HttpResponse r;
  try {
    if (options_.cache_only) {
      {
        std::lock_guard lock(mutex_);
        missing_.insert(key.digest);
      }
      throw Error(ErrorKind::replay_incomplete,
                  fmt::format("cache miss for {} request {} in cache-only mode", to_string(kind),
                              key.digest));
    }
    r = fetch_uncached(config, path, body.dump());
    // Non-transient client errors are cached too, so failures replay faithfully.
    cache_->put(key, cache_request(kind, config, body), r);
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
  promise.set_value(r);
  finish();
  return check(r);
}

std::string Gateway::chat(const EndpointConfig& config,
                          const std::optional<std::string>& system_text,
                          const std::string& user_text, std::optional<int> seed) {
  if (user_text.empty()) throw Error(ErrorKind::invalid_input, "chat: empty user message");
  json messages = json::array();
  if (system_text) messages.push_back({{"role", "system"}, {"content", *system_text}});
  messages.push_back({{"role", "user"}, {"content", user_text}});
  json body = {{"model", config.model_name},
               {"messages", std::move(messages)},
               {"temperature", config.temperature}};
  if (seed) body["seed"] = *seed;
  const auto r = fetch(EndpointKind::chat, config, "/v1/chat/completions", body);
  std::string text;
  try {
    const auto j = json::parse(r.body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_null()) text = content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::transport,
                fmt::format("{}: malformed chat completion: {}", config.base_url, e.what()));
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorKind::empty_generation,
                fmt::format("{}: empty completion from model {}", config.base_url, config.model_name));
  }
  return text;
}

double scalarise(const std::vector<double>& rewards, const ScalarisationSpec& spec) {
  if (rewards.size() != spec.weights.size()) {
    throw Error(ErrorKind::configuration,
                fmt::format("reward vector has {} dimensions but scalarisation has {} weights",
                            rewards.size(), spec.weights.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) sum += spec.weights[i] * rewards[i];
  return sum;
}

RewardValue Gateway::score(const EndpointConfig& config,
                           const std::optional<ScalarisationSpec>& scalarisation,
                           const std::string& prompt, const std::string& response) {
  if (prompt.empty() || response.empty()) {
    throw Error(ErrorKind::invalid_input, "score: prompt and response must be non-empty");
  }
  const json body = {{"prompt", prompt}, {"response", response}};
  const auto r = fetch(EndpointKind::reward, config, "/score", body);
  json j;
  try {
    j = json::parse(r.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::transport,
                fmt::format("{}: malformed reward response: {}", config.base_url, e.what()));
  }
  if (auto it = j.find("reward"); it != j.end() && it->is_number()) {
    return RewardValue{it->get<double>(), std::nullopt, false};
  }
  if (auto it = j.find("rewards"); it != j.end() && it->is_array()) {
    std::vector<double> v;
    for (const auto& x : *it) {
      if (!x.is_number()) {
        throw Error(ErrorKind::transport,
                    fmt::format("{}: non-numeric entry in reward vector", config.base_url));
      }
      v.push_back(x.get<double>());
    }
    if (!scalarisation) {
      throw Error(ErrorKind::configuration,
                  fmt::format("{}: endpoint returned a reward vector but no scalarisation is "
                              "configured for model {}",
                              config.base_url, config.model_name));
    }
    const double s = scalarise(v, *scalarisation);
    return RewardValue{s, std::move(v), true};
  }
  throw Error(ErrorKind::transport,
              fmt::format("{}: reward response has neither 'reward' nor 'rewards'", config.base_url));
}

std::vector<double> Gateway::embed(const EndpointConfig& config, const std::string& text) {
  if (text.empty()) throw Error(ErrorKind::invalid_input, "embed: empty text");
  const json body = {{"model", config.model_name}, {"input", text}};
  const auto r = fetch(EndpointKind::embedding, config, "/v1/embeddings", body);
  std::vector<double> v;
  try {
    v = json::parse(r.body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::transport,
                fmt::format("{}: malformed embedding response: {}", config.base_url, e.what()));
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  const double norm = std::sqrt(norm_sq);
  if (v.empty() || !(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorKind::degenerate_embedding,
                fmt::format("{}: degenerate embedding (norm {}) for text of {} bytes",
                            config.base_url, norm, text.size()));
  }
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace rmcontrast
