#include "rmcontrast/endpoints.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace rmcontrast {

using nlohmann::json;

const ModelEndpoint& EndpointSet::model(const std::string& id) const {
  for (const auto& m : models) {
    if (m.id == id) return m;
  }
  throw Error(ErrorKind::configuration, fmt::format("no reward endpoint named '{}'", id));
}

void EndpointSet::validate() const {
  chat.validate();
  if (embedding) embedding->validate();
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].id.empty()) throw Error(ErrorKind::configuration, "reward endpoint without id");
    models[i].config.validate();
    if (i > 0 && models[i - 1].id == models[i].id) {
      throw Error(ErrorKind::configuration, fmt::format("duplicate model id '{}'", models[i].id));
    }
  }
}

EndpointConfig endpoint_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::configuration, "endpoint entry must be an object");
  EndpointConfig c;
  try {
    c.base_url = j.at("base_url").get<std::string>();
    c.model_name = j.value("model", std::string{});
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.temperature = j.value("temperature", c.temperature);
    c.auth_token_env = j.value("auth_token_env", std::string{});
    c.backoff_initial = std::chrono::milliseconds(j.value("backoff_ms", c.backoff_initial.count()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, fmt::format("endpoint entry: {}", e.what()));
  }
  c.validate();
  return c;
}

json endpoint_config_to_json(const EndpointConfig& c) {
  return {{"base_url", redact_url(c.base_url)},
          {"model", c.model_name},
          {"timeout_seconds", c.timeout_seconds},
          {"max_retries", c.max_retries},
          {"temperature", c.temperature},
          {"auth_token_env", c.auth_token_env},
          {"backoff_ms", c.backoff_initial.count()}};
}

EndpointSet endpoints_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorKind::configuration, "endpoints file must hold an object");
  EndpointSet set;
  if (!j.contains("chat")) throw Error(ErrorKind::configuration, "endpoints file has no chat entry");
  set.chat = endpoint_config_from_json(j.at("chat"));
  if (j.contains("embedding") && !j.at("embedding").is_null()) {
    set.embedding = endpoint_config_from_json(j.at("embedding"));
  }
  if (!j.contains("models") || !j.at("models").is_object() || j.at("models").empty()) {
    throw Error(ErrorKind::configuration, "endpoints file needs a non-empty models object");
  }
  for (const auto& [id, entry] : j.at("models").items()) {
    ModelEndpoint m{id, endpoint_config_from_json(entry), std::nullopt};
    if (entry.contains("scalarisation")) {
      try {
        m.scalarisation = ScalarisationSpec{entry.at("scalarisation").get<std::vector<double>>()};
      } catch (const json::exception& e) {
        throw Error(ErrorKind::configuration, fmt::format("model {}: scalarisation: {}", id, e.what()));
      }
    }
    set.models.push_back(std::move(m));
  }
  std::sort(set.models.begin(), set.models.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  if (j.contains("cache_dir")) {
    std::filesystem::path dir = j.at("cache_dir").get<std::string>();
    set.cache_dir = dir.is_relative() && !base_dir.empty() ? base_dir / dir : dir;
  }
  set.fixture_markers = j.value("fixture_markers", false);
  set.validate();
  return set;
}

EndpointSet load_endpoints(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::configuration, fmt::format("cannot open {}", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, fmt::format("{}: {}", file.string(), e.what()));
  }
  return endpoints_from_json(j, file.parent_path());
}

json endpoints_to_json(const EndpointSet& set) {
  json models = json::object();
  for (const auto& m : set.models) {
    json entry = endpoint_config_to_json(m.config);
    if (m.scalarisation) entry["scalarisation"] = m.scalarisation->weights;
    models[m.id] = std::move(entry);
  }
  json j = {{"chat", endpoint_config_to_json(set.chat)},
            {"models", std::move(models)},
            {"cache_dir", set.cache_dir.string()},
            {"fixture_markers", set.fixture_markers}};
  j["embedding"] = set.embedding ? endpoint_config_to_json(*set.embedding) : json(nullptr);
  return j;
}

std::string redact_url(const std::string& url) {
  const auto scheme = url.find("://");
  const std::size_t start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', start);
  const auto at = url.rfind('@', slash == std::string::npos ? url.size() : slash);
  if (at == std::string::npos || at < start) return url;
  return url.substr(0, start) + "***" + url.substr(at);
}

}  // namespace rmcontrast
