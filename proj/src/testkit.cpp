#include "rmcontrast/testkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "rmcontrast/metrics.hpp"

namespace rmcontrast::testkit {

using nlohmann::json;
namespace fs = std::filesystem;

ToyRewardSpec ToyRewardSpec::defaults() {
  ToyRewardSpec spec;
  spec.term_weights = {
      {"harm_terms", -1.0}, {"rude_terms", -0.5}, {"polite_terms", 0.25}, {"detail_terms", 0.1}};
  spec.lexicons = {
      {"harm_terms", {"kill", "hurt", "weapon", "poison", "attack", "hate", "steal", "destroy"}},
      {"rude_terms", {"stupid", "idiot", "dumb", "shut", "useless", "pathetic"}},
      {"polite_terms", {"please", "thanks", "thank", "kindly", "sorry", "appreciate", "glad"}},
      {"detail_terms", {"specifically", "example", "because", "details", "steps", "instance", "precisely"}},
  };
  return spec;
}

void ToyRewardSpec::validate() const {
  if (!std::isfinite(length_weight)) throw Error(ErrorKind::configuration, "length_weight is not finite");
  std::set<std::string> seen;
  for (const auto& [name, weight] : term_weights) {
    if (!std::isfinite(weight)) {
      throw Error(ErrorKind::configuration, fmt::format("lexicon {}: weight is not finite", name));
    }
    if (!lexicons.contains(name)) {
      throw Error(ErrorKind::configuration, fmt::format("lexicon {} has a weight but no terms", name));
    }
  }
  for (const auto& [name, terms] : lexicons) {
    if (!term_weights.contains(name)) {
      throw Error(ErrorKind::configuration, fmt::format("lexicon {} has no weight", name));
    }
    for (const auto& t : terms) {
      if (t.empty() || case_fold(t) != t) {
        throw Error(ErrorKind::configuration, fmt::format("lexicon {}: term '{}' is not lowercase", name, t));
      }
      if (!seen.insert(t).second) {
        throw Error(ErrorKind::configuration, fmt::format("term '{}' is in more than one lexicon", t));
      }
    }
  }
}

const std::vector<std::string>& ToyRewardSpec::terms(const std::string& lexicon) const {
  const auto it = lexicons.find(lexicon);
  if (it == lexicons.end()) throw Error(ErrorKind::lookup, fmt::format("no lexicon {}", lexicon));
  return it->second;
}

std::vector<std::string> toy_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& token : word_tokenize(text)) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    const auto punct = [](char ch) { return std::ispunct(static_cast<unsigned char>(ch)) != 0; };
    while (begin < end && punct(token[begin])) ++begin;
    while (end > begin && punct(token[end - 1])) --end;
    if (begin < end) out.push_back(token.substr(begin, end - begin));
  }
  return out;
}

double toy_reward(const ToyRewardSpec& spec, std::string_view, std::string_view response) {
  const auto tokens = toy_tokens(response);
  double reward = spec.length_weight * static_cast<double>(std::min(tokens.size(), spec.length_cap));
  for (const auto& [name, terms] : spec.lexicons) {
    const double weight = spec.term_weights.at(name);
    std::size_t hits = 0;
    for (const auto& t : tokens) {
      if (std::find(terms.begin(), terms.end(), t) != terms.end()) ++hits;
    }
    reward += weight * static_cast<double>(hits);
  }
  return reward;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> hash_embedding(std::string_view text, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (const auto& token : word_tokenize(text)) v[fnv1a64(token) % dim] += 1.0;
  double norm = 0.0;
  for (const double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

namespace {

std::map<std::string, std::string> string_map(const json& j, std::string_view field) {
  if (!j.contains(field)) return {};
  try {
    return j.at(field).get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, fmt::format("fixtures: {}: {}", field, e.what()));
  }
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "[kind k=v ...]" on the first line.
std::optional<std::pair<std::string, std::map<std::string, std::string>>> parse_marker(
    std::string_view prompt) {
  const auto line = prompt.substr(0, prompt.find('\n'));
  if (line.size() < 2 || line.front() != '[' || line.back() != ']') return std::nullopt;
  const auto fields = split(line.substr(1, line.size() - 2), ' ');
  std::map<std::string, std::string> keys;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    const auto eq = fields[i].find('=');
    if (eq == std::string::npos) return std::nullopt;
    keys[fields[i].substr(0, eq)] = fields[i].substr(eq + 1);
  }
  return std::make_pair(fields[0], std::move(keys));
}

}  // namespace

CannedPerturbationSpec CannedPerturbationSpec::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::configuration, "fixtures must be a JSON object");
  CannedPerturbationSpec spec;
  spec.step1 = string_map(j, "step1");
  spec.step2 = string_map(j, "step2");
  spec.discover = string_map(j, "discover");
  if (j.contains("random")) {
    try {
      spec.random = j.at("random").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::configuration, fmt::format("fixtures: random: {}", e.what()));
    }
  }
  spec.validate();
  return spec;
}

CannedPerturbationSpec CannedPerturbationSpec::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::configuration, fmt::format("cannot open {}", file.string()));
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::configuration, fmt::format("{}: {}", file.string(), e.what()));
  }
}

json CannedPerturbationSpec::to_json() const {
  return {{"step1", step1}, {"step2", step2}, {"random", random}, {"discover", discover}};
}

void CannedPerturbationSpec::validate() const {
  const auto check_side = [](const std::string& key, const std::string& side) {
    if (side != "chosen" && side != "rejected") {
      throw Error(ErrorKind::configuration, fmt::format("fixture key '{}': bad side '{}'", key, side));
    }
  };
  const auto check_text = [](const std::string& key, const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorKind::configuration, fmt::format("fixture '{}' has empty text", key));
    }
  };
  for (const auto& [key, text] : step1) {
    check_text(key, text);
    if (key == "default") continue;
    const auto parts = split(key, '/');
    if (parts.size() != 2 || parts[0].empty()) {
      throw Error(ErrorKind::configuration, fmt::format("step1 key '{}' is not <comparison>/<side>", key));
    }
    check_side(key, parts[1]);
  }
  for (const auto& [key, text] : step2) {
    check_text(key, text);
    const auto parts = split(key, '/');
    if (parts.size() != 3 || parts[0].empty() || parts[2].empty()) {
      throw Error(ErrorKind::configuration,
                  fmt::format("step2 key '{}' is not <comparison>/<side>/<attribute>", key));
    }
    check_side(key, parts[1]);
  }
  for (const auto& text : random) check_text("random", text);
  for (const auto& [key, text] : discover) check_text(key, text);
}

std::optional<std::string> CannedPerturbationSpec::respond(std::string_view prompt) const {
  const auto marker = parse_marker(prompt);
  if (!marker) return std::nullopt;
  const auto& [kind, keys] = *marker;
  const auto get = [&](const char* k) {
    const auto it = keys.find(k);
    return it == keys.end() ? std::string{} : it->second;
  };
  const auto find = [](const std::map<std::string, std::string>& m,
                       const std::string& key) -> std::optional<std::string> {
    const auto it = m.find(key);
    if (it == m.end()) return std::nullopt;
    return it->second;
  };
  if (kind == "step1") {
    if (auto r = find(step1, get("comparison") + "/" + get("side"))) return r;
    return find(step1, "default");
  }
  if (kind == "step2") {
    return find(step2, get("comparison") + "/" + get("side") + "/" + get("attribute"));
  }
  if (kind == "random") {
    if (random.empty()) return std::nullopt;
    std::size_t index = 0;
    try {
      index = std::stoul(get("index"));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    return random[index % random.size()];
  }
  if (kind == "discover") {
    if (auto r = find(discover, get("comparison"))) return r;
    return find(discover, "default");
  }
  return std::nullopt;
}

struct MockServer::Impl {
  ToyRewardSpec reward;
  CannedPerturbationSpec canned;
  std::size_t dim;
  httplib::Server server;
};

MockServer::MockServer(ToyRewardSpec reward, CannedPerturbationSpec canned, std::size_t embedding_dim)
    : impl_(std::make_unique<Impl>()) {
  reward.validate();
  canned.validate();
  impl_->reward = std::move(reward);
  impl_->canned = std::move(canned);
  impl_->dim = embedding_dim;

  const auto bad_request = [](httplib::Response& res, const std::string& message) {
    res.status = 400;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  };

  impl_->server.Post("/score", [this, bad_request](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    try {
      const auto body = json::parse(req.body);
      const double r = toy_reward(impl_->reward, body.value("prompt", std::string{}),
                                  body.at("response").get<std::string>());
      res.set_content(json{{"reward", r}}.dump(), "application/json");
    } catch (const json::exception& e) {
      bad_request(res, e.what());
    }
  });

  impl_->server.Post("/v1/chat/completions",
                     [this, bad_request](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::string prompt;
    try {
      const auto body = json::parse(req.body);
      for (const auto& m : body.at("messages")) {
        if (m.at("role") == "user") prompt = m.at("content").get<std::string>();
      }
    } catch (const json::exception& e) {
      bad_request(res, e.what());
      return;
    }
    const auto text = impl_->canned.respond(prompt);
    if (!text) {
      res.status = 404;
      res.set_content(json{{"error", fmt::format("no fixture for '{}'",
                                                 prompt.substr(0, prompt.find('\n')))}}.dump(),
                      "application/json");
      return;
    }
    const json out = {
        {"object", "chat.completion"},
        {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", *text}}}, {"finish_reason", "stop"}}}}};
    res.set_content(out.dump(), "application/json");
  });

  impl_->server.Post("/v1/embeddings", [this, bad_request](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    try {
      const auto body = json::parse(req.body);
      const auto& input = body.at("input");
      const std::string text = input.is_array() ? input.at(0).get<std::string>() : input.get<std::string>();
      const json out = {{"object", "list"},
                        {"data", {{{"index", 0}, {"embedding", hash_embedding(text, impl_->dim)}}}}};
      res.set_content(out.dump(), "application/json");
    } catch (const json::exception& e) {
      bad_request(res, e.what());
    }
  });
}

MockServer::~MockServer() { stop(); }

void MockServer::start(int port) {
  if (thread_.joinable()) throw Error(ErrorKind::configuration, "mock server already started");
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    port_ = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorKind::transport, fmt::format("mock server cannot bind 127.0.0.1:{}", port));
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  spdlog::info("mock endpoints listening on {}", base_url());
}

void MockServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

void MockServer::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const { return fmt::format("http://127.0.0.1:{}", port_); }

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(ErrorKind::io, fmt::format("write failed: {}", path.string()));
}

std::string replace_first(std::string s, std::string_view from, std::string_view to) {
  const auto pos = s.find(from);
  if (pos != std::string::npos) s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

FixturePaths write_planted_fixtures(const fs::path& dir, const std::string& base_url) {
  try {
    fs::create_directories(dir);
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorKind::io, fmt::format("{}: {}", dir.string(), e.code().message()));
  }
  FixturePaths paths{dir / "toy.jsonl",    dir / "registry.json", dir / "fixtures.json",
                     dir / "endpoints.json", dir / "winrate_pairs.jsonl", dir / "cache"};

  const auto& catalog = default_catalog();
  CannedPerturbationSpec canned;
  std::string step1_default;
  for (const auto& a : catalog.attributes()) {
    step1_default += fmt::format("{}: {}, answer\n", a.name, a.name == "harmlessness" ? "help" : "topic");
  }
  canned.step1["default"] = step1_default;

  std::string dataset;
  std::size_t line = 0;
  for (std::size_t i = 0; i < kPlantedComparisons; ++i) {
    if (++line == 5) {
      dataset += json{{"prompt", "Human: Hi there. Assistant: Hello. Human: Tell me more."},
                      {"chosen", "Sure, glad to tell you more."},
                      {"rejected", "No."}}.dump() + "\n";
      ++line;
    }
    const std::string id = fmt::format("toy:{}", line);
    // Toy rewards: chosen 13 words + 1 polite = 0.90, rejected 10 words = 0.50.
    const std::string chosen =
        fmt::format("Glad to help: the answer about topic {} is simple and clear here.", i);
    const std::string rejected = fmt::format("The answer about topic {} is not something I know.", i);
    dataset += json{{"prompt", fmt::format("Human: What can you tell me about topic {}? Assistant:", i)},
                    {"chosen", chosen},
                    {"rejected", rejected}}.dump() + "\n";

    for (const auto& a : catalog.attributes()) {
      const std::string cid = fmt::format("{}/chosen/{}", id, a.name);
      const std::string rid = fmt::format("{}/rejected/{}", id, a.name);
      if (a.name == "harmlessness") {
        canned.step2[cid] = chosen + " Hurt, attack.";  // -1.00
        canned.step2[rid] = rejected + " Sorry.";        // 0.80
      } else if (a.name == "verbosity") {
        canned.step2[cid] = i % 2 == 0 ? fmt::format("Glad: topic {} answered.", i)  // 0.45
                                       : fmt::format("Glad to help: the answer about topic {} is simple.", i);
        canned.step2[rid] = rejected + " For example, verbosity.";
      } else if (a.name == "helpfulness") {
        canned.step2[cid] = replace_first(chosen, "Glad", "Happy") + " (helpfulness)";
        canned.step2[rid] = rejected + " Thanks, here are the details and steps, please.";  // 1.60
      } else if (a.name == "neutrality") {
        canned.step2[cid] = chosen;  // degenerate rewrite
        canned.step2[rid] = rejected + " For example, neutrality.";
      } else if (a.name == "complexity" && i == 0) {
        // left out: the mock answers 404 and generation records a failure
      } else {
        canned.step2[cid] = replace_first(chosen, "Glad", "Happy") + fmt::format(" ({})", a.name);
        canned.step2[rid] = rejected + fmt::format(" For example, {}.", a.name);
      }
    }
  }
  canned.random = {"Here is a different answer to the question.",
                   "Thanks, I can explain this in more detail later.",
                   "That is a hard question, sorry."};
  canned.discover["default"] = "Clarity, Harmlessness, Verbosity.";
  canned.discover["toy:1"] = "harmlessness, politeness";
  canned.validate();

  write_text(paths.dataset, dataset);
  write_text(paths.registry,
             json{{"toy", {{"format", "pairwise"}, {"path", paths.dataset.filename().string()}}}}.dump(2) + "\n");
  write_text(paths.fixtures, canned.to_json().dump(2) + "\n");
  const json endpoint = {{"base_url", base_url}, {"timeout_seconds", 10}, {"max_retries", 1}, {"backoff_ms", 10}};
  json chat = endpoint;
  chat["model"] = "canned-chat";
  json embedding = endpoint;
  embedding["model"] = "hash-64";
  json mock = endpoint;
  mock["model"] = "toy-reward";
  write_text(paths.endpoints, json{{"chat", chat},
                                   {"embedding", embedding},
                                   {"models", {{"mock", mock}}},
                                   {"cache_dir", "cache"},
                                   {"fixture_markers", true}}.dump(2) + "\n");

  // 20 pairs; the perturbed side wins for the 11 j with (7j mod 20) < 11.
  std::string pairs;
  for (int j = 0; j < 20; ++j) {
    const std::string original = fmt::format("This is a plain answer number {} for the user.", j);  // 0.50
    const bool wins = (7 * j) % 20 < 11;
    const std::string perturbed =
        wins ? original + " You are stupid, but here is more about this topic right now."  // 0.60
             : original + " You are stupid.";                                             // 0.15
    pairs += json{{"prompt", fmt::format("Human: Question {}? Assistant:", j)},
                  {"original", original},
                  {"perturbed", perturbed}}.dump() + "\n";
  }
  write_text(paths.winrate_pairs, pairs);
  return paths;
}

}  // namespace rmcontrast::testkit
