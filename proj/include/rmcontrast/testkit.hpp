#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rmcontrast/core.hpp"

namespace rmcontrast::testkit {

// Toy reward: length_weight * min(words, length_cap) plus, per lexicon, its
// weight times the number of response tokens found in it. The prompt is ignored.
struct ToyRewardSpec {
  double length_weight = 0.05;
  std::size_t length_cap = 50;
  std::map<std::string, double> term_weights;                   // lexicon -> weight
  std::map<std::string, std::vector<std::string>> lexicons;     // lexicon -> terms

  // harm_terms -1.0, rude_terms -0.5, polite_terms +0.25, detail_terms +0.1.
  static ToyRewardSpec defaults();
  // Throws Error{configuration}: non-lowercase or shared terms, non-finite weights.
  void validate() const;
  const std::vector<std::string>& terms(const std::string& lexicon) const;
};

// Case-folded whitespace tokens with leading and trailing ASCII punctuation
// removed; tokens left empty are dropped.
std::vector<std::string> toy_tokens(std::string_view text);

double toy_reward(const ToyRewardSpec& spec, std::string_view prompt, std::string_view response);

// 64-bit FNV-1a: offset 0xcbf29ce484222325, prime 0x100000001b3, per byte.
std::uint64_t fnv1a64(std::string_view bytes);

// Bag of words: each word_tokenize token adds 1 to bucket fnv1a64(token) % dim;
// the vector is then L2-normalised (all zeros when there are no tokens).
std::vector<double> hash_embedding(std::string_view text, std::size_t dim = 64);

// Fixed chat completions keyed by the fixture marker on a prompt's first line.
//   step1:    "<comparison>/<side>" or "default"
//   step2:    "<comparison>/<side>/<attribute>"
//   random:   cycle list indexed by the marker's index
//   discover: "<comparison>" or "default"
struct CannedPerturbationSpec {
  std::map<std::string, std::string> step1;
  std::map<std::string, std::string> step2;
  std::vector<std::string> random;
  std::map<std::string, std::string> discover;

  static CannedPerturbationSpec from_json(const nlohmann::json& j);
  static CannedPerturbationSpec load(const std::filesystem::path& file);
  nlohmann::json to_json() const;

  // Throws Error{configuration} on malformed keys or empty texts.
  void validate() const;
  // Completion for a marked prompt; absent when no fixture matches.
  std::optional<std::string> respond(std::string_view prompt) const;
};

// HTTP server with /score, /v1/chat/completions and /v1/embeddings on
// 127.0.0.1. Port 0 binds any free port.
class MockServer {
 public:
  MockServer(ToyRewardSpec reward, CannedPerturbationSpec canned, std::size_t embedding_dim = 64);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  void start(int port = 0);
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();
  int port() const { return port_; }
  std::string base_url() const;
  std::size_t requests() const { return requests_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::thread thread_;
};

struct FixturePaths {
  std::filesystem::path dataset;
  std::filesystem::path registry;
  std::filesystem::path fixtures;
  std::filesystem::path endpoints;
  std::filesystem::path winrate_pairs;
  std::filesystem::path cache;
};

inline constexpr std::size_t kPlantedComparisons = 8;

// Writes a toy dataset "toy" of kPlantedComparisons comparisons (plus one
// multi-turn record the loader drops), its registry, canned completions, an
// endpoints file for base_url with model "mock", and a 20-pair win-rate file
// in which 11 perturbed responses out-score their originals.
// Every chosen-side harmlessness rewrite inserts two harm terms.
FixturePaths write_planted_fixtures(const std::filesystem::path& dir, const std::string& base_url);

}  // namespace rmcontrast::testkit
