#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rmcontrast/core.hpp"

namespace rmcontrast {

enum class DatasetFormat { pairwise, multi_aspect };

struct DatasetSpec {
  std::string name;
  DatasetFormat format = DatasetFormat::pairwise;
  std::filesystem::path path;
  std::optional<std::vector<std::string>> aspect_names;  // multi_aspect only
  // A pairwise record is multi-turn when its prompt holds more than one of these.
  std::string turn_delimiter = "Human:";

  void validate() const;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct SamplePlan {
  std::size_t n_per_seed = 1;
  std::vector<std::uint64_t> seeds;

  void validate() const;

  friend bool operator==(const SamplePlan&, const SamplePlan&) = default;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t multi_turn_dropped = 0;
  std::size_t invalid_dropped = 0;
  std::size_t not_dominant_dropped = 0;
};

// Records {prompt, chosen, rejected}; ids "<dataset>:<line>"; ground truth is
// chosen_preferred. Multi-turn records are dropped.
std::vector<Comparison> load_pairwise(const DatasetSpec& spec, LoadStats* stats = nullptr);

struct MultiAspectRecord {
  std::string id;
  std::string prompt;
  std::string response_a;
  std::string response_b;
  std::vector<double> scores_a;
  std::vector<double> scores_b;
};

// Keeps records where one response strictly dominates the other in every
// aspect; the dominating response becomes chosen.
std::vector<Comparison> filter_multi_aspect(const std::vector<MultiAspectRecord>& records,
                                            LoadStats* stats = nullptr);

// Records {prompt, response_a, response_b, scores_a, scores_b}, then filter_multi_aspect.
std::vector<Comparison> load_multi_aspect(const DatasetSpec& spec, LoadStats* stats = nullptr);

// Dispatches on spec.format.
std::vector<Comparison> load_dataset(const DatasetSpec& spec, LoadStats* stats = nullptr);

// Bounded draw used by the sampler: rejection sampling on std::mt19937_64
// output, so results are identical on every conforming standard library.
std::uint64_t bounded_draw(std::uint64_t bound, std::mt19937_64& rng);

struct SeededSample {
  std::uint64_t seed = 0;
  std::vector<Comparison> comparisons;
};

// Per seed: partial Fisher-Yates over the population in its given order with
// std::mt19937_64(seed); the first n_per_seed slots are the sample.
std::vector<SeededSample> sample(const std::vector<Comparison>& population, const SamplePlan& plan);

// Rewards of (chosen, rejected) for a comparison id under a model, if known.
using RewardLookup =
    std::function<std::optional<std::pair<double, double>>(const std::string& model_id,
                                                           const std::string& comparison_id)>;

struct AgreementStats {
  std::size_t kept = 0;
  std::size_t ties = 0;
  std::size_t disagreements = 0;
};

// Keeps comparisons that every model orders identically and strictly.
std::vector<Comparison> agreement_filter(const std::vector<Comparison>& comparisons,
                                         const std::vector<std::string>& model_ids,
                                         const RewardLookup& rewards,
                                         AgreementStats* stats = nullptr);

// Registry file: JSON object name -> {format, path, aspect_names?, turn_delimiter?}.
// Relative paths resolve against the registry file's directory.
std::map<std::string, DatasetSpec> load_registry(const std::filesystem::path& file);

std::string_view to_string(DatasetFormat f);
DatasetFormat parse_dataset_format(std::string_view s);

}  // namespace rmcontrast
