#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmcontrast/error.hpp"

namespace rmcontrast {

enum class GroundTruth { chosen_preferred, rejected_preferred };

// A binary comparison: prompt x with responses y+ (chosen) and y- (rejected).
struct Comparison {
  std::string id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::optional<GroundTruth> ground_truth;
  // Per-aspect scores for (chosen, rejected), equal dimension.
  std::optional<std::pair<std::vector<double>, std::vector<double>>> aspect_scores;

  // Throws Error{invalid_input} when an invariant is violated.
  void validate() const;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct Attribute {
  std::string name;
  std::string description;

  friend bool operator==(const Attribute&, const Attribute&) = default;
};

class AttributeCatalog {
 public:
  AttributeCatalog() = default;
  explicit AttributeCatalog(std::vector<Attribute> attributes);

  const std::vector<Attribute>& attributes() const { return attributes_; }
  std::size_t size() const { return attributes_.size(); }
  bool empty() const { return attributes_.empty(); }

  const Attribute* find(std::string_view name) const;
  // Case-insensitive lookup, used when parsing LLM output.
  const Attribute* find_case_insensitive(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::vector<std::string> names() const;

  // Hex SHA-256 of the canonical JSON serialization.
  std::string hash() const;

  friend bool operator==(const AttributeCatalog&, const AttributeCatalog&) = default;

 private:
  std::vector<Attribute> attributes_;
};

// The 15 evaluation attributes with their one-sentence descriptions.
const AttributeCatalog& default_catalog();

enum class Side { chosen, rejected };

inline constexpr Side kSides[] = {Side::chosen, Side::rejected};

inline Side other(Side s) { return s == Side::chosen ? Side::rejected : Side::chosen; }

enum class GeneratorKind { attribute_conditioned, random_baseline };

enum class PromptVariant { center, only, pass };

struct Perturbation {
  std::string comparison_id;
  Side side = Side::chosen;
  std::optional<std::string> attribute;  // absent for the random baseline
  std::string text;
  GeneratorKind generator = GeneratorKind::attribute_conditioned;
  PromptVariant prompt_variant = PromptVariant::center;
  std::optional<std::vector<std::string>> relevant_words;
  // Text identical to the original response it rewrites.
  bool degenerate = false;

  void validate() const;

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct RewardValue {
  double scalar = 0.0;
  std::optional<std::vector<double>> vector;
  bool scalarisation_applied = false;

  friend bool operator==(const RewardValue&, const RewardValue&) = default;
};

enum class ContrastLabel { counterfactual, semifactual };

struct ScoredEntry {
  Perturbation perturbation;
  RewardValue reward;
  ContrastLabel label = ContrastLabel::semifactual;

  friend bool operator==(const ScoredEntry&, const ScoredEntry&) = default;
};

// Rewards and CF/SF labels of one comparison's perturbations under one model.
// The comparison is stored oriented, so reward_chosen > reward_rejected holds.
struct ScoredExplanationSet {
  Comparison comparison;
  std::string model_id;
  bool swapped = false;
  RewardValue reward_chosen;
  RewardValue reward_rejected;
  std::vector<ScoredEntry> entries;

  const std::string& comparison_id() const { return comparison.id; }
  const std::string& original(Side side) const {
    return side == Side::chosen ? comparison.chosen : comparison.rejected;
  }
  double original_reward(Side side) const {
    return side == Side::chosen ? reward_chosen.scalar : reward_rejected.scalar;
  }
  std::size_t count(Side side) const;
  std::size_t count(Side side, ContrastLabel label) const;

  // Throws Error{invalid_input} on an orientation or labelling violation.
  void validate() const;

  friend bool operator==(const ScoredExplanationSet&, const ScoredExplanationSet&) = default;
};

// side=chosen: CF iff reward_perturbed < reward of the rejected original.
// side=rejected: CF iff reward_perturbed > reward of the chosen original.
// Equality is always SF.
ContrastLabel categorize_perturbation(Side side, double reward_other_original,
                                      double reward_perturbed);

struct OrientedComparison {
  Comparison comparison;
  bool swapped = false;
};

// reward_a/reward_b score c.chosen/c.rejected. Swaps roles when the model
// prefers c.rejected. An exact tie throws Error{unorientable}.
OrientedComparison orient_comparison(const Comparison& c, double reward_a, double reward_b);

// Builds a ScoredExplanationSet from perturbation rewards, labelling each entry.
ScoredExplanationSet make_scored_set(Comparison oriented, std::string model_id, bool swapped,
                                     RewardValue reward_chosen, RewardValue reward_rejected,
                                     const std::vector<std::pair<Perturbation, RewardValue>>& scored);

std::string_view to_string(Side s);
std::string_view to_string(GeneratorKind g);
std::string_view to_string(PromptVariant v);
std::string_view to_string(ContrastLabel l);
std::string_view to_string(GroundTruth g);

Side parse_side(std::string_view s);
GeneratorKind parse_generator(std::string_view s);
PromptVariant parse_variant(std::string_view s);
ContrastLabel parse_label(std::string_view s);
GroundTruth parse_ground_truth(std::string_view s);

}  // namespace rmcontrast
