#include "rmcontrast/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include "json.hpp"

#include "rmcontrast/digest.hpp"

namespace rmcontrast {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::empty_dataset: return "empty-dataset";
    case ErrorKind::sampling: return "sampling";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::transport: return "transport";
    case ErrorKind::empty_generation: return "empty-generation";
    case ErrorKind::degenerate_embedding: return "degenerate-embedding";
    case ErrorKind::unorientable: return "unorientable-comparison";
    case ErrorKind::discovery: return "discovery";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::analysis: return "analysis";
    case ErrorKind::io: return "io";
    case ErrorKind::replay_incomplete: return "replay-incomplete";
    case ErrorKind::replay_mismatch: return "replay-mismatch";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

void Comparison::validate() const {
  if (prompt.empty()) {
    throw Error(ErrorKind::invalid_input, fmt::format("comparison {}: empty prompt", id));
  }
  if (chosen == rejected) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("comparison {}: chosen and rejected responses are identical", id));
  }
  if (aspect_scores && aspect_scores->first.size() != aspect_scores->second.size()) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("comparison {}: aspect score dimensions differ ({} vs {})", id,
                            aspect_scores->first.size(), aspect_scores->second.size()));
  }
}

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

AttributeCatalog::AttributeCatalog(std::vector<Attribute> attributes)
    : attributes_(std::move(attributes)) {
  std::set<std::string> seen;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw Error(ErrorKind::invalid_input, "attribute with empty name");
    if (a.description.empty()) {
      throw Error(ErrorKind::invalid_input,
                  fmt::format("attribute '{}' has an empty description", a.name));
    }
    if (!seen.insert(a.name).second) {
      throw Error(ErrorKind::invalid_input, fmt::format("duplicate attribute '{}'", a.name));
    }
  }
}

const Attribute* AttributeCatalog::find(std::string_view name) const {
  for (const auto& a : attributes_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

const Attribute* AttributeCatalog::find_case_insensitive(std::string_view name) const {
  const std::string needle = ascii_lower(name);
  for (const auto& a : attributes_) {
    if (ascii_lower(a.name) == needle) return &a;
  }
  return nullptr;
}

std::optional<std::size_t> AttributeCatalog::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> AttributeCatalog::names() const {
  std::vector<std::string> out;
  out.reserve(attributes_.size());
  for (const auto& a : attributes_) out.push_back(a.name);
  return out;
}

std::string AttributeCatalog::hash() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : attributes_) {
    j.push_back({{"name", a.name}, {"description", a.description}});
  }
  return sha256_hex(j.dump());
}

const AttributeCatalog& default_catalog() {
  static const AttributeCatalog catalog({
      {"avoid-to-answer",
       "whether or not the response is avoiding to give direct answers to the question"},
      {"appropriateness",
       "the extent to which the response is appropriate in terms of language style, "
       "politeness, and whether it contains any sarcasm"},
      {"assertiveness",
       "the extent to which the response sounds very certain and contains judgements"},
      {"clarity", "whether or not the response is clear and easy to read"},
      {"coherence", "whether or not the contents in the response are self-contained and clear"},
      {"complexity", "the intellectual burden required by a person to understand this response"},
      {"correctness", "whether or not the response is factually correct"},
      {"engagement",
       "the extent to which the language style of the response is trying to engage with the "
       "person who wrote the question"},
      {"harmlessness",
       "whether or not the response is relevant to any potentially unsafe, immoral or illegal "
       "behaviours"},
      {"helpfulness", "whether or not the response addresses the points raised in the question"},
      {"informativeness", "whether or not the response provides informative knowledge"},
      {"neutrality",
       "whether or not the response is neutral and is without biases towards certain groups"},
      {"relevance", "whether or not the response is in a relevant context as in the question"},
      {"sensitivity",
       "whether or not the response is relevant to any personal, sensitive, or private "
       "information"},
      {"verbosity",
       "how many relevant details are included in the response, and whether or not the "
       "response is too long"},
  });
  return catalog;
}

void Perturbation::validate() const {
  if (text.empty()) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("perturbation of {} ({}): empty text", comparison_id, to_string(side)));
  }
  const bool conditioned = generator == GeneratorKind::attribute_conditioned;
  if (conditioned != attribute.has_value()) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("perturbation of {}: attribute must be present iff the generator is "
                            "attribute_conditioned",
                            comparison_id));
  }
}

std::size_t ScoredExplanationSet::count(Side side) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const ScoredEntry& e) { return e.perturbation.side == side; }));
}

std::size_t ScoredExplanationSet::count(Side side, ContrastLabel label) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const ScoredEntry& e) {
    return e.perturbation.side == side && e.label == label;
  }));
}

void ScoredExplanationSet::validate() const {
  if (!(reward_chosen.scalar > reward_rejected.scalar)) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("scored set {} / {}: chosen reward {} does not exceed rejected reward {}",
                            comparison.id, model_id, reward_chosen.scalar, reward_rejected.scalar));
  }
  for (const auto& e : entries) {
    const Side s = e.perturbation.side;
    const ContrastLabel expected =
        categorize_perturbation(s, original_reward(other(s)), e.reward.scalar);
    if (expected != e.label) {
      throw Error(ErrorKind::invalid_input,
                  fmt::format("scored set {} / {}: label of {} perturbation '{}' is inconsistent "
                              "with its reward",
                              comparison.id, model_id, to_string(s),
                              e.perturbation.attribute.value_or("random")));
    }
  }
}

ContrastLabel categorize_perturbation(Side side, double reward_other_original,
                                      double reward_perturbed) {
  if (!std::isfinite(reward_other_original)) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("non-finite original reward: {}", reward_other_original));
  }
  if (!std::isfinite(reward_perturbed)) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("non-finite perturbed reward: {}", reward_perturbed));
  }
  const bool flips = side == Side::chosen ? reward_perturbed < reward_other_original
                                          : reward_perturbed > reward_other_original;
  return flips ? ContrastLabel::counterfactual : ContrastLabel::semifactual;
}

OrientedComparison orient_comparison(const Comparison& c, double reward_a, double reward_b) {
  if (reward_a == reward_b) {
    throw Error(ErrorKind::unorientable,
                fmt::format("comparison {}: both responses have reward {}", c.id, reward_a));
  }
  if (reward_a > reward_b) return {c, false};
  Comparison swapped = c;
  std::swap(swapped.chosen, swapped.rejected);
  if (swapped.aspect_scores) std::swap(swapped.aspect_scores->first, swapped.aspect_scores->second);
  if (swapped.ground_truth) {
    swapped.ground_truth = *swapped.ground_truth == GroundTruth::chosen_preferred
                               ? GroundTruth::rejected_preferred
                               : GroundTruth::chosen_preferred;
  }
  return {std::move(swapped), true};
}

ScoredExplanationSet make_scored_set(Comparison oriented, std::string model_id, bool swapped,
                                     RewardValue reward_chosen, RewardValue reward_rejected,
                                     const std::vector<std::pair<Perturbation, RewardValue>>& scored) {
  ScoredExplanationSet set;
  set.comparison = std::move(oriented);
  set.model_id = std::move(model_id);
  set.swapped = swapped;
  set.reward_chosen = std::move(reward_chosen);
  set.reward_rejected = std::move(reward_rejected);
  set.entries.reserve(scored.size());
  for (const auto& [p, r] : scored) {
    const double other_reward = set.original_reward(other(p.side));
    set.entries.push_back({p, r, categorize_perturbation(p.side, other_reward, r.scalar)});
  }
  return set;
}

std::string_view to_string(Side s) { return s == Side::chosen ? "chosen" : "rejected"; }

std::string_view to_string(GeneratorKind g) {
  return g == GeneratorKind::attribute_conditioned ? "attribute_conditioned" : "random_baseline";
}

std::string_view to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::center: return "center";
    case PromptVariant::only: return "only";
    case PromptVariant::pass: return "pass";
  }
  return "center";
}

std::string_view to_string(ContrastLabel l) {
  return l == ContrastLabel::counterfactual ? "counterfactual" : "semifactual";
}

std::string_view to_string(GroundTruth g) {
  return g == GroundTruth::chosen_preferred ? "chosen_preferred" : "rejected_preferred";
}

Side parse_side(std::string_view s) {
  if (s == "chosen") return Side::chosen;
  if (s == "rejected") return Side::rejected;
  throw Error(ErrorKind::parse, fmt::format("unknown side '{}'", s));
}

GeneratorKind parse_generator(std::string_view s) {
  if (s == "attribute_conditioned" || s == "ours") return GeneratorKind::attribute_conditioned;
  if (s == "random_baseline" || s == "random") return GeneratorKind::random_baseline;
  throw Error(ErrorKind::parse, fmt::format("unknown generator '{}'", s));
}

PromptVariant parse_variant(std::string_view s) {
  if (s == "center") return PromptVariant::center;
  if (s == "only") return PromptVariant::only;
  if (s == "pass") return PromptVariant::pass;
  throw Error(ErrorKind::parse, fmt::format("unknown prompt variant '{}'", s));
}

ContrastLabel parse_label(std::string_view s) {
  if (s == "counterfactual") return ContrastLabel::counterfactual;
  if (s == "semifactual") return ContrastLabel::semifactual;
  throw Error(ErrorKind::parse, fmt::format("unknown contrast label '{}'", s));
}

GroundTruth parse_ground_truth(std::string_view s) {
  if (s == "chosen_preferred") return GroundTruth::chosen_preferred;
  if (s == "rejected_preferred") return GroundTruth::rejected_preferred;
  throw Error(ErrorKind::parse, fmt::format("unknown ground truth '{}'", s));
}

}  // namespace rmcontrast
