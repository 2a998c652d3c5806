#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rmcontrast/core.hpp"
#include "rmcontrast/gateway.hpp"

namespace rmcontrast {

enum class TemplateId {
  step1,
  step2_center,
  step2_only,
  step2_pass,
  random_baseline,
  attribute_discovery,
};

inline constexpr TemplateId kTemplateIds[] = {
    TemplateId::step1,           TemplateId::step2_center,    TemplateId::step2_only,
    TemplateId::step2_pass,      TemplateId::random_baseline, TemplateId::attribute_discovery,
};

std::string_view to_string(TemplateId id);

// Placeholders a template body may use, written as {name}.
const std::set<std::string>& template_placeholders();

struct PromptTemplate {
  TemplateId id = TemplateId::step1;
  std::string body;

  // Names of the {placeholder}s occurring in body.
  std::set<std::string> placeholders() const;
  // Throws Error{configuration} on an undeclared placeholder or, for the
  // step 2 variants, a missing or unexpected word-constraint sentence.
  void validate() const;
  // Throws Error{configuration} when a used placeholder has no value.
  std::string render(const std::map<std::string, std::string>& values) const;
};

class TemplateSet {
 public:
  static TemplateSet defaults();
  // Defaults overridden by "<id>.txt" files found in the directory.
  static TemplateSet load(const std::filesystem::path& directory);

  const PromptTemplate& get(TemplateId id) const;
  void set(PromptTemplate t);
  std::string hash() const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

inline constexpr std::string_view kCenterSentence =
    "The changes made to response A should be centered around the following words";
inline constexpr std::string_view kOnlySentence =
    "Response A can only be modified by deleting, replacing, or inserting words";

// Original rewards of the oriented comparison.
struct OriginalRewards {
  double chosen = 0.0;
  double rejected = 0.0;

  double of(Side s) const { return s == Side::chosen ? chosen : rejected; }
};

// Scores are shown with four decimals.
std::string format_score(double reward);

std::string build_step1_prompt(const TemplateSet& templates, const Comparison& c, Side side,
                               const OriginalRewards& rewards, const AttributeCatalog& catalog);

struct Step1Result {
  // Every catalog attribute has an entry; unmentioned ones are empty.
  std::map<std::string, std::vector<std::string>> words;
  std::vector<std::string> unknown_attributes;
};

// Parses "name: w1, w2" lines. Throws Error{parse} when no line has that form.
Step1Result parse_step1(std::string_view raw, const AttributeCatalog& catalog);

std::string build_step2_prompt(const TemplateSet& templates, const Comparison& c, Side side,
                               const OriginalRewards& rewards, const Attribute& attribute,
                               const std::vector<std::string>& words, PromptVariant variant);

std::string build_random_prompt(const TemplateSet& templates, const std::string& response);

std::string build_discovery_prompt(const TemplateSet& templates, const Comparison& c,
                                   const OriginalRewards& rewards);

// First-line marker the mock chat server keys its fixtures on, e.g.
// "[step2 comparison=toy:3 side=chosen attribute=clarity]".
std::string fixture_marker(std::string_view kind,
                           const std::vector<std::pair<std::string, std::string>>& keys);

struct GeneratorConfig {
  EndpointConfig chat;
  PromptVariant variant = PromptVariant::center;
  std::size_t concurrency = 4;
  std::optional<std::string> system_text;
  // Prefix prompts with fixture markers (mock servers only).
  bool fixture_markers = false;
  TemplateSet templates = TemplateSet::defaults();
};

struct GenerationFailure {
  Side side = Side::chosen;
  std::optional<std::string> attribute;  // absent: whole-side failure
  std::string message;

  friend bool operator==(const GenerationFailure&, const GenerationFailure&) = default;
};

struct GenerationResult {
  std::vector<Perturbation> chosen_side;    // Y+
  std::vector<Perturbation> rejected_side;  // Y-
  std::vector<GenerationFailure> failures;
  // Sides whose step 1 output was unparsable and fell back to the pass variant.
  std::vector<Side> step1_fallbacks;

  std::vector<Perturbation>& side(Side s) { return s == Side::chosen ? chosen_side : rejected_side; }
  const std::vector<Perturbation>& side(Side s) const {
    return s == Side::chosen ? chosen_side : rejected_side;
  }
};

// Step 1 once per side, then step 2 once per catalog attribute. Failures are
// recorded per attribute (or per side when step 1 itself fails).
GenerationResult generate_perturbation_sets(const Comparison& oriented,
                                            const OriginalRewards& rewards,
                                            const AttributeCatalog& catalog,
                                            const GeneratorConfig& config, Gateway& gateway);

// n_per_side random rewrites of each response. Throws Error{configuration}
// when temperature is 0 and n_per_side > 1.
GenerationResult generate_random_baseline(const Comparison& oriented, std::size_t n_per_side,
                                          const GeneratorConfig& config, Gateway& gateway);

struct DiscoveredAttribute {
  std::string name;
  std::size_t count = 0;

  friend bool operator==(const DiscoveredAttribute&, const DiscoveredAttribute&) = default;
};

// Splits a comma-separated attribute list, lowercased and trimmed of
// whitespace and trailing periods.
std::vector<std::string> split_attribute_list(std::string_view raw);

// One discovery call per comparison; attributes counted across comparisons,
// descending by count, ties in order of first appearance.
std::vector<DiscoveredAttribute> discover_attributes(
    const std::vector<std::pair<Comparison, OriginalRewards>>& comparisons,
    const GeneratorConfig& config, Gateway& gateway);

}  // namespace rmcontrast
