#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rmcontrast/core.hpp"
#include "rmcontrast/metrics.hpp"

namespace rmcontrast {

struct RankedAttribute {
  std::string attribute;
  double key = 0.0;

  friend bool operator==(const RankedAttribute&, const RankedAttribute&) = default;
};

// Descending by key; equal keys ordered by attribute name.
struct AttributeRanking {
  std::vector<RankedAttribute> entries;

  static AttributeRanking from_keys(const std::map<std::string, double>& keys);
  std::vector<std::string> order() const;
};

struct AttributeFlipRate {
  std::string attribute;
  std::optional<double> pfr;  // absent when no comparison has this perturbation
  std::size_t flips = 0;
  std::size_t denominator = 0;

  friend bool operator==(const AttributeFlipRate&, const AttributeFlipRate&) = default;
};

struct SensitivityReport {
  std::string model_id;
  std::string dataset;
  Side side = Side::chosen;
  std::vector<AttributeFlipRate> attributes;  // catalog order

  // Attributes with a defined PFR.
  std::map<std::string, double> pfr_by_attribute() const;
  AttributeRanking ranking() const;

  friend bool operator==(const SensitivityReport&, const SensitivityReport&) = default;
};

// Per attribute: flips / comparisons that have a scored perturbation for it.
SensitivityReport preference_flip_rate(const std::vector<ScoredExplanationSet>& sets, Side side,
                                       const AttributeCatalog& catalog,
                                       const std::string& dataset = {});

// Tie-corrected Kendall tau-b over paired keys, O(n log n). Absent when either
// vector is entirely tied. Throws Error{invalid_input} on length mismatch,
// n < 2 or non-finite keys.
std::optional<double> kendall_tau(std::span<const double> u, std::span<const double> v);

// Kendall tau-b over the attributes both maps share. Throws
// Error{invalid_input} when fewer than two are shared.
std::optional<double> kendall_tau(const std::map<std::string, double>& u,
                                  const std::map<std::string, double>& v);

struct SimilarityMatrix {
  std::vector<std::string> models;
  std::vector<std::string> attributes;  // intersection the taus were computed over
  std::vector<std::vector<std::optional<double>>> tau;
};

// Symmetric, unit diagonal. Throws Error{analysis} for fewer than two reports
// or fewer than two shared attributes.
SimilarityMatrix cross_model_similarity(const std::vector<SensitivityReport>& reports);

// Kendall tau between the chosen-side and rejected-side PFR rankings.
std::optional<double> branch_correlation(const SensitivityReport& chosen_side,
                                         const SensitivityReport& rejected_side);

struct LocalRanking {
  std::string comparison_id;
  Side side = Side::chosen;
  // side=chosen: r(y-) - r(y+'); side=rejected: r(y-') - r(y+).
  std::map<std::string, double> differences;
  AttributeRanking ranking;
  std::vector<std::string> missing;  // catalog attributes without a perturbation
};

// Throws Error{analysis} when fewer than two attributes are scored on the side.
LocalRanking local_ranking(const ScoredExplanationSet& set, Side side,
                           const AttributeCatalog& catalog);

struct RepresentativeScore {
  std::string comparison_id;
  double score = 0.0;
  double tau_first = 0.0;   // chosen side, or model a
  double tau_second = 0.0;  // rejected side, or model b

  friend bool operator==(const RepresentativeScore&, const RepresentativeScore&) = default;
};

// Comparisons by tau(local+, global+) + tau(local-, global-), descending, ties
// by ascending comparison id. Ineligible comparisons are left out.
std::vector<RepresentativeScore> representative_single_model(
    const std::vector<ScoredExplanationSet>& sets, const SensitivityReport& global_chosen,
    const SensitivityReport& global_rejected, const AttributeCatalog& catalog);

// Comparisons by tau_a + tau_b on one side across two models scoring the same
// perturbations. Throws Error{alignment} when the perturbation sets differ.
std::vector<RepresentativeScore> representative_two_models(
    const std::vector<ScoredExplanationSet>& sets_a, const std::vector<ScoredExplanationSet>& sets_b,
    Side side, const SensitivityReport& global_a, const SensitivityReport& global_b,
    const AttributeCatalog& catalog);

struct GroupMetrics {
  std::size_t size = 0;
  CoverageReport coverage;
  DistanceReport distances;
};

struct CorrectnessSplit {
  std::optional<GroupMetrics> correct;
  std::optional<GroupMetrics> wrong;
  std::size_t excluded = 0;  // no ground truth
};

// Groups by whether the model's preference matches the ground truth of the
// oriented comparison.
CorrectnessSplit correctness_split(const std::vector<ScoredExplanationSet>& sets,
                                   const Embedder& embedder, const DistanceOptions& options = {});

// Fraction of (original, perturbed) reward pairs where perturbed > original.
double win_rate(std::span<const std::pair<double, double>> pairs);

}  // namespace rmcontrast
