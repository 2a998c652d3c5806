#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmcontrast/analysis.hpp"
#include "rmcontrast/core.hpp"
#include "rmcontrast/dataset.hpp"
#include "rmcontrast/endpoints.hpp"
#include "rmcontrast/metrics.hpp"
#include "rmcontrast/perturbation.hpp"

namespace rmcontrast {

enum class ComparisonStatus { explained, skipped_tie, skipped_disagreement };

std::string_view to_string(ComparisonStatus s);
ComparisonStatus parse_status(std::string_view s);

// Rewards of the two original responses in their dataset roles.
struct OriginalScores {
  RewardValue chosen;
  RewardValue rejected;

  friend bool operator==(const OriginalScores&, const OriginalScores&) = default;
};

struct ComparisonRun {
  std::uint64_t seed = 0;
  Comparison original;
  ComparisonStatus status = ComparisonStatus::explained;
  bool swapped = false;
  std::map<std::string, OriginalScores> original_rewards;  // by model id
  std::vector<Perturbation> perturbations;
  std::vector<GenerationFailure> failures;
  std::vector<Side> step1_fallbacks;
  std::vector<ScoredExplanationSet> scored;  // manifest model order; explained only

  Comparison oriented() const;

  friend bool operator==(const ComparisonRun&, const ComparisonRun&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string command;
  DatasetSpec dataset;
  SamplePlan plan;
  std::vector<std::string> models;
  PromptVariant variant = PromptVariant::center;
  GeneratorKind generator = GeneratorKind::attribute_conditioned;
  std::size_t random_per_side = 1;
  AttributeCatalog catalog;
  std::string catalog_hash;
  std::filesystem::path templates_dir;  // empty: built-in templates
  std::string template_hash;
  EndpointSet endpoints;
  DistanceOptions distance;

  // Throws Error{configuration} when catalog_hash does not match catalog.
  void validate() const;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

struct RunRecord {
  RunManifest manifest;
  std::vector<ComparisonRun> comparisons;
  std::map<std::string, std::string> reports;  // file name under reports/ -> bytes

  // Explained sets of one model, optionally restricted to one seed.
  std::vector<ScoredExplanationSet> sets(const std::string& model,
                                         std::optional<std::uint64_t> seed = std::nullopt) const;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// "<UTC yyyymmddThhmmss>-<8 hex>".
std::string new_run_id();

// Writes manifest.json, comparisons.jsonl, perturbations.jsonl, rewards.jsonl,
// labels.jsonl and reports/ under dir. Throws Error{io} with the failing path.
void persist(const RunRecord& record, const std::filesystem::path& dir);

// Inverse of persist.
RunRecord load_run(const std::filesystem::path& dir);

// "mean±std": mean with 2 decimals, population std with 3 and no leading
// zero, e.g. "0.70±.100". "n/a" for no values.
std::string format_mean_std(std::span<const double> values);

struct SeedMetrics {
  std::uint64_t seed = 0;
  CoverageReport coverage;
  DistanceReport distances;
};

struct TableRow {
  std::string dataset;
  std::string method;
  std::vector<SeedMetrics> seeds;
};

struct Tables {
  std::string coverage_csv;
  std::string distance_csv;
};

// Coverage: dataset, method, chosen-CF, chosen-SF, rejected-CF, rejected-SF,
// both-CF, both-SF. Distances: dataset, method, syn. dist., sem. dist, sem. div.
Tables emit_tables(const std::vector<TableRow>& rows);

// Grouped bars per attribute, one bar per report (model), y in [0, 1].
std::string sensitivity_chart_svg(const std::vector<SensitivityReport>& reports);

// Every report file derived from the record's comparisons.
std::map<std::string, std::string> derive_reports(const RunRecord& record, const Embedder& embedder);

}  // namespace rmcontrast
