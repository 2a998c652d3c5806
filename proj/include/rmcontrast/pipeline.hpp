#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rmcontrast/dataset.hpp"
#include "rmcontrast/endpoints.hpp"
#include "rmcontrast/gateway.hpp"
#include "rmcontrast/runstore.hpp"

namespace rmcontrast {

struct PipelineConfig {
  std::string command = "explain";
  DatasetSpec dataset;
  SamplePlan plan;
  std::vector<std::string> models;  // the first one orients comparisons
  PromptVariant variant = PromptVariant::center;
  GeneratorKind generator = GeneratorKind::attribute_conditioned;
  std::size_t random_per_side = 1;
  AttributeCatalog catalog = default_catalog();
  std::filesystem::path templates_dir;
  EndpointSet endpoints;
  std::size_t parallelism = 4;
  DistanceOptions distance;

  // Throws Error{usage} or Error{configuration}.
  void validate() const;
};

struct RequestPlan {
  std::size_t comparisons = 0;
  std::size_t original_scores = 0;
  std::size_t step1 = 0;
  std::size_t step2 = 0;
  std::size_t random = 0;
  std::size_t perturbation_scores = 0;
  std::size_t embeddings = 0;  // upper bound: distinct texts per comparison

  // Scoring and generation requests, embeddings excluded.
  std::size_t total() const { return original_scores + step1 + step2 + random + perturbation_scores; }
};

// Requests a run over `comparisons` comparisons makes with a cold cache.
RequestPlan plan_requests(const PipelineConfig& config, std::size_t comparisons);

std::shared_ptr<Gateway> make_gateway(const EndpointSet& endpoints, bool cache_only,
                                      std::shared_ptr<Transport> transport = nullptr);

// Empty when no embedding endpoint is configured.
Embedder make_embedder(const EndpointSet& endpoints, Gateway& gateway);

// Score, orient, generate, score perturbations and label one comparison.
ComparisonRun explain_comparison(const Comparison& comparison, std::uint64_t seed,
                                 const PipelineConfig& config, const TemplateSet& templates,
                                 Gateway& gateway);

RunManifest make_manifest(const PipelineConfig& config, std::string run_id);
PipelineConfig config_from_manifest(const RunManifest& manifest);

// Runs every sampled comparison and derives the reports.
RunRecord execute(const PipelineConfig& config, const std::vector<SeededSample>& samples,
                  Gateway& gateway, std::string run_id);

struct ReplayResult {
  RunRecord record;
  std::vector<std::string> mismatched_reports;  // differing, missing or extra
};

// Re-runs a persisted run through a cache-only gateway. Throws
// Error{replay_incomplete} listing every digest the cache lacks.
ReplayResult replay(const std::filesystem::path& run_dir, Gateway& gateway);

}  // namespace rmcontrast
