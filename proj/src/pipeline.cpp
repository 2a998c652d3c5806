#include "rmcontrast/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "rmcontrast/parallel.hpp"

namespace rmcontrast {

void PipelineConfig::validate() const {
  dataset.validate();
  plan.validate();
  if (models.empty()) throw Error(ErrorKind::usage, "at least one model is required");
  if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
    throw Error(ErrorKind::usage, "model ids must be distinct");
  }
  if (parallelism == 0) throw Error(ErrorKind::usage, "parallelism must be at least 1");
  if (generator == GeneratorKind::random_baseline && random_per_side == 0) {
    throw Error(ErrorKind::usage, "random baseline needs at least one rewrite per side");
  }
  if (catalog.empty()) throw Error(ErrorKind::configuration, "empty attribute catalog");
}

RequestPlan plan_requests(const PipelineConfig& config, std::size_t comparisons) {
  const std::size_t m = config.models.size();
  RequestPlan p;
  p.comparisons = comparisons;
  p.original_scores = comparisons * 2 * m;
  std::size_t per_side = 0;
  if (config.generator == GeneratorKind::attribute_conditioned) {
    per_side = config.catalog.size();
    p.step1 = comparisons * 2;
    p.step2 = comparisons * 2 * per_side;
  } else {
    per_side = config.random_per_side;
    p.random = comparisons * 2 * per_side;
  }
  p.perturbation_scores = comparisons * 2 * per_side * m;
  p.embeddings = config.endpoints.embedding ? comparisons * (2 + 2 * per_side) : 0;
  return p;
}

std::shared_ptr<Gateway> make_gateway(const EndpointSet& endpoints, bool cache_only,
                                      std::shared_ptr<Transport> transport) {
  if (!transport) {
    transport = cache_only ? std::shared_ptr<Transport>(std::make_shared<OfflineTransport>())
                           : std::shared_ptr<Transport>(std::make_shared<HttpTransport>());
  }
  auto cache = std::make_shared<ResponseCache>(endpoints.cache_dir);
  return std::make_shared<Gateway>(std::move(transport), std::move(cache), GatewayOptions{cache_only});
}

Embedder make_embedder(const EndpointSet& endpoints, Gateway& gateway) {
  if (!endpoints.embedding) return {};
  const EndpointConfig config = *endpoints.embedding;
  return [config, &gateway](const std::string& text) { return gateway.embed(config, text); };
}

ComparisonRun explain_comparison(const Comparison& comparison, std::uint64_t seed,
                                 const PipelineConfig& config, const TemplateSet& templates,
                                 Gateway& gateway) {
  ComparisonRun run;
  run.seed = seed;
  run.original = comparison;
  for (const auto& id : config.models) {
    const auto& m = config.endpoints.model(id);
    run.original_rewards[id] = {
        gateway.score(m.config, m.scalarisation, comparison.prompt, comparison.chosen),
        gateway.score(m.config, m.scalarisation, comparison.prompt, comparison.rejected)};
  }

  AgreementStats stats;
  const auto kept = agreement_filter(
      {comparison}, config.models,
      [&](const std::string& model, const std::string&) -> std::optional<std::pair<double, double>> {
        const auto& r = run.original_rewards.at(model);
        return std::make_pair(r.chosen.scalar, r.rejected.scalar);
      },
      &stats);
  if (kept.empty()) {
    run.status = stats.ties > 0 ? ComparisonStatus::skipped_tie : ComparisonStatus::skipped_disagreement;
    spdlog::info("{}: skipped ({})", comparison.id, to_string(run.status));
    return run;
  }

  const auto& reference = run.original_rewards.at(config.models.front());
  const auto oriented = orient_comparison(comparison, reference.chosen.scalar, reference.rejected.scalar);
  run.swapped = oriented.swapped;
  const auto oriented_rewards = [&](const std::string& model) {
    const auto& r = run.original_rewards.at(model);
    return run.swapped ? std::make_pair(r.rejected, r.chosen) : std::make_pair(r.chosen, r.rejected);
  };
  const auto [ref_chosen, ref_rejected] = oriented_rewards(config.models.front());

  GeneratorConfig gen;
  gen.chat = config.endpoints.chat;
  gen.variant = config.variant;
  gen.concurrency = config.parallelism;
  gen.fixture_markers = config.endpoints.fixture_markers;
  gen.templates = templates;
  const GenerationResult generated =
      config.generator == GeneratorKind::attribute_conditioned
          ? generate_perturbation_sets(oriented.comparison, {ref_chosen.scalar, ref_rejected.scalar},
                                       config.catalog, gen, gateway)
          : generate_random_baseline(oriented.comparison, config.random_per_side, gen, gateway);
  for (const auto side : kSides) {
    const auto& ps = generated.side(side);
    run.perturbations.insert(run.perturbations.end(), ps.begin(), ps.end());
  }
  run.failures = generated.failures;
  run.step1_fallbacks = generated.step1_fallbacks;

  for (const auto& id : config.models) {
    const auto& m = config.endpoints.model(id);
    std::vector<std::pair<Perturbation, RewardValue>> scored;
    scored.reserve(run.perturbations.size());
    for (const auto& p : run.perturbations) {
      scored.emplace_back(p, gateway.score(m.config, m.scalarisation, oriented.comparison.prompt, p.text));
    }
    auto [chosen, rejected] = oriented_rewards(id);
    auto set = make_scored_set(oriented.comparison, id, run.swapped, std::move(chosen),
                               std::move(rejected), scored);
    set.validate();
    run.scored.push_back(std::move(set));
  }
  return run;
}

namespace {

TemplateSet load_templates(const std::filesystem::path& dir) {
  return dir.empty() ? TemplateSet::defaults() : TemplateSet::load(dir);
}

}  // namespace

RunManifest make_manifest(const PipelineConfig& config, std::string run_id) {
  RunManifest m;
  m.run_id = std::move(run_id);
  m.command = config.command;
  m.dataset = config.dataset;
  m.plan = config.plan;
  m.models = config.models;
  m.variant = config.variant;
  m.generator = config.generator;
  m.random_per_side = config.random_per_side;
  m.catalog = config.catalog;
  m.catalog_hash = config.catalog.hash();
  m.templates_dir = config.templates_dir;
  m.template_hash = load_templates(config.templates_dir).hash();
  m.endpoints = config.endpoints;
  m.distance = config.distance;
  return m;
}

PipelineConfig config_from_manifest(const RunManifest& manifest) {
  manifest.validate();
  PipelineConfig c;
  c.command = manifest.command;
  c.dataset = manifest.dataset;
  c.plan = manifest.plan;
  c.models = manifest.models;
  c.variant = manifest.variant;
  c.generator = manifest.generator;
  c.random_per_side = manifest.random_per_side;
  c.catalog = manifest.catalog;
  c.templates_dir = manifest.templates_dir;
  c.endpoints = manifest.endpoints;
  c.distance = manifest.distance;
  return c;
}

RunRecord execute(const PipelineConfig& config, const std::vector<SeededSample>& samples,
                  Gateway& gateway, std::string run_id) {
  config.validate();
  for (const auto& id : config.models) config.endpoints.model(id);
  const TemplateSet templates = load_templates(config.templates_dir);

  std::vector<std::pair<std::uint64_t, const Comparison*>> tasks;
  for (const auto& s : samples) {
    for (const auto& c : s.comparisons) tasks.emplace_back(s.seed, &c);
  }
  RunRecord record;
  record.manifest = make_manifest(config, std::move(run_id));
  record.comparisons.resize(tasks.size());
  parallel_for(tasks.size(), config.parallelism, [&](std::size_t i) {
    record.comparisons[i] = explain_comparison(*tasks[i].second, tasks[i].first, config, templates, gateway);
  });
  record.reports = derive_reports(record, make_embedder(config.endpoints, gateway));
  return record;
}

ReplayResult replay(const std::filesystem::path& run_dir, Gateway& gateway) {
  const RunRecord persisted = load_run(run_dir);
  const PipelineConfig config = config_from_manifest(persisted.manifest);
  const TemplateSet templates = load_templates(config.templates_dir);
  if (templates.hash() != persisted.manifest.template_hash) {
    throw Error(ErrorKind::configuration,
                fmt::format("templates in '{}' differ from the ones the run used",
                            config.templates_dir.string()));
  }

  std::vector<SeededSample> samples;
  for (const auto& c : persisted.comparisons) {
    if (samples.empty() || samples.back().seed != c.seed) samples.push_back({c.seed, {}});
    samples.back().comparisons.push_back(c.original);
  }

  const auto incomplete = [&gateway] {
    const auto missing = gateway.missing_digests();
    return Error(ErrorKind::replay_incomplete,
                 fmt::format("cache lacks {} response(s): {}", missing.size(), fmt::join(missing, ", ")));
  };
  ReplayResult result;
  try {
    result.record = execute(config, samples, gateway, persisted.manifest.run_id);
  } catch (const Error&) {
    if (!gateway.missing_digests().empty()) throw incomplete();
    throw;
  }
  if (!gateway.missing_digests().empty()) throw incomplete();

  std::set<std::string> names;
  for (const auto& [name, _] : persisted.reports) names.insert(name);
  for (const auto& [name, _] : result.record.reports) names.insert(name);
  for (const auto& name : names) {
    const auto a = persisted.reports.find(name);
    const auto b = result.record.reports.find(name);
    if (a == persisted.reports.end() || b == result.record.reports.end() || a->second != b->second) {
      result.mismatched_reports.push_back(name);
    }
  }
  return result;
}

}  // namespace rmcontrast
