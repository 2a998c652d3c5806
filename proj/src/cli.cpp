#include "rmcontrast/cli.hpp"

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmcontrast/analysis.hpp"
#include "rmcontrast/pipeline.hpp"
#include "rmcontrast/runstore.hpp"
#include "rmcontrast/testkit.hpp"

namespace rmcontrast {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
    case ErrorKind::configuration:
      return 2;
    case ErrorKind::transport:
    case ErrorKind::replay_incomplete:
      return 3;
    default:
      return 4;
  }
}

namespace {

struct Options {
  std::string endpoints;
  std::string registry;
  std::string dataset;
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds{1};
  std::size_t n = 30;
  std::string variant = "center";
  std::string generator = "attribute_conditioned";
  std::size_t random_n = 1;
  std::string out;
  std::string cache;
  std::string templates;
  std::size_t parallelism = 4;
  std::string grouping = "per_label_set";
  bool exclude_degenerate = false;
  bool dry_run = false;
  std::string side = "chosen";
  std::size_t top = 5;
  std::string run_dir;
  std::string pairs;
  std::string fixtures;
  std::string init_dir;
  int port = 8765;
};

void add_run_options(CLI::App* cmd, Options& o, bool generation) {
  cmd->add_option("--endpoints", o.endpoints, "endpoints JSON file");
  cmd->add_option("--registry", o.registry, "dataset registry JSON file")->required();
  cmd->add_option("--dataset", o.dataset, "dataset name in the registry")->required();
  cmd->add_option("--models", o.models, "reward model ids (comma separated)")->required()->delimiter(',');
  cmd->add_option("--seeds", o.seeds, "sampling seeds (comma separated)")->delimiter(',');
  cmd->add_option("--n", o.n, "comparisons per seed")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--cache", o.cache, "response cache directory (overrides the endpoints file)");
  cmd->add_option("--parallelism", o.parallelism, "concurrent comparisons and step 2 calls")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--dry-run", o.dry_run, "print the planned request count and exit");
  if (!generation) return;
  cmd->add_option("--variant", o.variant, "prompt variant: center, only or pass");
  cmd->add_option("--generator", o.generator, "attribute_conditioned (ours) or random_baseline (random)");
  cmd->add_option("--random-n", o.random_n, "random rewrites per side")->check(CLI::PositiveNumber);
  cmd->add_option("--templates", o.templates, "directory of prompt template overrides");
  cmd->add_option("--grouping", o.grouping, "diversity grouping: per_label_set or pooled");
  cmd->add_flag("--exclude-degenerate", o.exclude_degenerate, "leave unchanged rewrites out of distances");
}

EndpointSet endpoints_for(const Options& o, bool required) {
  EndpointSet set;
  if (o.endpoints.empty()) {
    if (required) throw Error(ErrorKind::usage, "--endpoints is required");
    return set;
  }
  set = load_endpoints(o.endpoints);
  if (!o.cache.empty()) set.cache_dir = o.cache;
  if (!set.cache_dir.empty()) set.cache_dir = fs::absolute(set.cache_dir);
  return set;
}

PipelineConfig build_config(const Options& o, const std::string& command) {
  const auto registry = load_registry(o.registry);
  const auto it = registry.find(o.dataset);
  if (it == registry.end()) {
    throw Error(ErrorKind::usage, fmt::format("dataset '{}' is not in {}", o.dataset, o.registry));
  }
  PipelineConfig c;
  c.command = command;
  c.dataset = it->second;
  c.dataset.path = fs::absolute(c.dataset.path);
  c.plan = {o.n, o.seeds};
  c.models = o.models;
  try {
    c.variant = parse_variant(o.variant);
    c.generator = parse_generator(o.generator);
    c.distance.grouping = parse_grouping(o.grouping);
  } catch (const Error& e) {
    throw Error(ErrorKind::usage, e.what());
  }
  c.distance.exclude_degenerate = o.exclude_degenerate;
  c.random_per_side = o.random_n;
  if (!o.templates.empty()) c.templates_dir = fs::absolute(o.templates);
  c.parallelism = o.parallelism;
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(e.kind() == ErrorKind::invalid_input ? ErrorKind::usage : e.kind(), e.what());
  }
  c.endpoints = endpoints_for(o, !o.dry_run);
  if (!o.dry_run) {
    for (const auto& id : c.models) c.endpoints.model(id);
  }
  return c;
}

std::vector<SeededSample> draw(const PipelineConfig& c) {
  LoadStats stats;
  const auto population = load_dataset(c.dataset, &stats);
  spdlog::info("{}: {} usable of {} records", c.dataset.name, population.size(), stats.records);
  return sample(population, c.plan);
}

void print_plan(std::ostream& out, const RequestPlan& p) {
  fmt::print(out, "comparisons: {}\n", p.comparisons);
  fmt::print(out, "original scores: {}\n", p.original_scores);
  if (p.step1 + p.step2 > 0) {
    fmt::print(out, "step1 calls: {}\n", p.step1);
    fmt::print(out, "step2 calls: {}\n", p.step2);
  }
  if (p.random > 0) fmt::print(out, "random rewrite calls: {}\n", p.random);
  fmt::print(out, "perturbation scores: {}\n", p.perturbation_scores);
  fmt::print(out, "planned requests: {}\n", p.total());
  fmt::print(out, "embedding requests (at most): {}\n", p.embeddings);
}

fs::path output_dir(const Options& o, const std::string& run_id) {
  return o.out.empty() ? fs::path("runs") / run_id : fs::path(o.out);
}

struct RunOutcome {
  RunRecord record;
  fs::path dir;
};

std::optional<RunOutcome> run_pipeline(const Options& o, const std::string& command, std::ostream& out) {
  const auto config = build_config(o, command);
  const auto samples = draw(config);
  std::size_t n = 0;
  for (const auto& s : samples) n += s.comparisons.size();
  if (o.dry_run) {
    print_plan(out, plan_requests(config, n));
    return std::nullopt;
  }
  auto gateway = make_gateway(config.endpoints, false);
  const auto run_id = new_run_id();
  RunOutcome outcome{execute(config, samples, *gateway, run_id), output_dir(o, run_id)};
  persist(outcome.record, outcome.dir);

  std::map<ComparisonStatus, std::size_t> counts;
  for (const auto& c : outcome.record.comparisons) ++counts[c.status];
  const auto stats = gateway->stats();
  fmt::print(out, "run: {}\n", outcome.dir.string());
  fmt::print(out, "explained: {}, skipped (tie): {}, skipped (disagreement): {}\n",
             counts[ComparisonStatus::explained], counts[ComparisonStatus::skipped_tie],
             counts[ComparisonStatus::skipped_disagreement]);
  fmt::print(out, "requests: {} network, {} cached\n", stats.network_requests, stats.cache_hits);
  return outcome;
}

void print_sensitivity(std::ostream& out, const RunRecord& record) {
  const auto& m = record.manifest;
  for (const auto& model : m.models) {
    const auto sets = record.sets(model);
    for (const auto side : kSides) {
      const auto report = preference_flip_rate(sets, side, m.catalog, m.dataset.name);
      fmt::print(out, "{} {}:\n", model, to_string(side));
      std::map<std::string, const AttributeFlipRate*> by_name;
      for (const auto& a : report.attributes) by_name[a.attribute] = &a;
      std::size_t rank = 0;
      for (const auto& e : report.ranking().entries) {
        const auto& a = *by_name.at(e.attribute);
        fmt::print(out, "  {:>2}. {:<16} {:.3f} ({}/{})\n", ++rank, e.attribute, e.key, a.flips, a.denominator);
      }
      for (const auto& a : report.attributes) {
        if (!a.pfr) fmt::print(out, "      {:<16} n/a\n", a.attribute);
      }
    }
  }
}

void print_representatives(std::ostream& out, const std::vector<RepresentativeScore>& scores,
                           std::size_t top) {
  for (std::size_t i = 0; i < std::min(top, scores.size()); ++i) {
    fmt::print(out, "  {:>2}. {:<20} {:+.3f} ({:+.3f}, {:+.3f})\n", i + 1, scores[i].comparison_id,
               scores[i].score, scores[i].tau_first, scores[i].tau_second);
  }
}

std::vector<ScoredExplanationSet> unique_sets(const RunRecord& r, const std::string& model) {
  std::vector<ScoredExplanationSet> out;
  std::set<std::string> seen;
  for (auto& s : r.sets(model)) {
    if (seen.insert(s.comparison_id()).second) out.push_back(std::move(s));
  }
  return out;
}

int cmd_representatives(const Options& o, std::ostream& out) {
  auto outcome = run_pipeline(o, "representatives", out);
  if (!outcome) return 0;
  const auto& r = outcome->record;
  for (const auto& model : r.manifest.models) {
    const auto sets = r.sets(model);
    const auto scores = representative_single_model(
        unique_sets(r, model), preference_flip_rate(sets, Side::chosen, r.manifest.catalog),
        preference_flip_rate(sets, Side::rejected, r.manifest.catalog), r.manifest.catalog);
    fmt::print(out, "{} representatives:\n", model);
    print_representatives(out, scores, o.top);
  }
  return 0;
}

int cmd_compare_models(const Options& o, std::ostream& out) {
  if (o.models.size() != 2) throw Error(ErrorKind::usage, "compare-models needs exactly two --models");
  Side side = Side::chosen;
  try {
    side = parse_side(o.side);
  } catch (const Error& e) {
    throw Error(ErrorKind::usage, e.what());
  }
  auto outcome = run_pipeline(o, "compare-models", out);
  if (!outcome) return 0;
  const auto& r = outcome->record;
  const auto& cat = r.manifest.catalog;
  const auto& a = r.manifest.models[0];
  const auto& b = r.manifest.models[1];
  const auto sets_a = r.sets(a);
  const auto sets_b = r.sets(b);
  auto global_a = preference_flip_rate(sets_a, side, cat);
  auto global_b = preference_flip_rate(sets_b, side, cat);
  global_a.model_id = a;
  global_b.model_id = b;
  const auto tau = kendall_tau(global_a.pfr_by_attribute(), global_b.pfr_by_attribute());
  fmt::print(out, "kendall tau ({} vs {}, {}): {}\n", a, b, to_string(side),
             tau ? fmt::format("{:+.3f}", *tau) : std::string("undefined"));
  const auto scores =
      representative_two_models(unique_sets(r, a), unique_sets(r, b), side, global_a, global_b, cat);
  fmt::print(out, "representatives for both models ({}):\n", to_string(side));
  print_representatives(out, scores, o.top);
  return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
  const fs::path root = o.out.empty() ? fs::path("runs") / new_run_id() : fs::path(o.out);
  std::vector<TableRow> rows;
  const auto base = build_config(o, "ablate");
  const auto samples = draw(base);
  std::size_t n = 0;
  for (const auto& s : samples) n += s.comparisons.size();
  if (o.dry_run) {
    fmt::print(out, "variants: 3\n");
    print_plan(out, plan_requests(base, n * 3));
    return 0;
  }
  auto gateway = make_gateway(base.endpoints, false);
  std::string csv = "dataset,method,variant,both-CF,both-SF,syn. dist.,sem. dist,sem. div.\n";
  for (const auto variant : {PromptVariant::center, PromptVariant::only, PromptVariant::pass}) {
    auto config = base;
    config.variant = variant;
    const auto record = execute(config, samples, *gateway, new_run_id());
    persist(record, root / std::string(to_string(variant)));
    const auto embedder = make_embedder(config.endpoints, *gateway);
    for (const auto& model : config.models) {
      std::vector<double> cf, sf, syn, sem, div;
      for (const auto seed : config.plan.seeds) {
        const auto sets = record.sets(model, seed);
        const auto cov = coverage(sets);
        const auto d = distance_report(sets, embedder, config.distance);
        cf.push_back(cov.fraction(CoverageScope::both, ContrastLabel::counterfactual));
        sf.push_back(cov.fraction(CoverageScope::both, ContrastLabel::semifactual));
        if (d.syntactic) syn.push_back(*d.syntactic);
        if (d.semantic) sem.push_back(*d.semantic);
        if (d.diversity) div.push_back(*d.diversity);
      }
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", config.dataset.name, model, to_string(variant),
                         format_mean_std(cf), format_mean_std(sf), format_mean_std(syn),
                         format_mean_std(sem), format_mean_std(div));
    }
  }
  std::ofstream f(root / "ablation.csv", std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io, fmt::format("cannot write {}", (root / "ablation.csv").string()));
  f << csv;
  fmt::print(out, "run: {}\n{}", root.string(), csv);
  return 0;
}

int cmd_discover(const Options& o, std::ostream& out) {
  const auto config = build_config(o, "discover");
  const auto samples = draw(config);
  std::size_t n = 0;
  for (const auto& s : samples) n += s.comparisons.size();
  if (o.dry_run) {
    fmt::print(out, "original scores: {}\ndiscovery calls: {}\nplanned requests: {}\n", 2 * n, n, 3 * n);
    return 0;
  }
  auto gateway = make_gateway(config.endpoints, false);
  const auto& model = config.endpoints.model(config.models.front());
  std::vector<std::pair<Comparison, OriginalRewards>> inputs;
  for (const auto& s : samples) {
    for (const auto& c : s.comparisons) {
      const auto a = gateway->score(model.config, model.scalarisation, c.prompt, c.chosen).scalar;
      const auto b = gateway->score(model.config, model.scalarisation, c.prompt, c.rejected).scalar;
      try {
        const auto oriented = orient_comparison(c, a, b);
        inputs.emplace_back(oriented.comparison,
                            OriginalRewards{std::max(a, b), std::min(a, b)});
      } catch (const Error& e) {
        spdlog::info("{}", e.what());
      }
    }
  }
  GeneratorConfig gen;
  gen.chat = config.endpoints.chat;
  gen.concurrency = config.parallelism;
  gen.fixture_markers = config.endpoints.fixture_markers;
  const auto found = discover_attributes(inputs, gen, *gateway);
  json j = json::array();
  for (const auto& a : found) {
    fmt::print(out, "{:<24} {}\n", a.name, a.count);
    j.push_back({{"name", a.name}, {"count", a.count}});
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "discovered.json", std::ios::trunc);
    f << j.dump(2) << "\n";
    if (!f) throw Error(ErrorKind::io, fmt::format("cannot write {}/discovered.json", o.out));
  }
  return 0;
}

int cmd_winrate(const Options& o, std::ostream& out) {
  if (o.models.empty()) throw Error(ErrorKind::usage, "--models is required");
  struct Pair {
    std::string prompt, original, perturbed;
  };
  std::vector<Pair> pairs;
  std::ifstream in(o.pairs);
  if (!in) throw Error(ErrorKind::usage, fmt::format("cannot open pairs file '{}'", o.pairs));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      pairs.push_back({j.value("prompt", std::string{}), j.at("original").get<std::string>(),
                       j.at("perturbed").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, fmt::format("{}:{}: {}", o.pairs, line_no, e.what()));
    }
  }
  if (pairs.empty()) throw Error(ErrorKind::invalid_input, fmt::format("{}: no pairs", o.pairs));
  if (o.dry_run) {
    fmt::print(out, "planned requests: {}\n", 2 * pairs.size() * o.models.size());
    return 0;
  }
  const auto endpoints = endpoints_for(o, true);
  for (const auto& id : o.models) endpoints.model(id);
  auto gateway = make_gateway(endpoints, false);
  json report = json::object();
  for (const auto& id : o.models) {
    const auto& m = endpoints.model(id);
    std::vector<std::pair<double, double>> rewards;
    for (const auto& p : pairs) {
      rewards.emplace_back(gateway->score(m.config, m.scalarisation, p.prompt, p.original).scalar,
                           gateway->score(m.config, m.scalarisation, p.prompt, p.perturbed).scalar);
    }
    const double rate = win_rate(rewards);
    const auto wins = static_cast<std::size_t>(std::count_if(
        rewards.begin(), rewards.end(), [](const auto& r) { return r.second > r.first; }));
    fmt::print(out, "{} win rate: {:.4f} ({}/{})\n", id, rate, wins, rewards.size());
    report[id] = {{"win_rate", rate}, {"wins", wins}, {"pairs", rewards.size()}};
  }
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "winrate.json", std::ios::trunc);
    f << report.dump(2) << "\n";
    if (!f) throw Error(ErrorKind::io, fmt::format("cannot write {}/winrate.json", o.out));
  }
  return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
  auto record = load_run(o.run_dir);
  auto endpoints = record.manifest.endpoints;
  if (!o.cache.empty()) endpoints.cache_dir = fs::absolute(o.cache);
  auto gateway = make_gateway(endpoints, false);
  record.reports = derive_reports(record, make_embedder(endpoints, *gateway));
  persist(record, o.run_dir);
  for (const auto& [name, _] : record.reports) {
    fmt::print(out, "{}\n", (fs::path(o.run_dir) / "reports" / name).string());
  }
  return 0;
}

int cmd_replay(const Options& o, std::ostream& out) {
  const auto manifest_endpoints = load_run(o.run_dir).manifest.endpoints;
  auto endpoints = manifest_endpoints;
  if (!o.cache.empty()) endpoints.cache_dir = fs::absolute(o.cache);
  auto transport = std::make_shared<OfflineTransport>();
  auto gateway = make_gateway(endpoints, true, transport);
  const auto result = replay(o.run_dir, *gateway);
  fmt::print(out, "replayed {} comparisons from cache ({} network attempts)\n",
             result.record.comparisons.size(), transport->attempts());
  if (!result.mismatched_reports.empty()) {
    for (const auto& name : result.mismatched_reports) fmt::print(out, "mismatch: {}\n", name);
    throw Error(ErrorKind::replay_mismatch,
                fmt::format("{} report(s) differ from the persisted run", result.mismatched_reports.size()));
  }
  fmt::print(out, "reports identical: {}\n", result.record.reports.size());
  return 0;
}

testkit::MockServer* g_mock = nullptr;

extern "C" void stop_mock(int) {
  if (g_mock) g_mock->stop();
}

int cmd_mock_serve(const Options& o, std::ostream& out) {
  if (o.port <= 0 || o.port > 65535) throw Error(ErrorKind::usage, "--port must be in 1..65535");
  std::string fixtures = o.fixtures;
  const std::string base_url = fmt::format("http://127.0.0.1:{}", o.port);
  if (!o.init_dir.empty()) {
    const auto paths = testkit::write_planted_fixtures(o.init_dir, base_url);
    fmt::print(out, "fixtures written to {}\n", fs::path(o.init_dir).string());
    if (fixtures.empty()) fixtures = paths.fixtures.string();
  }
  if (fixtures.empty()) throw Error(ErrorKind::usage, "mock-serve needs --fixtures or --init");
  testkit::MockServer server(testkit::ToyRewardSpec::defaults(),
                             testkit::CannedPerturbationSpec::load(fixtures));
  server.start(o.port);
  fmt::print(out, "serving on {}\n", server.base_url());
  out.flush();
  g_mock = &server;
  std::signal(SIGINT, stop_mock);
  std::signal(SIGTERM, stop_mock);
  server.wait();
  g_mock = nullptr;
  return 0;
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::get("rmcontrast");
  if (!logger) {
    logger = spdlog::stderr_color_mt("rmcontrast");
    spdlog::set_default_logger(logger);
  }
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw Error(ErrorKind::usage, fmt::format("unknown log level '{}'", level));
  }
  spdlog::set_level(lvl);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive explanations for reward model preferences"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::map<std::string, CLI::App*> cmds;
  for (const auto& [name, help, generation] :
       std::vector<std::tuple<std::string, std::string, bool>>{
           {"explain", "sample, generate, score and label contrastive explanations", true},
           {"sensitivity", "explain, then report per-attribute preference flip rates", true},
           {"representatives", "explain, then rank comparisons by local-global agreement", true},
           {"compare-models", "explain with two models and rank shared representatives", true},
           {"ablate", "explain once per prompt variant", true},
           {"discover", "ask the chat model which attributes explain each preference", false}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_run_options(cmd, o, generation);
    cmds[name] = cmd;
  }
  cmds["representatives"]->add_option("--top", o.top, "entries to print");
  cmds["compare-models"]->add_option("--side", o.side, "chosen or rejected");
  cmds["compare-models"]->add_option("--top", o.top, "entries to print");

  auto* winrate = app.add_subcommand("winrate", "fraction of perturbed responses out-scoring originals");
  winrate->add_option("--pairs", o.pairs, "JSONL of {prompt, original, perturbed}")->required();
  winrate->add_option("--models", o.models, "reward model ids")->required()->delimiter(',');
  winrate->add_option("--endpoints", o.endpoints, "endpoints JSON file");
  winrate->add_option("--cache", o.cache, "response cache directory");
  winrate->add_option("--out", o.out, "output directory");
  winrate->add_flag("--dry-run", o.dry_run, "print the planned request count and exit");

  auto* report = app.add_subcommand("report", "re-derive the reports of a run directory");
  report->add_option("--run", o.run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--cache", o.cache, "response cache directory");

  auto* replay_cmd = app.add_subcommand("replay", "re-run a run from the cache alone and compare reports");
  replay_cmd->add_option("--run", o.run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  replay_cmd->add_option("--cache", o.cache, "response cache directory");

  auto* mock = app.add_subcommand("mock-serve", "serve the toy reward, canned chat and hash embedding endpoints");
  mock->add_option("--fixtures", o.fixtures, "canned completions JSON");
  mock->add_option("--port", o.port, "port on 127.0.0.1");
  mock->add_option("--init", o.init_dir, "write the planted toy fixtures to this directory first");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    configure_logging(log_level);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "explain") {
      run_pipeline(o, name, out);
      return 0;
    }
    if (name == "sensitivity") {
      auto outcome = run_pipeline(o, name, out);
      if (outcome) print_sensitivity(out, outcome->record);
      return 0;
    }
    if (name == "representatives") return cmd_representatives(o, out);
    if (name == "compare-models") return cmd_compare_models(o, out);
    if (name == "ablate") return cmd_ablate(o, out);
    if (name == "discover") return cmd_discover(o, out);
    if (name == "winrate") return cmd_winrate(o, out);
    if (name == "report") return cmd_report(o, out);
    if (name == "replay") return cmd_replay(o, out);
    if (name == "mock-serve") return cmd_mock_serve(o, out);
    throw Error(ErrorKind::usage, fmt::format("unknown command {}", name));
  } catch (const Error& e) {
    fmt::print(err, "error ({}): {}\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return 4;
  }
}

}  // namespace rmcontrast
