// Acceptance run: one PASS/FAIL line per criterion, each under a pinned time limit.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "rmcontrast/analysis.hpp"
#include "rmcontrast/cli.hpp"
#include "rmcontrast/metrics.hpp"
#include "rmcontrast/pipeline.hpp"
#include "rmcontrast/runstore.hpp"
#include "oracles.hpp"
#include "planted.hpp"
#include "synthetic.hpp"

using namespace rmcontrast;
using nlohmann::json;

namespace {

// Collects the first few failed checks of a criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> random_words(std::mt19937_64& rng) {
  static const char* vocab[] = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "far"};
  std::uniform_int_distribution<std::size_t> len(0, 10);
  std::uniform_int_distribution<int> w(0, 8);
  std::vector<std::string> out(len(rng));
  for (auto& s : out) s = vocab[w(rng)];
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

void criterion1(Check& c) {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int i = 0; i < 10000; ++i) {
    const Side side = pick(rng) < 2 ? Side::chosen : Side::rejected;
    const double other = u(rng);
    const double pert = pick(rng) == 0 ? other : u(rng);
    const auto label = categorize_perturbation(side, other, pert);
    c.expect(label == ContrastLabel::counterfactual || label == ContrastLabel::semifactual, "label outside partition");
    const bool cf = side == Side::chosen ? pert < other : pert > other;
    c.expect((label == ContrastLabel::counterfactual) == cf, fmt::format("triple {} {} {}", to_string(side), other, pert));
    if (pert == other) c.expect(label == ContrastLabel::semifactual, "equality not semifactual");
  }
}

void criterion2(Check& c) {
  std::mt19937_64 rng(1002);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_words(rng), b = random_words(rng);
    const auto longest = std::max(a.size(), b.size());
    const double expected =
        longest == 0 ? 0.0 : static_cast<double>(rmtest::oracle_edit(a, b)) / static_cast<double>(longest);
    const double got = syntactic_distance(join(a), join(b));
    c.expect(got == expected, fmt::format("'{}' vs '{}': {} != {}", join(a), join(b), got, expected));
    c.expect(got == syntactic_distance(join(b), join(a)), "asymmetric");
    c.expect(syntactic_distance(join(a), join(a)) == 0.0, "d(a,a) != 0");
  }
}

void criterion3(Check& c) {
  std::mt19937_64 rng(1003);
  std::uniform_int_distribution<std::size_t> len(2, 8);
  std::uniform_int_distribution<int> levels(2, 9);
  for (int i = 0; i < 1000; ++i) {
    const auto n = len(rng);
    std::uniform_int_distribution<int> key(0, levels(rng) - 1);
    std::vector<double> u(n), v(n);
    for (std::size_t k = 0; k < n; ++k) {
      u[k] = key(rng);
      v[k] = key(rng);
    }
    const auto expected = rmtest::oracle_tau(u, v);
    const auto got = kendall_tau(u, v);
    c.expect(got.has_value() == expected.has_value(), "definedness differs");
    if (got && expected) c.expect(std::abs(*got - *expected) <= 1e-12, fmt::format("tau {} vs {}", *got, *expected));

    std::vector<double> distinct(n);
    for (std::size_t k = 0; k < n; ++k) distinct[k] = static_cast<double>(k);
    std::shuffle(distinct.begin(), distinct.end(), rng);
    std::vector<double> reversed(n);
    for (std::size_t k = 0; k < n; ++k) reversed[k] = -distinct[k];
    c.expect(kendall_tau(distinct, distinct) == 1.0, "tau(v,v) != 1");
    c.expect(kendall_tau(distinct, reversed) == -1.0, "tau(v,rev v) != -1");
  }
}

void criterion4(Check& c) {
  const auto cat = rmtest::synthetic_catalog(15);
  const auto base = rmtest::synthetic_run(1004, 20, 15);
  const auto base_plus = preference_flip_rate(base, Side::chosen, cat);
  const auto base_minus = preference_flip_rate(base, Side::rejected, cat);
  const auto base_reps = representative_single_model(base, base_plus, base_minus, cat);
  const auto base_cov = coverage(base);
  const std::pair<double, double> transforms[] = {{2.0, 0.0}, {0.5, -3.0}, {3.0, 1.25}, {0.125, 100.0}, {1.0, -0.375}};
  for (auto [a, b] : transforms) {
    const auto moved = rmtest::synthetic_run(1004, 20, 15, a, b);
    for (std::size_t i = 0; i < base.size(); ++i) {
      for (std::size_t k = 0; k < base[i].entries.size(); ++k) {
        c.expect(base[i].entries[k].label == moved[i].entries[k].label, fmt::format("label a={} b={}", a, b));
      }
      for (Side side : kSides) {
        c.expect(local_ranking(base[i], side, cat).ranking.order() == local_ranking(moved[i], side, cat).ranking.order(),
                 "local ranking order");
      }
    }
    c.expect(coverage(moved).counts == base_cov.counts, "coverage");
    const auto plus = preference_flip_rate(moved, Side::chosen, cat);
    const auto minus = preference_flip_rate(moved, Side::rejected, cat);
    c.expect(plus == base_plus && minus == base_minus, "PFR");
    const auto reps = representative_single_model(moved, plus, minus, cat);
    c.expect(reps.size() == base_reps.size(), "representative count");
    for (std::size_t i = 0; i < std::min(reps.size(), base_reps.size()); ++i) {
      c.expect(reps[i].comparison_id == base_reps[i].comparison_id, "representative order");
    }
  }
}

// Criteria 5 and 6 share one fixture run.
void criteria5and6(Check& c5, Check& c6) {
  rmtest::PlantedEnv env("acceptance-sens");
  const auto run_dir = env.root() / "run";
  const auto r = cli({"sensitivity", "--registry", env.paths().registry.string(), "--dataset", "toy", "--models", "mock",
                      "--endpoints", env.paths().endpoints.string(), "--n", "8", "--out", run_dir.string()});
  c5.expect(r.code == 0, "sensitivity exit code " + std::to_string(r.code) + ": " + r.err);
  if (r.code != 0) {
    c6.expect(false, "no fixture run");
    return;
  }
  const auto sens = json::parse(rmtest::read_file(run_dir / "reports" / "sensitivity.json"));
  const auto& chosen = sens.at("models").at(0).at("chosen");
  c5.expect(chosen.at("ranking").at(0) == "harmlessness", "harmlessness not ranked first");
  bool found = false;
  for (const auto& a : chosen.at("attributes")) {
    if (a.at("attribute") == "harmlessness") {
      found = true;
      c5.expect(a.at("pfr") == 1.0, fmt::format("PFR(harmlessness) = {}", a.at("pfr").dump()));
    } else if (!a.at("pfr").is_null()) {
      c5.expect(a.at("pfr").get<double>() < 1.0, fmt::format("PFR({}) = 1", a.at("attribute").get<std::string>()));
    }
  }
  c5.expect(found, "harmlessness missing");

  const auto record = load_run(run_dir);
  const auto sets = record.sets("mock");
  c6.expect(sets.size() == testkit::kPlantedComparisons, "explained comparisons");
  const auto cov = coverage(sets);
  for (auto label : {ContrastLabel::counterfactual, ContrastLabel::semifactual}) {
    c6.expect(cov.fraction(CoverageScope::both, label) <=
                  std::min(cov.fraction(CoverageScope::chosen, label), cov.fraction(CoverageScope::rejected, label)),
              "both > min(chosen, rejected)");
  }
  for (const auto& run : record.comparisons) {
    for (const auto& set : run.scored) {
      for (Side side : kSides) {
        const auto perturbations = static_cast<std::size_t>(std::count_if(
            run.perturbations.begin(), run.perturbations.end(), [&](const Perturbation& p) { return p.side == side; }));
        c6.expect(set.count(side, ContrastLabel::counterfactual) + set.count(side, ContrastLabel::semifactual) ==
                      perturbations,
                  fmt::format("{} {}: CF+SF != scored", run.original.id, to_string(side)));
      }
    }
  }
}

void criterion7(Check& c) {
  auto seed = [](std::uint64_t s, std::size_t of10) {
    SeedMetrics m;
    m.seed = s;
    m.coverage.comparisons = 10;
    for (auto& scope : m.coverage.counts) scope = {of10, of10};
    return m;
  };
  const auto tables = emit_tables({{"synthetic", "method", {seed(1, 8), seed(2, 6)}}});
  c.expect(tables.coverage_csv.find("synthetic,method,0.70±.100,0.70±.100") != std::string::npos, tables.coverage_csv);
  const std::vector<double> values = {0.8, 0.6};
  c.expect(format_mean_std(values) == "0.70±.100", format_mean_std(values));
}

void criterion8(Check& c) {
  rmtest::PlantedEnv env("acceptance-replay");
  const auto run_dir = env.root() / "run";
  const auto r = cli({"explain", "--registry", env.paths().registry.string(), "--dataset", "toy", "--models", "mock",
                      "--endpoints", env.paths().endpoints.string(), "--n", "8", "--out", run_dir.string()});
  c.expect(r.code == 0, "explain exit code " + std::to_string(r.code) + ": " + r.err);
  if (r.code != 0) return;
  std::map<std::string, std::string> before;
  for (const auto& e : std::filesystem::directory_iterator(run_dir / "reports")) {
    before[e.path().filename().string()] = rmtest::read_file(e.path());
  }
  env.stop_server();  // network disabled from here on
  const auto replay = cli({"replay", "--run", run_dir.string()});
  c.expect(replay.code == 0, "replay exit code " + std::to_string(replay.code) + ": " + replay.err + replay.out);
  c.expect(replay.out.find(fmt::format("reports identical: {}", before.size())) != std::string::npos, replay.out);
  std::map<std::string, std::string> after;
  for (const auto& e : std::filesystem::directory_iterator(run_dir / "reports")) {
    after[e.path().filename().string()] = rmtest::read_file(e.path());
  }
  c.expect(after == before, "report files changed on disk");
}

void criterion9(Check& c) {
  for (std::size_t n = 1; n <= 30; ++n) {
    PipelineConfig config;
    config.models = {"m"};
    c.expect(config.catalog.size() == 15, "catalog size");
    c.expect(plan_requests(config, n).total() == n * (2 + 2 + 60), fmt::format("n={}", n));
  }
  rmtest::TempDir dir("acceptance-dry");
  const auto paths = testkit::write_planted_fixtures(dir.path(), "http://127.0.0.1:1");
  const auto r = cli({"explain", "--registry", paths.registry.string(), "--dataset", "toy", "--models", "mock", "--n",
                      "8", "--dry-run"});
  c.expect(r.code == 0, r.err);
  c.expect(r.out.find(fmt::format("planned requests: {}\n", 8 * 64)) != std::string::npos, r.out);
}

void criterion10(Check& c) {
  rmtest::PlantedEnv env("acceptance-winrate");
  const auto r = cli({"winrate", "--pairs", env.paths().winrate_pairs.string(), "--models", "mock", "--endpoints",
                      env.paths().endpoints.string(), "--out", (env.root() / "wr").string()});
  c.expect(r.code == 0, r.err);
  std::smatch m;
  const bool parsed = std::regex_search(r.out, m, std::regex(R"(win rate: ([0-9.]+) \((\d+)/(\d+)\))"));
  c.expect(parsed, r.out);
  if (parsed) {
    c.expect(m[2] == "11" && m[3] == "20", r.out);
    c.expect(std::stod(m[1]) == 0.55, r.out);
  }
}

struct Outcome {
  bool pass;
  double seconds;
  std::string detail;
};

template <typename Fn>
double timed(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome judge(const Check& c, double seconds, double limit) {
  std::string detail;
  for (const auto& f : c.failures) detail += "\n    " + f;
  if (seconds >= limit) detail += fmt::format("\n    over time limit ({:.3f} s >= {} s)", seconds, limit);
  return {c.ok() && seconds < limit, seconds, detail};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const char* names[] = {"",
                         "CF/SF partition",
                         "Levenshtein oracle equivalence",
                         "Kendall tau oracle equivalence",
                         "reward-monotone invariance",
                         "planted-sensitivity recovery",
                         "coverage consistency",
                         "table cell format",
                         "replay determinism",
                         "dry-run request accounting",
                         "win-rate check"};
  const double limits[] = {0, 1, 5, 5, 5, 60, 60, 1, 60, 1, 1};
  std::map<int, Outcome> outcomes;

  auto run_one = [&](int id, void (*fn)(Check&)) {
    Check c;
    double s = 0;
    try {
      s = timed([&] { fn(c); });
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    outcomes[id] = judge(c, s, limits[id]);
  };
  run_one(1, criterion1);
  run_one(2, criterion2);
  run_one(3, criterion3);
  run_one(4, criterion4);
  {
    Check c5, c6;
    double s = 0;
    try {
      s = timed([&] { criteria5and6(c5, c6); });
    } catch (const std::exception& e) {
      c5.failures.push_back(std::string("exception: ") + e.what());
      c6.failures.push_back("not run");
    }
    outcomes[5] = judge(c5, s, limits[5]);
    outcomes[6] = judge(c6, s, limits[6]);
  }
  run_one(7, criterion7);
  run_one(8, criterion8);
  run_one(9, criterion9);
  run_one(10, criterion10);

  bool all = true;
  for (const auto& [id, o] : outcomes) {
    all = all && o.pass;
    std::cout << fmt::format("criterion {}: {} ({}; {:.3f} s, limit {} s){}\n", id, o.pass ? "PASS" : "FAIL", names[id],
                             o.seconds, limits[id], o.detail);
  }
  return all ? 0 : 1;
}
