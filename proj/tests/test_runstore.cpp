#include <cstdio>
#include <random>
#include <regex>

#include <gtest/gtest.h>

#include "json.hpp"
#include "rmcontrast/runstore.hpp"
#include "planted.hpp"
#include "support.hpp"

using namespace rmcontrast;
using nlohmann::json;

namespace {

// printf-based reference for the mean±std cell.
std::string reference_cell(const std::vector<double>& v) {
  long double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  long double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= v.size();
  char m[64], s[64];
  std::snprintf(m, sizeof m, "%.2f", static_cast<double>(mean));
  std::snprintf(s, sizeof s, "%.3f", std::sqrt(static_cast<double>(var)));
  std::string sd = s;
  if (sd.rfind("0.", 0) == 0) sd = sd.substr(1);
  return std::string(m) + "±" + sd;
}

std::vector<std::string> files_under(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.push_back(std::filesystem::relative(e.path(), dir).string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

SeedMetrics seed_with_coverage(std::uint64_t seed, std::size_t chosen_cf_of_10) {
  SeedMetrics s;
  s.seed = seed;
  s.coverage.comparisons = 10;
  for (auto& scope : s.coverage.counts) scope = {chosen_cf_of_10, 10};
  s.distances.syntactic = 0.5;
  return s;
}

}  // namespace

TEST(FormatMeanStd, Examples) {
  const std::vector<double> two = {0.8, 0.6};
  EXPECT_EQ(format_mean_std(two), "0.70±.100");
  const std::vector<double> one = {0.25};
  EXPECT_EQ(format_mean_std(one), "0.25±.000");
  EXPECT_EQ(format_mean_std(std::vector<double>{}), "n/a");
  const std::vector<double> wide = {0.0, 3.0};
  EXPECT_EQ(format_mean_std(wide), "1.50±1.500");
}

TEST(FormatMeanStd, MatchesReferenceProperty) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> len(1, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    // Continuous draws: decimal rounding ties have probability zero.
    std::vector<double> v(len(rng));
    for (auto& x : v) x = u(rng);
    EXPECT_EQ(format_mean_std(v), reference_cell(v)) << v.size();
  }
}

TEST(Tables, ColumnOrderAndCells) {
  TableRow row{"toy", "attribute_conditioned center [m]", {seed_with_coverage(1, 8), seed_with_coverage(2, 6)}};
  auto t = emit_tables({row});
  EXPECT_EQ(t.coverage_csv,
            "dataset,method,chosen-CF,chosen-SF,rejected-CF,rejected-SF,both-CF,both-SF\n"
            "toy,attribute_conditioned center [m],0.70±.100,1.00±.000,0.70±.100,1.00±.000,0.70±.100,1.00±.000\n");
  EXPECT_EQ(t.distance_csv,
            "dataset,method,syn. dist.,sem. dist,sem. div.\n"
            "toy,attribute_conditioned center [m],0.50±.000,n/a,n/a\n");
}

TEST(Chart, DeterministicWithFullHeightBar) {
  SensitivityReport a;
  a.model_id = "m1";
  a.dataset = "toy";
  a.attributes = {{"harmlessness", 1.0, 8, 8}, {"clarity", 0.25, 2, 8}, {"tone", std::nullopt, 0, 0}};
  SensitivityReport b = a;
  b.model_id = "m<2>";
  b.attributes[0].pfr = 0.5;
  const auto svg = sensitivity_chart_svg({a, b});
  EXPECT_EQ(svg, sensitivity_chart_svg({a, b}));
  EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
  EXPECT_NE(svg.find("height=\"200.0\""), std::string::npos);
  EXPECT_NE(svg.find("m&lt;2&gt;"), std::string::npos);
  std::regex rect("<rect [^>]*><title>");
  EXPECT_EQ(std::distance(std::sregex_iterator(svg.begin(), svg.end(), rect), std::sregex_iterator()), 4);
}

TEST(RunId, Shape) {
  EXPECT_TRUE(std::regex_match(new_run_id(), std::regex("[0-9]{8}T[0-9]{6}-[0-9a-f]{8}")));
  EXPECT_NE(new_run_id(), new_run_id());
}

class PlantedRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    env = new rmtest::PlantedEnv("runstore");
    record = new RunRecord(env->run(env->config(4, {1, 2})));
  }
  static void TearDownTestSuite() {
    delete record;
    delete env;
  }
  static rmtest::PlantedEnv* env;
  static RunRecord* record;
};

rmtest::PlantedEnv* PlantedRun::env = nullptr;
RunRecord* PlantedRun::record = nullptr;

TEST_F(PlantedRun, RoundTrip) {
  rmtest::TempDir dir("rt");
  persist(*record, dir.path());
  auto loaded = load_run(dir.path());
  EXPECT_EQ(loaded.manifest, record->manifest);
  ASSERT_EQ(loaded.comparisons.size(), record->comparisons.size());
  for (std::size_t i = 0; i < loaded.comparisons.size(); ++i) EXPECT_EQ(loaded.comparisons[i], record->comparisons[i]);
  EXPECT_EQ(loaded.reports, record->reports);
  EXPECT_EQ(loaded, *record);
  EXPECT_EQ(files_under(dir.path()).size(), 5u + record->reports.size());
}

TEST_F(PlantedRun, ArtifactsAreJsonLines) {
  rmtest::TempDir dir("jl");
  persist(*record, dir.path());
  std::size_t perturbations = 0;
  for (const auto& c : record->comparisons) perturbations += c.perturbations.size();
  std::istringstream lines(rmtest::read_file(dir / "perturbations.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = json::parse(line);
    EXPECT_TRUE(j.contains("comparison_id"));
    ++n;
  }
  EXPECT_EQ(n, perturbations);
  auto manifest = json::parse(rmtest::read_file(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("run_id"), "test-run");
}

TEST_F(PlantedRun, PersistTwiceIdenticalExceptRunId) {
  rmtest::TempDir a("pa"), b("pb");
  persist(*record, a.path());
  auto again = env->run(env->config(4, {1, 2}), "other-run");
  persist(again, b.path());
  const auto files = files_under(a.path());
  ASSERT_EQ(files, files_under(b.path()));
  for (const auto& f : files) {
    auto x = rmtest::read_file(a.path() / f), y = rmtest::read_file(b.path() / f);
    if (f == "manifest.json") {
      auto jx = json::parse(x), jy = json::parse(y);
      EXPECT_NE(jx.at("run_id"), jy.at("run_id"));
      jx.erase("run_id");
      jy.erase("run_id");
      EXPECT_EQ(jx, jy);
    } else {
      EXPECT_EQ(x, y) << f;
    }
  }
}

TEST_F(PlantedRun, ReportsPresent) {
  for (const char* name : {"summary.json", "coverage.csv", "distances.csv", "correctness.csv", "sensitivity.json",
                           "representatives.json", "sensitivity_toy_chosen.svg", "sensitivity_toy_rejected.svg"}) {
    EXPECT_TRUE(record->reports.contains(name)) << name;
  }
  EXPECT_EQ(record->reports.at("coverage.csv").find("test-run"), std::string::npos);
  EXPECT_EQ(record->sets("mock").size(), 8u);
  EXPECT_EQ(record->sets("mock", 2).size(), 4u);
}

TEST_F(PlantedRun, UnwritableDirectoryIsIoError) {
  rmtest::TempDir dir("ro");
  rmtest::write_file(dir / "blocker", "x");
  try {
    persist(*record, dir / "blocker" / "run");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
}

TEST_F(PlantedRun, TamperedCatalogRejected) {
  rmtest::TempDir dir("tc");
  persist(*record, dir.path());
  auto manifest = json::parse(rmtest::read_file(dir / "manifest.json"));
  manifest["catalog_hash"] = std::string(64, '0');
  rmtest::write_file(dir / "manifest.json", manifest.dump(2));
  try {
    load_run(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::configuration);
  }
}

TEST(LoadRun, MissingDirectory) {
  try {
    load_run("/nonexistent/rmcontrast/run");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}
