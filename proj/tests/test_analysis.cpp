#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "rmcontrast/analysis.hpp"
#include "rmcontrast/testkit.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace rmcontrast;
using rmtest::Entry;

namespace {

std::vector<double> random_keys(std::mt19937_64& rng, std::size_t n, int levels) {
  std::uniform_int_distribution<int> d(0, levels - 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

SensitivityReport report_with(const std::string& model, Side side, const std::map<std::string, double>& pfr) {
  SensitivityReport r;
  r.model_id = model;
  r.side = side;
  for (const auto& [name, value] : pfr) r.attributes.push_back({name, value, 0, 1});
  return r;
}

}  // namespace

TEST(Tau, Examples) {
  std::vector<double> u = {4, 3, 2, 1}, v = {4, 2, 3, 1};
  EXPECT_NEAR(*kendall_tau(u, v), 4.0 / 6.0, 1e-15);
  EXPECT_DOUBLE_EQ(*kendall_tau(u, u), 1.0);
  std::vector<double> rev(u.rbegin(), u.rend());
  EXPECT_DOUBLE_EQ(*kendall_tau(u, rev), -1.0);
  std::vector<double> flat = {1, 1, 1, 1};
  EXPECT_FALSE(kendall_tau(u, flat).has_value());
  std::vector<double> three = {1, 2, 3};
  EXPECT_THROW(kendall_tau(u, three), Error);
  std::vector<double> one = {1};
  EXPECT_THROW(kendall_tau(one, one), Error);
  std::vector<double> bad = {1, std::nan(""), 2, 3};
  EXPECT_THROW(kendall_tau(u, bad), Error);
}

TEST(Tau, MatchesPairCountingOracle) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> len(2, 8);
  std::uniform_int_distribution<int> levels(2, 10);
  for (int i = 0; i < 1000; ++i) {
    const auto n = len(rng);
    const int l = levels(rng);
    auto u = random_keys(rng, n, l), v = random_keys(rng, n, l);
    auto expected = rmtest::oracle_tau(u, v);
    auto got = kendall_tau(u, v);
    ASSERT_EQ(got.has_value(), expected.has_value());
    if (got) {
      EXPECT_NEAR(*got, *expected, 1e-12);
      EXPECT_GE(*got, -1.0 - 1e-12);
      EXPECT_LE(*got, 1.0 + 1e-12);
    }
  }
}

TEST(Tau, TieFreeIdentityAndReversalProperty) {
  std::mt19937_64 rng(32);
  for (std::size_t n = 2; n <= 40; ++n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) * 1.5 - 7;
    std::shuffle(v.begin(), v.end(), rng);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = -v[i];
    EXPECT_DOUBLE_EQ(*kendall_tau(v, v), 1.0);
    EXPECT_DOUBLE_EQ(*kendall_tau(v, r), -1.0);
  }
}

TEST(Tau, MapOverloadUsesSharedKeys) {
  std::map<std::string, double> u = {{"A", 4}, {"B", 3}, {"C", 2}, {"D", 1}, {"E", 9}};
  std::map<std::string, double> v = {{"A", 4}, {"B", 2}, {"C", 3}, {"D", 1}};
  EXPECT_NEAR(*kendall_tau(u, v), 4.0 / 6.0, 1e-15);
  EXPECT_THROW(kendall_tau(std::map<std::string, double>{{"A", 1}}, v), Error);
}

TEST(Ranking, DescendingWithNameTieBreak) {
  auto r = AttributeRanking::from_keys({{"b", 0.5}, {"a", 0.5}, {"c", 0.9}, {"d", -1}});
  EXPECT_EQ(r.order(), (std::vector<std::string>{"c", "a", "b", "d"}));
}

TEST(Pfr, Examples) {
  std::vector<ScoredExplanationSet> sets;
  for (int i = 0; i < 4; ++i) {
    sets.push_back(rmtest::make_set("p" + std::to_string(i), 1.0, 0.5,
                                    {{Side::chosen, "a0", "x", i < 3 ? 0.0 : 0.8},
                                     {Side::chosen, "a1", "y", 0.9}}));
  }
  auto cat = rmtest::synthetic_catalog(3);
  auto r = preference_flip_rate(sets, Side::chosen, cat, "toy");
  ASSERT_EQ(r.attributes.size(), 3u);
  EXPECT_EQ(r.attributes[0].pfr, 0.75);
  EXPECT_EQ(r.attributes[0].flips, 3u);
  EXPECT_EQ(r.attributes[0].denominator, 4u);
  EXPECT_EQ(r.attributes[1].pfr, 0.0);
  EXPECT_FALSE(r.attributes[2].pfr.has_value());
  EXPECT_EQ(r.ranking().order(), (std::vector<std::string>{"a0", "a1"}));
  EXPECT_EQ(r.dataset, "toy");
}

TEST(Pfr, FailuresLeaveDenominator) {
  std::vector<ScoredExplanationSet> sets = {
      rmtest::make_set("f1", 1.0, 0.5, {{Side::chosen, "a0", "x", 0.0}}),
      rmtest::make_set("f2", 1.0, 0.5, {}),
  };
  auto r = preference_flip_rate(sets, Side::chosen, rmtest::synthetic_catalog(1));
  EXPECT_EQ(r.attributes[0].denominator, 1u);
  EXPECT_EQ(r.attributes[0].pfr, 1.0);
}

TEST(Similarity, ThreeModelsSymmetricUnitDiagonal) {
  std::vector<SensitivityReport> reports = {
      report_with("m1", Side::chosen, {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}, {"d", 0.3}}),
      report_with("m2", Side::chosen, {{"a", 0.8}, {"b", 0.2}, {"c", 0.4}, {"d", 0.3}}),
      report_with("m3", Side::chosen, {{"a", 0.1}, {"b", 0.5}, {"c", 0.9}, {"e", 0.3}}),
  };
  auto m = cross_model_similarity(reports);
  ASSERT_EQ(m.tau.size(), 3u);
  EXPECT_EQ(m.attributes, (std::vector<std::string>{"a", "b", "c"}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(*m.tau[i][i], 1.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.tau[i][j], m.tau[j][i]);
  }
  EXPECT_DOUBLE_EQ(*m.tau[0][2], -1.0);
  EXPECT_THROW(cross_model_similarity({reports[0]}), Error);
}

TEST(Similarity, IdenticalAndReversed) {
  auto a = report_with("a", Side::chosen, {{"x", 0.1}, {"y", 0.2}, {"z", 0.3}});
  auto b = report_with("b", Side::chosen, {{"x", 0.3}, {"y", 0.2}, {"z", 0.1}});
  EXPECT_EQ(*cross_model_similarity({a, a}).tau[0][1], 1.0);
  EXPECT_EQ(*cross_model_similarity({a, b}).tau[0][1], -1.0);
}

TEST(BranchCorrelation, Examples) {
  auto a = report_with("m", Side::chosen, {{"x", 0.1}, {"y", 0.2}, {"z", 0.3}});
  auto flat = report_with("m", Side::rejected, {{"x", 0.5}, {"y", 0.5}, {"z", 0.5}});
  EXPECT_EQ(*branch_correlation(a, a), 1.0);
  EXPECT_FALSE(branch_correlation(a, flat).has_value());
}

TEST(BranchCorrelation, IndependentPfrsCentreOnZero) {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> flips(0, 30);
  double sum = 0;
  int defined = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<std::string, double> plus, minus;
    for (int k = 0; k < 15; ++k) {
      plus["a" + std::to_string(k)] = flips(rng) / 30.0;
      minus["a" + std::to_string(k)] = flips(rng) / 30.0;
    }
    if (auto t = branch_correlation(report_with("m", Side::chosen, plus), report_with("m", Side::rejected, minus))) {
      sum += *t;
      ++defined;
    }
  }
  ASSERT_GT(defined, 900);
  EXPECT_NEAR(sum / defined, 0.0, 0.2);
}

TEST(LocalRanking, Examples) {
  auto cat = AttributeCatalog({{"A", "a"}, {"B", "b"}, {"C", "c"}});
  auto chosen = rmtest::make_set("l1", 3.0, 1.0, {{Side::chosen, "A", "x", 0.2}, {Side::chosen, "B", "y", 0.9}});
  auto lc = local_ranking(chosen, Side::chosen, cat);
  EXPECT_NEAR(lc.differences.at("A"), 0.8, 1e-12);
  EXPECT_NEAR(lc.differences.at("B"), 0.1, 1e-12);
  EXPECT_EQ(lc.ranking.order(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(lc.missing, (std::vector<std::string>{"C"}));

  auto rejected = rmtest::make_set("l2", 2.0, 0.0, {{Side::rejected, "A", "x", 2.5}, {Side::rejected, "B", "y", 1.0}});
  auto lr = local_ranking(rejected, Side::rejected, cat);
  EXPECT_EQ(lr.differences.at("A"), 0.5);
  EXPECT_EQ(lr.differences.at("B"), -1.0);
  EXPECT_EQ(lr.ranking.order(), (std::vector<std::string>{"A", "B"}));

  auto tied = rmtest::make_set("l3", 2.0, 0.0, {{Side::rejected, "B", "x", 1.0}, {Side::rejected, "A", "y", 1.0}});
  EXPECT_EQ(local_ranking(tied, Side::rejected, cat).ranking.order(), (std::vector<std::string>{"A", "B"}));

  EXPECT_THROW(local_ranking(chosen, Side::rejected, cat), Error);
}

namespace {

// Chosen-side global ranking a0 > a1 > a2 > a3, rejected-side likewise.
struct RepresentativeSetup {
  AttributeCatalog cat = rmtest::synthetic_catalog(4);
  SensitivityReport global_plus = report_with("m", Side::chosen, {{"a0", 0.9}, {"a1", 0.6}, {"a2", 0.3}, {"a3", 0.1}});
  SensitivityReport global_minus = report_with("m", Side::rejected, {{"a0", 0.8}, {"a1", 0.5}, {"a2", 0.4}, {"a3", 0.0}});

  // Chosen-side rewards falling with the desired order give larger differences.
  static ScoredExplanationSet set(const std::string& id, const std::vector<double>& plus, const std::vector<double>& minus) {
    std::vector<Entry> entries;
    for (std::size_t k = 0; k < plus.size(); ++k) entries.push_back({Side::chosen, "a" + std::to_string(k), "p", plus[k]});
    for (std::size_t k = 0; k < minus.size(); ++k) entries.push_back({Side::rejected, "a" + std::to_string(k), "q", minus[k]});
    return rmtest::make_set(id, 1.0, 0.0, entries);
  }
};

}  // namespace

TEST(Representatives, SingleModelOrdering) {
  RepresentativeSetup s;
  auto agree = s.set("r:agree", {-3, -2, -1, 0}, {4, 3, 2, 1});
  auto reverse = s.set("r:reverse", {0, -1, -2, -3}, {1, 2, 3, 4});
  auto mixed = s.set("r:mixed", {-3, -2, 0, -1}, {1, 2, 4, 3});
  auto partial = s.set("r:partial", {-3}, {4, 3});  // one chosen attribute: ineligible
  auto out = representative_single_model({reverse, mixed, agree, partial}, s.global_plus, s.global_minus, s.cat);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out.front().comparison_id, "r:agree");
  EXPECT_DOUBLE_EQ(out.front().score, 2.0);
  EXPECT_EQ(out.back().comparison_id, "r:reverse");
  EXPECT_DOUBLE_EQ(out.back().score, -2.0);

  // Middle entry against the oracle.
  std::vector<double> local_plus = {1 - (-3.0), 1 - (-2.0), 1 - 0.0, 1 - (-1.0)};
  std::vector<double> local_minus = {1 - 1.0, 2 - 1.0, 4 - 1.0, 3 - 1.0};
  const double expected = *rmtest::oracle_tau(local_plus, {0.9, 0.6, 0.3, 0.1}) +
                          *rmtest::oracle_tau(local_minus, {0.8, 0.5, 0.4, 0.0});
  EXPECT_NEAR(out[1].score, expected, 1e-12);
}

TEST(Representatives, PermutationInvarianceProperty) {
  auto sets = rmtest::synthetic_run(34, 20, 5);
  auto cat = rmtest::synthetic_catalog(5);
  auto gp = preference_flip_rate(sets, Side::chosen, cat);
  auto gm = preference_flip_rate(sets, Side::rejected, cat);
  const auto base = representative_single_model(sets, gp, gm, cat);
  std::mt19937_64 rng(35);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(sets.begin(), sets.end(), rng);
    EXPECT_EQ(representative_single_model(sets, gp, gm, cat), base);
  }
}

TEST(Representatives, TwoModels) {
  RepresentativeSetup s;
  auto a1 = s.set("t:1", {-3, -2, -1, 0}, {});
  auto a2 = s.set("t:2", {0, -1, -2, -3}, {});
  auto b1 = a1, b2 = a2;
  b1.model_id = b2.model_id = "n";
  // model n reverses the chosen-side rewards of t:2 and agrees on t:1
  for (auto& e : b2.entries) e.reward.scalar = -3 - e.reward.scalar;
  auto out = representative_two_models({a1, a2}, {b2, b1}, Side::chosen, s.global_plus, s.global_plus, s.cat);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].comparison_id, "t:1");
  EXPECT_DOUBLE_EQ(out[0].score, 2.0);
  EXPECT_NEAR(out[1].score, 0.0, 1e-12);

  try {
    representative_two_models({a1, a2}, {b1}, Side::chosen, s.global_plus, s.global_plus, s.cat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::alignment);
  }
  auto other_text = b1;
  other_text.entries[0].perturbation.text = "different";
  EXPECT_THROW(representative_two_models({a1}, {other_text}, Side::chosen, s.global_plus, s.global_plus, s.cat), Error);
}

TEST(Correctness, Groups) {
  std::vector<ScoredExplanationSet> sets;
  for (int i = 0; i < 5; ++i) {
    auto set = rmtest::make_set("g" + std::to_string(i), 1.0, 0.0, {{Side::chosen, "a0", "x y", -1.0}});
    if (i >= 3) {
      set.swapped = true;
      set.comparison.ground_truth = GroundTruth::rejected_preferred;
    }
    sets.push_back(set);
  }
  auto unlabeled = sets[0];
  unlabeled.comparison.ground_truth.reset();
  sets.push_back(unlabeled);
  const Embedder hash = [](const std::string& t) { return testkit::hash_embedding(t); };
  auto split = correctness_split(sets, hash);
  ASSERT_TRUE(split.correct && split.wrong);
  EXPECT_EQ(split.correct->size, 3u);
  EXPECT_EQ(split.wrong->size, 2u);
  EXPECT_EQ(split.excluded, 1u);
  EXPECT_EQ(split.correct->coverage.fraction(CoverageScope::chosen, ContrastLabel::counterfactual), 1.0);

  sets.resize(3);
  EXPECT_FALSE(correctness_split(sets, hash).wrong.has_value());
}

TEST(WinRate, Examples) {
  std::vector<std::pair<double, double>> pairs;
  for (int j = 0; j < 20; ++j) pairs.push_back({0.5, j < 11 ? 0.6 : (j == 11 ? 0.5 : 0.1)});
  EXPECT_DOUBLE_EQ(win_rate(pairs), 0.55);
  std::vector<std::pair<double, double>> lower = {{1, 0}, {2, 1}};
  EXPECT_EQ(win_rate(lower), 0.0);
  std::vector<std::pair<double, double>> tie = {{1, 1}};
  EXPECT_EQ(win_rate(tie), 0.0);
  EXPECT_THROW(win_rate(std::vector<std::pair<double, double>>{}), Error);
}

TEST(AffineInvariance, Property) {
  const auto cat = rmtest::synthetic_catalog(5);
  const std::pair<double, double> transforms[] = {{2.0, 0.0}, {0.5, -3.0}, {3.0, 1.25}, {0.125, 100.0}};
  for (std::uint64_t seed = 40; seed < 45; ++seed) {
    const auto base = rmtest::synthetic_run(seed, 20, 5);
    const auto base_plus = preference_flip_rate(base, Side::chosen, cat);
    const auto base_minus = preference_flip_rate(base, Side::rejected, cat);
    const auto base_reps = representative_single_model(base, base_plus, base_minus, cat);
    for (auto [a, b] : transforms) {
      const auto moved = rmtest::synthetic_run(seed, 20, 5, a, b);
      for (std::size_t i = 0; i < base.size(); ++i) {
        ASSERT_EQ(base[i].entries.size(), moved[i].entries.size());
        for (std::size_t k = 0; k < base[i].entries.size(); ++k) {
          EXPECT_EQ(base[i].entries[k].label, moved[i].entries[k].label);
        }
        for (Side side : kSides) {
          EXPECT_EQ(local_ranking(base[i], side, cat).ranking.order(), local_ranking(moved[i], side, cat).ranking.order());
        }
      }
      const auto cb = coverage(base), cm = coverage(moved);
      EXPECT_EQ(cb.counts, cm.counts);
      EXPECT_EQ(preference_flip_rate(moved, Side::chosen, cat), base_plus);
      EXPECT_EQ(preference_flip_rate(moved, Side::rejected, cat), base_minus);
      const auto reps = representative_single_model(moved, base_plus, base_minus, cat);
      ASSERT_EQ(reps.size(), base_reps.size());
      for (std::size_t i = 0; i < reps.size(); ++i) EXPECT_EQ(reps[i].comparison_id, base_reps[i].comparison_id);
    }
  }
}
