#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "rmcontrast/dataset.hpp"
#include "rmcontrast/endpoints.hpp"
#include "rmcontrast/gateway.hpp"
#include "rmcontrast/metrics.hpp"
#include "rmcontrast/testkit.hpp"
#include "support.hpp"

using namespace rmcontrast;
using namespace rmcontrast::testkit;

namespace {

std::string words(std::size_t n, const std::string& w = "word") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + w + std::to_string(i);
  return out;
}

EndpointConfig at(const MockServer& s) {
  EndpointConfig c;
  c.base_url = s.base_url();
  c.model_name = "mock";
  c.max_retries = 0;
  return c;
}

}  // namespace

TEST(ToyReward, Examples) {
  const auto spec = ToyRewardSpec::defaults();
  EXPECT_NEAR(toy_reward(spec, "p", words(10)), 0.5, 1e-12);
  EXPECT_NEAR(toy_reward(spec, "p", words(10) + " kill"), 0.05 * 11 - 1.0, 1e-12);
  EXPECT_EQ(toy_reward(spec, "p", ""), 0.0);
  EXPECT_NEAR(toy_reward(spec, "p", "Please, kindly stop."), 0.05 * 3 + 0.25 * 2, 1e-12);
  EXPECT_NEAR(toy_reward(spec, "ignored", words(60)), 0.05 * 50, 1e-12);
}

TEST(ToyReward, HarmTermMonotoneProperty) {
  const auto spec = ToyRewardSpec::defaults();
  std::mt19937_64 rng(61);
  static const char* vocab[] = {"the", "cat", "please", "stupid", "because", "hurt", "sun", "x"};
  std::uniform_int_distribution<int> len(0, 48), w(0, 7);
  for (int i = 0; i < 500; ++i) {
    std::string r;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) r += std::string(k ? " " : "") + vocab[w(rng)];
    const double before = toy_reward(spec, "p", r);
    const double after = toy_reward(spec, "p", r + (r.empty() ? "" : " ") + "weapon");
    EXPECT_NEAR(after - before, spec.length_weight - 1.0, 1e-12);
  }
}

TEST(ToyReward, TokensStripPunctuation) {
  EXPECT_EQ(toy_tokens("Hurt, attack! ... (kill)"), (std::vector<std::string>{"hurt", "attack", "kill"}));
}

TEST(ToyReward, SpecValidation) {
  auto spec = ToyRewardSpec::defaults();
  EXPECT_NO_THROW(spec.validate());
  auto upper = spec;
  upper.lexicons["harm_terms"].push_back("Kill");
  EXPECT_THROW(upper.validate(), Error);
  auto shared = spec;
  shared.lexicons["polite_terms"].push_back("kill");
  EXPECT_THROW(shared.validate(), Error);
  auto nan = spec;
  nan.length_weight = std::nan("");
  EXPECT_THROW(nan.validate(), Error);
}

TEST(HashEmbedding, Properties) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  auto v = hash_embedding("b a c a", 32);
  EXPECT_EQ(v, hash_embedding("a c a b", 32));
  double n = 0;
  for (double x : v) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
  auto zero = hash_embedding("", 8);
  EXPECT_TRUE(std::all_of(zero.begin(), zero.end(), [](double x) { return x == 0.0; }));
}

TEST(HashEmbedding, PermutationProperty) {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> tokens;
    for (int k = 0; k < 8; ++k) tokens.push_back("t" + std::to_string(rng() % 12));
    auto join = [](const std::vector<std::string>& ts) {
      std::string s;
      for (const auto& t : ts) s += t + " ";
      return s;
    };
    const auto base = hash_embedding(join(tokens));
    std::shuffle(tokens.begin(), tokens.end(), rng);
    EXPECT_EQ(hash_embedding(join(tokens)), base);
  }
}

TEST(Canned, RespondByMarker) {
  CannedPerturbationSpec c;
  c.step1["default"] = "clarity: a";
  c.step1["x:1/rejected"] = "clarity: b";
  c.step2["x:1/chosen/clarity"] = "rewritten";
  c.random = {"r0", "r1"};
  c.discover["default"] = "clarity";
  EXPECT_EQ(c.respond("[step1 comparison=x:1 side=chosen]\nbody"), "clarity: a");
  EXPECT_EQ(c.respond("[step1 comparison=x:1 side=rejected]\nbody"), "clarity: b");
  EXPECT_EQ(c.respond("[step2 comparison=x:1 side=chosen attribute=clarity]\nb"), "rewritten");
  EXPECT_FALSE(c.respond("[step2 comparison=x:1 side=chosen attribute=verbosity]\nb").has_value());
  EXPECT_EQ(c.respond("[random comparison=x:1 side=chosen index=3]\nb"), "r1");
  EXPECT_EQ(c.respond("[discover comparison=y]\nb"), "clarity");
  EXPECT_FALSE(c.respond("no marker").has_value());
  EXPECT_EQ(CannedPerturbationSpec::from_json(c.to_json()).to_json(), c.to_json());
  CannedPerturbationSpec bad;
  bad.step2["missing-parts"] = "x";
  EXPECT_THROW(bad.validate(), Error);
}

TEST(MockServerTest, Endpoints) {
  CannedPerturbationSpec canned;
  canned.step2["x:1/chosen/clarity"] = "rewritten";
  MockServer server(ToyRewardSpec::defaults(), canned, 16);
  server.start();
  Gateway g(std::make_shared<HttpTransport>(), nullptr);
  EXPECT_NEAR(g.score(at(server), std::nullopt, "p", "hello world").scalar, 0.1, 1e-12);
  EXPECT_NEAR(semantic_distance("same text", "same text",
                                [&](const std::string& t) { return g.embed(at(server), t); }),
              0.0, 1e-9);
  EXPECT_EQ(g.chat(at(server), std::nullopt, "[step2 comparison=x:1 side=chosen attribute=clarity]\nbody"),
            "rewritten");
  try {
    g.chat(at(server), std::nullopt, "[step2 comparison=x:1 side=chosen attribute=tone]\nbody");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
    EXPECT_NE(std::string(e.what()).find("404"), std::string::npos);
  }
  EXPECT_GE(server.requests(), 4u);
  server.stop();
}

TEST(PlantedFixtures, Shape) {
  rmtest::TempDir dir("planted");
  auto paths = write_planted_fixtures(dir.path(), "http://127.0.0.1:9");
  for (const auto& p : {paths.dataset, paths.registry, paths.fixtures, paths.endpoints, paths.winrate_pairs}) {
    EXPECT_TRUE(std::filesystem::exists(p)) << p;
  }
  auto population = load_dataset(load_registry(paths.registry).at("toy"));
  EXPECT_EQ(population.size(), kPlantedComparisons);
  auto endpoints = load_endpoints(paths.endpoints);
  EXPECT_EQ(endpoints.model("mock").config.base_url, "http://127.0.0.1:9");
  EXPECT_TRUE(endpoints.fixture_markers);
  auto canned = CannedPerturbationSpec::load(paths.fixtures);
  EXPECT_NO_THROW(canned.validate());

  // Every chosen-side harmlessness rewrite carries at least two harm terms and
  // drops below the rejected original.
  const auto spec = ToyRewardSpec::defaults();
  const auto& harm = spec.terms("harm_terms");
  for (const auto& c : population) {
    const auto& text = canned.step2.at(c.id + "/chosen/harmlessness");
    std::size_t hits = 0;
    for (const auto& t : toy_tokens(text)) hits += std::count(harm.begin(), harm.end(), t);
    EXPECT_GE(hits, 2u) << c.id;
    EXPECT_LT(toy_reward(spec, c.prompt, text), toy_reward(spec, c.prompt, c.rejected)) << c.id;
    EXPECT_GT(toy_reward(spec, c.prompt, c.chosen), toy_reward(spec, c.prompt, c.rejected)) << c.id;
  }
}
