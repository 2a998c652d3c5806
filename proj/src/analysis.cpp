#include "rmcontrast/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace rmcontrast {

AttributeRanking AttributeRanking::from_keys(const std::map<std::string, double>& keys) {
  AttributeRanking r;
  r.entries.reserve(keys.size());
  for (const auto& [name, key] : keys) r.entries.push_back({name, key});
  // std::map iteration is already name-ascending, so a stable sort keeps ties by name.
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const RankedAttribute& a, const RankedAttribute& b) { return a.key > b.key; });
  return r;
}

std::vector<std::string> AttributeRanking::order() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.attribute);
  return out;
}

std::map<std::string, double> SensitivityReport::pfr_by_attribute() const {
  std::map<std::string, double> out;
  for (const auto& a : attributes) {
    if (a.pfr) out.emplace(a.attribute, *a.pfr);
  }
  return out;
}

AttributeRanking SensitivityReport::ranking() const {
  return AttributeRanking::from_keys(pfr_by_attribute());
}

SensitivityReport preference_flip_rate(const std::vector<ScoredExplanationSet>& sets, Side side,
                                       const AttributeCatalog& catalog, const std::string& dataset) {
  SensitivityReport report;
  report.side = side;
  report.dataset = dataset;
  if (!sets.empty()) report.model_id = sets.front().model_id;
  for (const auto& attribute : catalog.attributes()) {
    AttributeFlipRate rate{attribute.name, std::nullopt, 0, 0};
    for (const auto& set : sets) {
      const auto it = std::find_if(set.entries.begin(), set.entries.end(), [&](const ScoredEntry& e) {
        return e.perturbation.side == side && e.perturbation.attribute == attribute.name;
      });
      if (it == set.entries.end()) continue;
      ++rate.denominator;
      if (it->label == ContrastLabel::counterfactual) ++rate.flips;
    }
    if (rate.denominator > 0) {
      rate.pfr = static_cast<double>(rate.flips) / static_cast<double>(rate.denominator);
    }
    report.attributes.push_back(std::move(rate));
  }
  return report;
}

namespace {

// Sum over groups of equal adjacent values of t(t-1)/2.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal) {
  std::int64_t total = 0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += static_cast<std::int64_t>(run) * static_cast<std::int64_t>(run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Sorts values ascending and returns the number of inversions removed.
std::int64_t merge_count(std::vector<double>& values, std::vector<double>& scratch, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(values, scratch, lo, mid) + merge_count(values, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (values[j] < values[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = values[j++];
    } else {
      scratch[k++] = values[i++];
    }
  }
  while (i < mid) scratch[k++] = values[i++];
  while (j < hi) scratch[k++] = values[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            values.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::optional<double> kendall_tau(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("kendall_tau: key vectors differ in length ({} vs {})", u.size(),
                            v.size()));
  }
  const std::size_t n = u.size();
  if (n < 2) throw Error(ErrorKind::invalid_input, "kendall_tau: needs at least two items");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) {
      throw Error(ErrorKind::invalid_input, "kendall_tau: non-finite key");
    }
  }

  // Knight's algorithm: sort by (u, v), count ties, then count the inversions
  // of v that a merge sort removes.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return u[a] < u[b] || (u[a] == u[b] && v[a] < v[b]);
  });
  const std::int64_t ties_u =
      tied_pairs(n, [&](std::size_t a, std::size_t b) { return u[order[a]] == u[order[b]]; });
  const std::int64_t ties_joint = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return u[order[a]] == u[order[b]] && v[order[a]] == v[order[b]];
  });

  std::vector<double> vs(n);
  for (std::size_t i = 0; i < n; ++i) vs[i] = v[order[i]];
  std::vector<double> scratch(n);
  const std::int64_t discordant = merge_count(vs, scratch, 0, n);
  const std::int64_t ties_v = tied_pairs(n, [&](std::size_t a, std::size_t b) { return vs[a] == vs[b]; });

  const std::int64_t pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t untied_u = pairs - ties_u;
  const std::int64_t untied_v = pairs - ties_v;
  if (untied_u == 0 || untied_v == 0) return std::nullopt;
  const std::int64_t concordant_minus_discordant =
      pairs - ties_u - ties_v + ties_joint - 2 * discordant;
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(untied_u) * static_cast<double>(untied_v));
}

std::optional<double> kendall_tau(const std::map<std::string, double>& u,
                                  const std::map<std::string, double>& v) {
  std::vector<double> ku;
  std::vector<double> kv;
  for (const auto& [name, key] : u) {
    if (auto it = v.find(name); it != v.end()) {
      ku.push_back(key);
      kv.push_back(it->second);
    }
  }
  if (ku.size() < 2) {
    throw Error(ErrorKind::invalid_input,
                fmt::format("kendall_tau: only {} shared attributes", ku.size()));
  }
  return kendall_tau(std::span<const double>(ku), std::span<const double>(kv));
}

SimilarityMatrix cross_model_similarity(const std::vector<SensitivityReport>& reports) {
  if (reports.size() < 2) {
    throw Error(ErrorKind::analysis, "cross-model similarity needs at least two models");
  }
  SimilarityMatrix m;
  std::vector<std::map<std::string, double>> pfrs;
  for (const auto& r : reports) {
    m.models.push_back(r.model_id);
    pfrs.push_back(r.pfr_by_attribute());
  }
  for (const auto& [name, _] : pfrs.front()) {
    const bool everywhere = std::all_of(pfrs.begin(), pfrs.end(),
                                        [&](const auto& p) { return p.contains(name); });
    if (everywhere) m.attributes.push_back(name);
  }
  for (const auto& p : pfrs) {
    if (p.size() != m.attributes.size()) {
      spdlog::info("cross-model similarity restricted to {} shared attributes", m.attributes.size());
      break;
    }
  }
  if (m.attributes.size() < 2) {
    throw Error(ErrorKind::analysis,
                fmt::format("cross-model similarity: only {} attributes shared by all models",
                            m.attributes.size()));
  }
  const std::size_t k = reports.size();
  m.tau.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    m.tau[i][i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> a;
      std::vector<double> b;
      for (const auto& name : m.attributes) {
        a.push_back(pfrs[i].at(name));
        b.push_back(pfrs[j].at(name));
      }
      m.tau[i][j] = kendall_tau(std::span<const double>(a), std::span<const double>(b));
      m.tau[j][i] = m.tau[i][j];
    }
  }
  return m;
}

std::optional<double> branch_correlation(const SensitivityReport& chosen_side,
                                         const SensitivityReport& rejected_side) {
  return kendall_tau(chosen_side.pfr_by_attribute(), rejected_side.pfr_by_attribute());
}

LocalRanking local_ranking(const ScoredExplanationSet& set, Side side,
                           const AttributeCatalog& catalog) {
  LocalRanking local;
  local.comparison_id = set.comparison_id();
  local.side = side;
  for (const auto& e : set.entries) {
    if (e.perturbation.side != side || !e.perturbation.attribute) continue;
    const double diff = side == Side::chosen ? set.reward_rejected.scalar - e.reward.scalar
                                             : e.reward.scalar - set.reward_chosen.scalar;
    local.differences[*e.perturbation.attribute] = diff;
  }
  for (const auto& a : catalog.attributes()) {
    if (!local.differences.contains(a.name)) local.missing.push_back(a.name);
  }
  if (local.differences.size() < 2) {
    throw Error(ErrorKind::analysis,
                fmt::format("{} ({}): local ranking needs at least two scored attributes, found {}",
                            set.comparison_id(), to_string(side), local.differences.size()));
  }
  local.ranking = AttributeRanking::from_keys(local.differences);
  return local;
}

namespace {

void sort_representatives(std::vector<RepresentativeScore>& scores) {
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.comparison_id < b.comparison_id;
  });
}

// Tau between a local ranking and a global one, or nullopt when undefined.
std::optional<double> local_global_tau(const LocalRanking& local, const SensitivityReport& global) {
  try {
    return kendall_tau(local.differences, global.pfr_by_attribute());
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<RepresentativeScore> representative_single_model(
    const std::vector<ScoredExplanationSet>& sets, const SensitivityReport& global_chosen,
    const SensitivityReport& global_rejected, const AttributeCatalog& catalog) {
  std::vector<RepresentativeScore> scores;
  for (const auto& set : sets) {
    std::optional<double> tau_plus;
    std::optional<double> tau_minus;
    try {
      tau_plus = local_global_tau(local_ranking(set, Side::chosen, catalog), global_chosen);
      tau_minus = local_global_tau(local_ranking(set, Side::rejected, catalog), global_rejected);
    } catch (const Error& e) {
      spdlog::debug("{}: not eligible as a representative: {}", set.comparison_id(), e.what());
      continue;
    }
    if (!tau_plus || !tau_minus) {
      spdlog::debug("{}: ranking similarity undefined; not eligible", set.comparison_id());
      continue;
    }
    scores.push_back({set.comparison_id(), *tau_plus + *tau_minus, *tau_plus, *tau_minus});
  }
  sort_representatives(scores);
  return scores;
}

std::vector<RepresentativeScore> representative_two_models(
    const std::vector<ScoredExplanationSet>& sets_a, const std::vector<ScoredExplanationSet>& sets_b,
    Side side, const SensitivityReport& global_a, const SensitivityReport& global_b,
    const AttributeCatalog& catalog) {
  std::map<std::string, const ScoredExplanationSet*> by_id;
  for (const auto& s : sets_b) by_id[s.comparison_id()] = &s;
  if (sets_a.size() != sets_b.size()) {
    throw Error(ErrorKind::alignment,
                fmt::format("model sets cover {} and {} comparisons", sets_a.size(), sets_b.size()));
  }

  const auto side_texts = [side](const ScoredExplanationSet& s) {
    std::map<std::string, std::string> texts;
    for (const auto& e : s.entries) {
      if (e.perturbation.side == side && e.perturbation.attribute) {
        texts[*e.perturbation.attribute] = e.perturbation.text;
      }
    }
    return texts;
  };

  std::vector<RepresentativeScore> scores;
  for (const auto& a : sets_a) {
    auto it = by_id.find(a.comparison_id());
    if (it == by_id.end()) {
      throw Error(ErrorKind::alignment,
                  fmt::format("{}: no scores from model {}", a.comparison_id(), global_b.model_id));
    }
    const auto& b = *it->second;
    if (side_texts(a) != side_texts(b) || a.original(side) != b.original(side)) {
      throw Error(ErrorKind::alignment,
                  fmt::format("{}: models {} and {} scored different {} perturbations",
                              a.comparison_id(), a.model_id, b.model_id, to_string(side)));
    }
    std::optional<double> tau_a;
    std::optional<double> tau_b;
    try {
      tau_a = local_global_tau(local_ranking(a, side, catalog), global_a);
      tau_b = local_global_tau(local_ranking(b, side, catalog), global_b);
    } catch (const Error& e) {
      spdlog::debug("{}: not eligible as a representative: {}", a.comparison_id(), e.what());
      continue;
    }
    if (!tau_a || !tau_b) continue;
    scores.push_back({a.comparison_id(), *tau_a + *tau_b, *tau_a, *tau_b});
  }
  sort_representatives(scores);
  return scores;
}

CorrectnessSplit correctness_split(const std::vector<ScoredExplanationSet>& sets,
                                   const Embedder& embedder, const DistanceOptions& options) {
  std::vector<ScoredExplanationSet> correct;
  std::vector<ScoredExplanationSet> wrong;
  CorrectnessSplit split;
  for (const auto& s : sets) {
    if (!s.comparison.ground_truth) {
      ++split.excluded;
      continue;
    }
    (*s.comparison.ground_truth == GroundTruth::chosen_preferred ? correct : wrong).push_back(s);
  }
  const auto metrics = [&](const std::vector<ScoredExplanationSet>& group) -> std::optional<GroupMetrics> {
    if (group.empty()) return std::nullopt;
    return GroupMetrics{group.size(), coverage(group), distance_report(group, embedder, options)};
  };
  split.correct = metrics(correct);
  split.wrong = metrics(wrong);
  return split;
}

double win_rate(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::invalid_input, "win_rate: no pairs");
  std::size_t wins = 0;
  for (const auto& [original, perturbed] : pairs) {
    if (perturbed > original) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(pairs.size());
}

}  // namespace rmcontrast
