#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmcontrast/core.hpp"

namespace rmcontrast {

// Splits case-folded text on Unicode whitespace. Folding covers ASCII,
// Latin-1, Latin Extended-A, Greek and Cyrillic; other code points are kept.
std::vector<std::string> word_tokenize(std::string_view text);

// Simple lowercase folding of a UTF-8 string (see word_tokenize).
std::string case_fold(std::string_view text);

// Unit-cost Levenshtein distance between two token sequences.
template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diagonal
                                    : 1 + std::min({diagonal, above, row[j - 1]});
      diagonal = above;
    }
  }
  return row[b.size()];
}

// Word-level edit distance normalised by the longer token count; 0 when both
// texts are empty.
double syntactic_distance(std::string_view a, std::string_view b);

// Returns a unit-length embedding of the text.
using Embedder = std::function<std::vector<double>(const std::string&)>;

// 1 - <embed(a), embed(b)>.
double semantic_distance(const std::string& a, const std::string& b, const Embedder& embedder);

// Mean semantic distance over all unordered pairs; absent for fewer than two texts.
std::optional<double> semantic_diversity(const std::vector<std::string>& texts,
                                         const Embedder& embedder);

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }
  std::size_t count() const { return count_; }
  std::optional<double> mean() const;

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  std::size_t count_ = 0;
};

enum class CoverageScope { chosen, rejected, both };

inline constexpr CoverageScope kCoverageScopes[] = {CoverageScope::chosen, CoverageScope::rejected,
                                                    CoverageScope::both};

struct CoverageReport {
  std::size_t comparisons = 0;  // denominator shared by every cell
  // counts[scope][label]: comparisons with at least one entry of that label
  // (on both sides for scope=both).
  std::array<std::array<std::size_t, 2>, 3> counts{};

  double fraction(CoverageScope scope, ContrastLabel label) const;
  std::size_t count(CoverageScope scope, ContrastLabel label) const;
};

// Every set counts in the denominator, including those with failed generation.
CoverageReport coverage(const std::vector<ScoredExplanationSet>& sets);

enum class DiversityGrouping { per_label_set, pooled };

struct DistanceOptions {
  DiversityGrouping grouping = DiversityGrouping::per_label_set;
  bool exclude_degenerate = false;

  friend bool operator==(const DistanceOptions&, const DistanceOptions&) = default;
};

struct DistanceReport {
  std::optional<double> syntactic;  // mean over scored perturbations
  std::optional<double> semantic;   // absent without an embedder
  std::optional<double> diversity;  // mean over groups with >= 2 texts
  DiversityGrouping grouping = DiversityGrouping::per_label_set;
  std::size_t perturbations = 0;
  std::size_t diversity_groups = 0;
};

// An empty embedder leaves the semantic fields absent.
DistanceReport distance_report(const std::vector<ScoredExplanationSet>& sets,
                               const Embedder& embedder, const DistanceOptions& options = {});

std::string_view to_string(CoverageScope s);
std::string_view to_string(DiversityGrouping g);
DiversityGrouping parse_grouping(std::string_view s);

}  // namespace rmcontrast
