#include "rmcontrast/metrics.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>

namespace rmcontrast {

namespace {

// Decodes one code point starting at text[pos]; malformed bytes decode as
// themselves with length 1.
char32_t decode(std::string_view text, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xC0 && b0 < 0xE0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 < 0xF0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xF0 && b0 < 0xF8) {
    len = 4;
    cp = b0 & 0x07;
  }
  if (len == 1 || pos + len > text.size()) {
    ++pos;
    return b0;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return b0;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_white_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000;
}

char32_t fold(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  if (cp >= 0x100 && cp <= 0x17F) {
    if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
    if (cp == 0x178) return 0xFF;
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    if (odd_upper) return (cp % 2 == 1) ? cp + 1 : cp;
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp == 0x386) return 0x3AC;
  if (cp >= 0x388 && cp <= 0x38A) return cp + 37;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 63;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

}  // namespace

std::string case_fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = decode(text, pos);
    const char32_t folded = fold(cp);
    if (folded == cp) {
      out.append(text.substr(start, pos - start));
    } else {
      encode(folded, out);
    }
  }
  return out;
}

std::vector<std::string> word_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = decode(text, pos);
    if (is_white_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    const char32_t folded = fold(cp);
    if (folded == cp) {
      current.append(text.substr(start, pos - start));
    } else {
      encode(folded, current);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double syntactic_distance(std::string_view a, std::string_view b) {
  const auto ta = word_tokenize(a);
  const auto tb = word_tokenize(b);
  const std::size_t longest = std::max(ta.size(), tb.size());
  if (longest == 0) return 0.0;
  const auto d = edit_distance<std::string>(ta, tb);
  return static_cast<double>(d) / static_cast<double>(longest);
}

double semantic_distance(const std::string& a, const std::string& b, const Embedder& embedder) {
  const auto ea = embedder(a);
  const auto eb = embedder(b);
  if (ea.size() != eb.size()) {
    throw Error(ErrorKind::degenerate_embedding,
                fmt::format("embedding dimensions differ ({} vs {})", ea.size(), eb.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) dot += ea[i] * eb[i];
  return 1.0 - dot;
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
  ++count_;
}

std::optional<double> CompensatedSum::mean() const {
  if (count_ == 0) return std::nullopt;
  return value() / static_cast<double>(count_);
}

std::optional<double> semantic_diversity(const std::vector<std::string>& texts,
                                         const Embedder& embedder) {
  if (texts.size() < 2) return std::nullopt;
  std::vector<std::vector<double>> vectors;
  vectors.reserve(texts.size());
  for (const auto& t : texts) vectors.push_back(embedder(t));
  CompensatedSum sum;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      if (vectors[i].size() != vectors[j].size()) {
        throw Error(ErrorKind::degenerate_embedding, "embedding dimensions differ");
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) dot += vectors[i][k] * vectors[j][k];
      sum.add(1.0 - dot);
    }
  }
  return sum.mean();
}

double CoverageReport::fraction(CoverageScope scope, ContrastLabel label) const {
  if (comparisons == 0) return 0.0;
  return static_cast<double>(count(scope, label)) / static_cast<double>(comparisons);
}

std::size_t CoverageReport::count(CoverageScope scope, ContrastLabel label) const {
  return counts[static_cast<std::size_t>(scope)][static_cast<std::size_t>(label)];
}

CoverageReport coverage(const std::vector<ScoredExplanationSet>& sets) {
  CoverageReport report;
  report.comparisons = sets.size();
  for (const auto& set : sets) {
    for (const auto label : {ContrastLabel::counterfactual, ContrastLabel::semifactual}) {
      const bool chosen = set.count(Side::chosen, label) > 0;
      const bool rejected = set.count(Side::rejected, label) > 0;
      const auto l = static_cast<std::size_t>(label);
      report.counts[static_cast<std::size_t>(CoverageScope::chosen)][l] += chosen;
      report.counts[static_cast<std::size_t>(CoverageScope::rejected)][l] += rejected;
      report.counts[static_cast<std::size_t>(CoverageScope::both)][l] += chosen && rejected;
    }
  }
  return report;
}

DistanceReport distance_report(const std::vector<ScoredExplanationSet>& sets,
                               const Embedder& embedder, const DistanceOptions& options) {
  DistanceReport report;
  report.grouping = options.grouping;
  CompensatedSum syntactic;
  CompensatedSum semantic;
  CompensatedSum diversity;
  for (const auto& set : sets) {
    // Groups keyed by (side, label) or by side alone when pooled.
    std::map<std::pair<int, int>, std::vector<std::string>> groups;
    for (const auto& e : set.entries) {
      if (options.exclude_degenerate && e.perturbation.degenerate) continue;
      const auto& original = set.original(e.perturbation.side);
      syntactic.add(syntactic_distance(original, e.perturbation.text));
      if (embedder) semantic.add(semantic_distance(original, e.perturbation.text, embedder));
      const int label = options.grouping == DiversityGrouping::pooled
                            ? -1
                            : static_cast<int>(e.label);
      groups[{static_cast<int>(e.perturbation.side), label}].push_back(e.perturbation.text);
    }
    if (!embedder) continue;
    for (const auto& [key, texts] : groups) {
      if (auto d = semantic_diversity(texts, embedder)) diversity.add(*d);
    }
  }
  report.perturbations = syntactic.count();
  report.syntactic = syntactic.mean();
  report.semantic = semantic.mean();
  report.diversity = diversity.mean();
  report.diversity_groups = diversity.count();
  return report;
}

std::string_view to_string(CoverageScope s) {
  switch (s) {
    case CoverageScope::chosen: return "chosen";
    case CoverageScope::rejected: return "rejected";
    case CoverageScope::both: return "both";
  }
  return "both";
}

std::string_view to_string(DiversityGrouping g) {
  return g == DiversityGrouping::per_label_set ? "per_label_set" : "pooled";
}

DiversityGrouping parse_grouping(std::string_view s) {
  if (s == "per_label_set") return DiversityGrouping::per_label_set;
  if (s == "pooled") return DiversityGrouping::pooled;
  throw Error(ErrorKind::parse, fmt::format("unknown diversity grouping '{}'", s));
}

}  // namespace rmcontrast
