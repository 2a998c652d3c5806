#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rmcontrast/core.hpp"

namespace rmtest {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rmcontrast-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline rmcontrast::Comparison make_comparison(const std::string& id, const std::string& chosen = "good answer",
                                              const std::string& rejected = "bad answer") {
  rmcontrast::Comparison c;
  c.id = id;
  c.prompt = "question " + id;
  c.chosen = chosen;
  c.rejected = rejected;
  c.ground_truth = rmcontrast::GroundTruth::chosen_preferred;
  return c;
}

struct Entry {
  rmcontrast::Side side;
  std::string attribute;  // empty: random baseline
  std::string text;
  double reward;
};

// Scored set under `model` with oriented rewards (chosen > rejected).
inline rmcontrast::ScoredExplanationSet make_set(const std::string& id, double r_chosen, double r_rejected,
                                                 const std::vector<Entry>& entries,
                                                 const std::string& model = "m") {
  using namespace rmcontrast;
  std::vector<std::pair<Perturbation, RewardValue>> scored;
  for (const auto& e : entries) {
    Perturbation p;
    p.comparison_id = id;
    p.side = e.side;
    if (e.attribute.empty()) {
      p.generator = GeneratorKind::random_baseline;
    } else {
      p.attribute = e.attribute;
    }
    p.text = e.text;
    scored.push_back({p, RewardValue{e.reward, std::nullopt, false}});
  }
  return make_scored_set(make_comparison(id), model, false, {r_chosen, std::nullopt, false},
                         {r_rejected, std::nullopt, false}, scored);
}

}  // namespace rmtest
