#include "rmcontrast/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

namespace rmcontrast {

using nlohmann::json;

std::string_view to_string(DatasetFormat f) {
  return f == DatasetFormat::pairwise ? "pairwise" : "multi_aspect";
}

DatasetFormat parse_dataset_format(std::string_view s) {
  if (s == "pairwise") return DatasetFormat::pairwise;
  if (s == "multi_aspect") return DatasetFormat::multi_aspect;
  throw Error(ErrorKind::parse, fmt::format("unknown dataset format '{}'", s));
}

void DatasetSpec::validate() const {
  if (name.empty()) throw Error(ErrorKind::configuration, "dataset spec without a name");
  if ((format == DatasetFormat::multi_aspect) != aspect_names.has_value()) {
    throw Error(ErrorKind::configuration,
                fmt::format("dataset '{}': aspect_names must be present iff format is multi_aspect",
                            name));
  }
}

void SamplePlan::validate() const {
  if (n_per_seed < 1) throw Error(ErrorKind::configuration, "n_per_seed must be at least 1");
  std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
  if (distinct.size() != seeds.size()) {
    throw Error(ErrorKind::configuration, "sample seeds must be distinct");
  }
}

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

// Calls fn(line_number, record) for each non-blank line of a JSON-lines file.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::io, fmt::format("{}: cannot open dataset file", path.string()));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::parse,
                  fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
    }
    if (!record.is_object()) {
      throw Error(ErrorKind::parse,
                  fmt::format("{}:{}: record is not a JSON object", path.string(), line_no));
    }
    fn(line_no, record);
  }
}

std::string string_field(const json& record, const char* key, const std::filesystem::path& path,
                         std::size_t line_no) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw Error(ErrorKind::parse, fmt::format("{}:{}: missing string field '{}'", path.string(),
                                              line_no, key));
  }
  return it->get<std::string>();
}

std::vector<double> number_array(const json& record, const char* key,
                                 const std::filesystem::path& path, std::size_t line_no) {
  auto it = record.find(key);
  if (it == record.end() || !it->is_array()) {
    throw Error(ErrorKind::parse, fmt::format("{}:{}: missing numeric array '{}'", path.string(),
                                              line_no, key));
  }
  std::vector<double> out;
  for (const auto& v : *it) {
    if (!v.is_number()) {
      throw Error(ErrorKind::parse, fmt::format("{}:{}: non-numeric entry in '{}'", path.string(),
                                                line_no, key));
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::vector<Comparison> load_pairwise(const DatasetSpec& spec, LoadStats* stats) {
  spec.validate();
  LoadStats local;
  std::vector<Comparison> out;
  for_each_record(spec.path, [&](std::size_t line_no, const json& record) {
    ++local.records;
    Comparison c;
    c.id = fmt::format("{}:{}", spec.name, line_no);
    c.prompt = string_field(record, "prompt", spec.path, line_no);
    c.chosen = string_field(record, "chosen", spec.path, line_no);
    c.rejected = string_field(record, "rejected", spec.path, line_no);
    c.ground_truth = GroundTruth::chosen_preferred;
    if (count_occurrences(c.prompt, spec.turn_delimiter) > 1) {
      spdlog::info("{}: dropping multi-turn record", c.id);
      ++local.multi_turn_dropped;
      return;
    }
    try {
      c.validate();
    } catch (const Error& e) {
      spdlog::warn("dropping record: {}", e.what());
      ++local.invalid_dropped;
      return;
    }
    out.push_back(std::move(c));
  });
  if (stats) *stats = local;
  if (out.empty()) {
    throw Error(ErrorKind::empty_dataset,
                fmt::format("dataset '{}' ({}) has no usable records", spec.name, spec.path.string()));
  }
  return out;
}

std::vector<Comparison> filter_multi_aspect(const std::vector<MultiAspectRecord>& records,
                                            LoadStats* stats) {
  std::vector<Comparison> out;
  std::size_t dropped = 0;
  for (const auto& r : records) {
    if (r.scores_a.size() != r.scores_b.size()) {
      throw Error(ErrorKind::schema,
                  fmt::format("{}: score vectors have different lengths ({} vs {})", r.id,
                              r.scores_a.size(), r.scores_b.size()));
    }
    const auto dominates = [](const std::vector<double>& x, const std::vector<double>& y) {
      if (x.empty()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > y[i])) return false;
      }
      return true;
    };
    Comparison c;
    c.id = r.id;
    c.prompt = r.prompt;
    c.ground_truth = GroundTruth::chosen_preferred;
    if (dominates(r.scores_a, r.scores_b)) {
      c.chosen = r.response_a;
      c.rejected = r.response_b;
      c.aspect_scores = std::make_pair(r.scores_a, r.scores_b);
    } else if (dominates(r.scores_b, r.scores_a)) {
      c.chosen = r.response_b;
      c.rejected = r.response_a;
      c.aspect_scores = std::make_pair(r.scores_b, r.scores_a);
    } else {
      ++dropped;
      continue;
    }
    out.push_back(std::move(c));
  }
  if (stats) stats->not_dominant_dropped += dropped;
  return out;
}

std::vector<Comparison> load_multi_aspect(const DatasetSpec& spec, LoadStats* stats) {
  spec.validate();
  LoadStats local;
  std::vector<MultiAspectRecord> records;
  for_each_record(spec.path, [&](std::size_t line_no, const json& record) {
    ++local.records;
    MultiAspectRecord r;
    r.id = fmt::format("{}:{}", spec.name, line_no);
    r.prompt = string_field(record, "prompt", spec.path, line_no);
    r.response_a = string_field(record, "response_a", spec.path, line_no);
    r.response_b = string_field(record, "response_b", spec.path, line_no);
    r.scores_a = number_array(record, "scores_a", spec.path, line_no);
    r.scores_b = number_array(record, "scores_b", spec.path, line_no);
    if (spec.aspect_names && r.scores_a.size() != spec.aspect_names->size()) {
      throw Error(ErrorKind::schema,
                  fmt::format("{}:{}: expected {} aspect scores, found {}", spec.path.string(),
                              line_no, spec.aspect_names->size(), r.scores_a.size()));
    }
    records.push_back(std::move(r));
  });
  auto out = filter_multi_aspect(records, &local);
  std::erase_if(out, [&](const Comparison& c) {
    try {
      c.validate();
      return false;
    } catch (const Error& e) {
      spdlog::warn("dropping record: {}", e.what());
      ++local.invalid_dropped;
      return true;
    }
  });
  if (stats) *stats = local;
  if (out.empty()) {
    throw Error(ErrorKind::empty_dataset,
                fmt::format("dataset '{}' ({}) has no usable records", spec.name, spec.path.string()));
  }
  return out;
}

std::vector<Comparison> load_dataset(const DatasetSpec& spec, LoadStats* stats) {
  return spec.format == DatasetFormat::pairwise ? load_pairwise(spec, stats)
                                                : load_multi_aspect(spec, stats);
}

std::uint64_t bounded_draw(std::uint64_t bound, std::mt19937_64& rng) {
  // 2^64 mod bound; draws below it would bias the modulo.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

std::vector<SeededSample> sample(const std::vector<Comparison>& population, const SamplePlan& plan) {
  plan.validate();
  if (plan.n_per_seed > population.size()) {
    throw Error(ErrorKind::sampling, fmt::format("cannot sample {} comparisons from a population of {}",
                                                 plan.n_per_seed, population.size()));
  }
  std::vector<SeededSample> out;
  out.reserve(plan.seeds.size());
  for (const auto seed : plan.seeds) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> index(population.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    SeededSample s{seed, {}};
    s.comparisons.reserve(plan.n_per_seed);
    for (std::size_t i = 0; i < plan.n_per_seed; ++i) {
      const auto j = i + static_cast<std::size_t>(bounded_draw(index.size() - i, rng));
      std::swap(index[i], index[j]);
      s.comparisons.push_back(population[index[i]]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Comparison> agreement_filter(const std::vector<Comparison>& comparisons,
                                         const std::vector<std::string>& model_ids,
                                         const RewardLookup& rewards, AgreementStats* stats) {
  AgreementStats local;
  std::vector<Comparison> out;
  for (const auto& c : comparisons) {
    int direction = 0;  // +1 chosen preferred, -1 rejected preferred
    bool keep = true;
    bool tie = false;
    for (const auto& model : model_ids) {
      const auto r = rewards(model, c.id);
      if (!r) {
        throw Error(ErrorKind::lookup,
                    fmt::format("no rewards for comparison {} under model {}", c.id, model));
      }
      if (r->first == r->second) {
        tie = true;
        keep = false;
        break;
      }
      const int d = r->first > r->second ? 1 : -1;
      if (direction == 0) {
        direction = d;
      } else if (d != direction) {
        keep = false;
      }
    }
    if (keep) {
      out.push_back(c);
      ++local.kept;
    } else if (tie) {
      ++local.ties;
    } else {
      ++local.disagreements;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::map<std::string, DatasetSpec> load_registry(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::io, fmt::format("{}: cannot open dataset registry", file.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, fmt::format("{}: {}", file.string(), e.what()));
  }
  if (!j.is_object()) {
    throw Error(ErrorKind::parse, fmt::format("{}: registry must be a JSON object", file.string()));
  }
  std::map<std::string, DatasetSpec> out;
  const auto base = file.parent_path();
  for (const auto& [name, entry] : j.items()) {
    DatasetSpec spec;
    spec.name = name;
    try {
      spec.format = parse_dataset_format(entry.value("format", std::string("pairwise")));
      std::filesystem::path p = entry.at("path").get<std::string>();
      spec.path = p.is_absolute() ? p : base / p;
      if (entry.contains("aspect_names")) {
        spec.aspect_names = entry.at("aspect_names").get<std::vector<std::string>>();
      }
      if (entry.contains("turn_delimiter")) {
        spec.turn_delimiter = entry.at("turn_delimiter").get<std::string>();
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse,
                  fmt::format("{}: dataset '{}': {}", file.string(), name, e.what()));
    }
    spec.validate();
    out.emplace(name, std::move(spec));
  }
  return out;
}

}  // namespace rmcontrast
