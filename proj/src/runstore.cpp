#include "rmcontrast/runstore.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

namespace rmcontrast {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ComparisonStatus s) {
  switch (s) {
    case ComparisonStatus::explained: return "explained";
    case ComparisonStatus::skipped_tie: return "skipped_tie";
    case ComparisonStatus::skipped_disagreement: return "skipped_disagreement";
  }
  return "explained";
}

ComparisonStatus parse_status(std::string_view s) {
  if (s == "explained") return ComparisonStatus::explained;
  if (s == "skipped_tie") return ComparisonStatus::skipped_tie;
  if (s == "skipped_disagreement") return ComparisonStatus::skipped_disagreement;
  throw Error(ErrorKind::parse, fmt::format("unknown comparison status '{}'", s));
}

Comparison ComparisonRun::oriented() const {
  if (!swapped) return original;
  return orient_comparison(original, 0.0, 1.0).comparison;
}

void RunManifest::validate() const {
  if (catalog.hash() != catalog_hash) {
    throw Error(ErrorKind::configuration,
                fmt::format("run {}: catalog hash {} does not match the stored catalog", run_id,
                            catalog_hash));
  }
}

std::vector<ScoredExplanationSet> RunRecord::sets(const std::string& model,
                                                  std::optional<std::uint64_t> seed) const {
  std::vector<ScoredExplanationSet> out;
  for (const auto& c : comparisons) {
    if (c.status != ComparisonStatus::explained) continue;
    if (seed && c.seed != *seed) continue;
    for (const auto& s : c.scored) {
      if (s.model_id == model) out.push_back(s);
    }
  }
  return out;
}

std::string new_run_id() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::random_device rd;
  return fmt::format("{:04}{:02}{:02}T{:02}{:02}{:02}-{:08x}", tm.tm_year + 1900, tm.tm_mon + 1,
                     tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, rd());
}

namespace {

json comparison_to_json(const Comparison& c) {
  json j = {{"id", c.id}, {"prompt", c.prompt}, {"chosen", c.chosen}, {"rejected", c.rejected}};
  if (c.ground_truth) j["ground_truth"] = to_string(*c.ground_truth);
  if (c.aspect_scores) j["aspect_scores"] = {c.aspect_scores->first, c.aspect_scores->second};
  return j;
}

Comparison comparison_from_json(const json& j) {
  Comparison c;
  c.id = j.at("id").get<std::string>();
  c.prompt = j.at("prompt").get<std::string>();
  c.chosen = j.at("chosen").get<std::string>();
  c.rejected = j.at("rejected").get<std::string>();
  if (j.contains("ground_truth")) c.ground_truth = parse_ground_truth(j.at("ground_truth").get<std::string>());
  if (j.contains("aspect_scores")) {
    const auto& a = j.at("aspect_scores");
    c.aspect_scores = std::make_pair(a.at(0).get<std::vector<double>>(), a.at(1).get<std::vector<double>>());
  }
  return c;
}

json reward_to_json(const RewardValue& r) {
  json j = {{"scalar", r.scalar}, {"scalarisation_applied", r.scalarisation_applied}};
  if (r.vector) j["vector"] = *r.vector;
  return j;
}

RewardValue reward_from_json(const json& j) {
  RewardValue r;
  r.scalar = j.at("scalar").get<double>();
  r.scalarisation_applied = j.at("scalarisation_applied").get<bool>();
  if (j.contains("vector")) r.vector = j.at("vector").get<std::vector<double>>();
  return r;
}

json perturbation_to_json(const Perturbation& p) {
  json j = {{"comparison_id", p.comparison_id},
            {"side", to_string(p.side)},
            {"text", p.text},
            {"generator", to_string(p.generator)},
            {"prompt_variant", to_string(p.prompt_variant)},
            {"degenerate", p.degenerate}};
  j["attribute"] = p.attribute ? json(*p.attribute) : json(nullptr);
  if (p.relevant_words) j["relevant_words"] = *p.relevant_words;
  return j;
}

Perturbation perturbation_from_json(const json& j) {
  Perturbation p;
  p.comparison_id = j.at("comparison_id").get<std::string>();
  p.side = parse_side(j.at("side").get<std::string>());
  if (!j.at("attribute").is_null()) p.attribute = j.at("attribute").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.generator = parse_generator(j.at("generator").get<std::string>());
  p.prompt_variant = parse_variant(j.at("prompt_variant").get<std::string>());
  if (j.contains("relevant_words")) p.relevant_words = j.at("relevant_words").get<std::vector<std::string>>();
  p.degenerate = j.at("degenerate").get<bool>();
  return p;
}

json failure_to_json(const GenerationFailure& f) {
  json j = {{"side", to_string(f.side)}, {"message", f.message}};
  j["attribute"] = f.attribute ? json(*f.attribute) : json(nullptr);
  return j;
}

GenerationFailure failure_from_json(const json& j) {
  GenerationFailure f;
  f.side = parse_side(j.at("side").get<std::string>());
  if (!j.at("attribute").is_null()) f.attribute = j.at("attribute").get<std::string>();
  f.message = j.at("message").get<std::string>();
  return f;
}

json manifest_to_json(const RunManifest& m) {
  json catalog = json::array();
  for (const auto& a : m.catalog.attributes()) {
    catalog.push_back({{"name", a.name}, {"description", a.description}});
  }
  json dataset = {{"name", m.dataset.name},
                  {"format", to_string(m.dataset.format)},
                  {"path", m.dataset.path.string()},
                  {"turn_delimiter", m.dataset.turn_delimiter}};
  if (m.dataset.aspect_names) dataset["aspect_names"] = *m.dataset.aspect_names;
  return {{"run_id", m.run_id},
          {"command", m.command},
          {"dataset", std::move(dataset)},
          {"plan", {{"n_per_seed", m.plan.n_per_seed}, {"seeds", m.plan.seeds}}},
          {"models", m.models},
          {"variant", to_string(m.variant)},
          {"generator", to_string(m.generator)},
          {"random_per_side", m.random_per_side},
          {"catalog", std::move(catalog)},
          {"catalog_hash", m.catalog_hash},
          {"templates_dir", m.templates_dir.string()},
          {"template_hash", m.template_hash},
          {"endpoints", endpoints_to_json(m.endpoints)},
          {"distance",
           {{"grouping", to_string(m.distance.grouping)},
            {"exclude_degenerate", m.distance.exclude_degenerate}}}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.command = j.at("command").get<std::string>();
  const auto& d = j.at("dataset");
  m.dataset.name = d.at("name").get<std::string>();
  m.dataset.format = parse_dataset_format(d.at("format").get<std::string>());
  m.dataset.path = d.at("path").get<std::string>();
  m.dataset.turn_delimiter = d.at("turn_delimiter").get<std::string>();
  if (d.contains("aspect_names")) m.dataset.aspect_names = d.at("aspect_names").get<std::vector<std::string>>();
  m.plan.n_per_seed = j.at("plan").at("n_per_seed").get<std::size_t>();
  m.plan.seeds = j.at("plan").at("seeds").get<std::vector<std::uint64_t>>();
  m.models = j.at("models").get<std::vector<std::string>>();
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.generator = parse_generator(j.at("generator").get<std::string>());
  m.random_per_side = j.at("random_per_side").get<std::size_t>();
  std::vector<Attribute> attributes;
  for (const auto& a : j.at("catalog")) {
    attributes.push_back({a.at("name").get<std::string>(), a.at("description").get<std::string>()});
  }
  m.catalog = AttributeCatalog(std::move(attributes));
  m.catalog_hash = j.at("catalog_hash").get<std::string>();
  m.templates_dir = j.at("templates_dir").get<std::string>();
  m.template_hash = j.at("template_hash").get<std::string>();
  m.endpoints = endpoints_from_json(j.at("endpoints"));
  m.distance.grouping = parse_grouping(j.at("distance").at("grouping").get<std::string>());
  m.distance.exclude_degenerate = j.at("distance").at("exclude_degenerate").get<bool>();
  m.validate();
  return m;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path.string()));
  out << bytes;
  out.close();
  if (!out) throw Error(ErrorKind::io, fmt::format("write failed: {}", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot read {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse, fmt::format("{}:{}: {}", path.string(), number, e.what()));
    }
  }
  return rows;
}

json row_key(const ComparisonRun& c) {
  return {{"seed", c.seed}, {"comparison_id", c.original.id}};
}

}  // namespace

void persist(const RunRecord& record, const fs::path& dir) {
  try {
    fs::create_directories(dir);
    fs::remove_all(dir / "reports");
    fs::create_directories(dir / "reports");
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorKind::io, fmt::format("{}: {}", dir.string(), e.code().message()));
  }

  std::vector<json> comparisons;
  std::vector<json> perturbations;
  std::vector<json> rewards;
  std::vector<json> labels;
  for (const auto& c : record.comparisons) {
    json row = row_key(c);
    row["comparison"] = comparison_to_json(c.original);
    row["status"] = to_string(c.status);
    row["swapped"] = c.swapped;
    row["failures"] = json::array();
    for (const auto& f : c.failures) row["failures"].push_back(failure_to_json(f));
    row["step1_fallbacks"] = json::array();
    for (const auto s : c.step1_fallbacks) row["step1_fallbacks"].push_back(to_string(s));
    comparisons.push_back(std::move(row));

    for (std::size_t i = 0; i < c.perturbations.size(); ++i) {
      json p = row_key(c);
      p["index"] = i;
      p["perturbation"] = perturbation_to_json(c.perturbations[i]);
      perturbations.push_back(std::move(p));
    }
    for (const auto& [model, scores] : c.original_rewards) {
      for (const auto side : kSides) {
        json r = row_key(c);
        r["model"] = model;
        r["target"] = to_string(side);
        r["reward"] = reward_to_json(side == Side::chosen ? scores.chosen : scores.rejected);
        rewards.push_back(std::move(r));
      }
    }
    for (const auto& set : c.scored) {
      for (std::size_t i = 0; i < set.entries.size(); ++i) {
        json r = row_key(c);
        r["model"] = set.model_id;
        r["target"] = "perturbation";
        r["index"] = i;
        r["reward"] = reward_to_json(set.entries[i].reward);
        rewards.push_back(std::move(r));
        json l = row_key(c);
        l["model"] = set.model_id;
        l["index"] = i;
        l["label"] = to_string(set.entries[i].label);
        labels.push_back(std::move(l));
      }
    }
  }

  write_file(dir / "manifest.json", manifest_to_json(record.manifest).dump(2) + "\n");
  write_file(dir / "comparisons.jsonl", jsonl(comparisons));
  write_file(dir / "perturbations.jsonl", jsonl(perturbations));
  write_file(dir / "rewards.jsonl", jsonl(rewards));
  write_file(dir / "labels.jsonl", jsonl(labels));
  for (const auto& [name, bytes] : record.reports) write_file(dir / "reports" / name, bytes);
}

RunRecord load_run(const fs::path& dir) {
  RunRecord record;
  try {
    record.manifest = manifest_from_json(json::parse(read_file(dir / "manifest.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("{}: {}", (dir / "manifest.json").string(), e.what()));
  }

  using Key = std::pair<std::uint64_t, std::string>;
  std::map<Key, std::size_t> index;
  const auto key_of = [](const json& j) {
    return Key{j.at("seed").get<std::uint64_t>(), j.at("comparison_id").get<std::string>()};
  };
  const auto lookup = [&](const json& j) -> ComparisonRun& {
    auto it = index.find(key_of(j));
    if (it == index.end()) {
      throw Error(ErrorKind::parse, fmt::format("{}: row for unknown comparison {}", dir.string(),
                                                j.at("comparison_id").dump()));
    }
    return record.comparisons[it->second];
  };

  // Per (comparison, model): perturbation rewards and labels by entry index.
  std::map<std::pair<Key, std::string>, std::map<std::size_t, RewardValue>> entry_rewards;
  std::map<std::pair<Key, std::string>, std::map<std::size_t, ContrastLabel>> entry_labels;
  try {
    for (const auto& row : read_jsonl(dir / "comparisons.jsonl")) {
      ComparisonRun c;
      c.seed = row.at("seed").get<std::uint64_t>();
      c.original = comparison_from_json(row.at("comparison"));
      c.status = parse_status(row.at("status").get<std::string>());
      c.swapped = row.at("swapped").get<bool>();
      for (const auto& f : row.at("failures")) c.failures.push_back(failure_from_json(f));
      for (const auto& s : row.at("step1_fallbacks")) c.step1_fallbacks.push_back(parse_side(s.get<std::string>()));
      if (!index.emplace(Key{c.seed, c.original.id}, record.comparisons.size()).second) {
        throw Error(ErrorKind::parse, fmt::format("{}: duplicate comparison {} for seed {}",
                                                  dir.string(), c.original.id, c.seed));
      }
      record.comparisons.push_back(std::move(c));
    }
    for (const auto& row : read_jsonl(dir / "perturbations.jsonl")) {
      auto& c = lookup(row);
      if (row.at("index").get<std::size_t>() != c.perturbations.size()) {
        throw Error(ErrorKind::parse, fmt::format("{}: perturbations out of order", dir.string()));
      }
      c.perturbations.push_back(perturbation_from_json(row.at("perturbation")));
    }
    for (const auto& row : read_jsonl(dir / "rewards.jsonl")) {
      auto& c = lookup(row);
      const auto model = row.at("model").get<std::string>();
      const auto target = row.at("target").get<std::string>();
      auto reward = reward_from_json(row.at("reward"));
      if (target == "perturbation") {
        entry_rewards[{key_of(row), model}][row.at("index").get<std::size_t>()] = std::move(reward);
      } else if (parse_side(target) == Side::chosen) {
        c.original_rewards[model].chosen = std::move(reward);
      } else {
        c.original_rewards[model].rejected = std::move(reward);
      }
    }
    for (const auto& row : read_jsonl(dir / "labels.jsonl")) {
      lookup(row);
      entry_labels[{key_of(row), row.at("model").get<std::string>()}]
                  [row.at("index").get<std::size_t>()] = parse_label(row.at("label").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("{}: {}", dir.string(), e.what()));
  }

  for (auto& c : record.comparisons) {
    if (c.status != ComparisonStatus::explained) continue;
    const Comparison oriented = c.oriented();
    const Key key{c.seed, c.original.id};
    for (const auto& model : record.manifest.models) {
      const auto scores = c.original_rewards.find(model);
      if (scores == c.original_rewards.end()) {
        throw Error(ErrorKind::parse,
                    fmt::format("{}: no original rewards of {} for {}", dir.string(), model, c.original.id));
      }
      ScoredExplanationSet set;
      set.comparison = oriented;
      set.model_id = model;
      set.swapped = c.swapped;
      set.reward_chosen = c.swapped ? scores->second.rejected : scores->second.chosen;
      set.reward_rejected = c.swapped ? scores->second.chosen : scores->second.rejected;
      const auto& rs = entry_rewards[{key, model}];
      const auto& ls = entry_labels[{key, model}];
      if (rs.size() != c.perturbations.size() || ls.size() != c.perturbations.size()) {
        throw Error(ErrorKind::parse, fmt::format("{}: {} has {} perturbations but {} rewards and {} "
                                                  "labels for {}",
                                                  dir.string(), c.original.id, c.perturbations.size(),
                                                  rs.size(), ls.size(), model));
      }
      for (std::size_t i = 0; i < c.perturbations.size(); ++i) {
        set.entries.push_back({c.perturbations[i], rs.at(i), ls.at(i)});
      }
      set.validate();
      c.scored.push_back(std::move(set));
    }
  }

  const fs::path reports = dir / "reports";
  if (fs::is_directory(reports)) {
    for (const auto& entry : fs::directory_iterator(reports)) {
      if (entry.is_regular_file()) {
        record.reports[entry.path().filename().string()] = read_file(entry.path());
      }
    }
  }
  return record;
}

std::string format_mean_std(std::span<const double> values) {
  if (values.empty()) return "n/a";
  CompensatedSum sum;
  for (const double v : values) sum.add(v);
  const double mean = *sum.mean();
  CompensatedSum squares;
  for (const double v : values) squares.add((v - mean) * (v - mean));
  const double std = std::sqrt(*squares.mean());
  std::string s = fmt::format("{:.3f}", std);
  if (s.starts_with("0.")) s.erase(0, 1);
  return fmt::format("{:.2f}±{}", mean, s);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

Tables emit_tables(const std::vector<TableRow>& rows) {
  Tables t;
  t.coverage_csv = "dataset,method,chosen-CF,chosen-SF,rejected-CF,rejected-SF,both-CF,both-SF\n";
  t.distance_csv = "dataset,method,syn. dist.,sem. dist,sem. div.\n";
  for (const auto& row : rows) {
    const std::string prefix = csv_field(row.dataset) + "," + csv_field(row.method);
    std::string line = prefix;
    for (const auto scope : kCoverageScopes) {
      for (const auto label : {ContrastLabel::counterfactual, ContrastLabel::semifactual}) {
        std::vector<double> values;
        for (const auto& s : row.seeds) values.push_back(s.coverage.fraction(scope, label));
        line += "," + format_mean_std(values);
      }
    }
    t.coverage_csv += line + "\n";

    std::vector<double> syn, sem, div;
    for (const auto& s : row.seeds) {
      if (s.distances.syntactic) syn.push_back(*s.distances.syntactic);
      if (s.distances.semantic) sem.push_back(*s.distances.semantic);
      if (s.distances.diversity) div.push_back(*s.distances.diversity);
    }
    t.distance_csv += fmt::format("{},{},{},{}\n", prefix, format_mean_std(syn),
                                  format_mean_std(sem), format_mean_std(div));
  }
  return t;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                    "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};

}  // namespace

std::string sensitivity_chart_svg(const std::vector<SensitivityReport>& reports) {
  std::vector<std::string> attributes;
  for (const auto& r : reports) {
    for (const auto& a : r.attributes) {
      if (std::find(attributes.begin(), attributes.end(), a.attribute) == attributes.end()) {
        attributes.push_back(a.attribute);
      }
    }
  }
  const int bar = 12;
  const int gap = 10;
  const int plot_h = 200;
  const int left = 50;
  const int top = 30;
  const int bottom = 110;
  const int models = static_cast<int>(std::max<std::size_t>(reports.size(), 1));
  const int group = models * bar + gap;
  const int plot_w = static_cast<int>(attributes.size()) * group + gap;
  const int legend_w = 160;
  const int width = left + plot_w + legend_w;
  const int height = top + plot_h + bottom;

  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"10\">\n",
      width, height);
  const std::string title = reports.empty()
                                ? std::string("preference flip rate")
                                : fmt::format("preference flip rate: {} ({})", reports.front().dataset,
                                              to_string(reports.front().side));
  svg += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"12\">{}</text>\n", left, xml_escape(title));
  for (int t = 0; t <= 4; ++t) {
    const double y = top + plot_h - plot_h * t / 4.0;
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n",
        left, y, left + plot_w, y, left - 4, y + 3, t / 4.0);
  }
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\"/>\n", left,
                     top, top + plot_h);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000000\"/>\n", left,
                     top + plot_h, left + plot_w);

  for (std::size_t i = 0; i < attributes.size(); ++i) {
    const int gx = left + gap + static_cast<int>(i) * group;
    for (std::size_t m = 0; m < reports.size(); ++m) {
      const auto pfrs = reports[m].pfr_by_attribute();
      const auto it = pfrs.find(attributes[i]);
      if (it == pfrs.end()) continue;
      const double h = plot_h * std::clamp(it->second, 0.0, 1.0);
      svg += fmt::format(
          "<rect x=\"{}\" y=\"{:.1f}\" width=\"{}\" height=\"{:.1f}\" fill=\"{}\"><title>{} {}: "
          "{:.4f}</title></rect>\n",
          gx + static_cast<int>(m) * bar, top + plot_h - h, bar, h, kPalette[m % std::size(kPalette)],
          xml_escape(reports[m].model_id), xml_escape(attributes[i]), it->second);
    }
    const double cx = gx + models * bar / 2.0;
    svg += fmt::format(
        "<text x=\"{0:.1f}\" y=\"{1}\" text-anchor=\"end\" transform=\"rotate(-60 {0:.1f} {1})\">{2}"
        "</text>\n",
        cx, top + plot_h + 12, xml_escape(attributes[i]));
  }
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const int y = top + static_cast<int>(m) * 16;
    svg += fmt::format(
        "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n"
        "<text x=\"{}\" y=\"{}\">{}</text>\n",
        left + plot_w + 16, y, kPalette[m % std::size(kPalette)], left + plot_w + 30, y + 9,
        xml_escape(reports[m].model_id));
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

std::string file_token(std::string_view s) {
  std::string out;
  for (const char ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    out += keep ? ch : '_';
  }
  return out;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json sensitivity_to_json(const SensitivityReport& r) {
  json attributes = json::array();
  for (const auto& a : r.attributes) {
    attributes.push_back({{"attribute", a.attribute},
                          {"pfr", optional_number(a.pfr)},
                          {"flips", a.flips},
                          {"denominator", a.denominator}});
  }
  return {{"attributes", std::move(attributes)}, {"ranking", r.ranking().order()}};
}

json similarity_to_json(const SimilarityMatrix& m) {
  json tau = json::array();
  for (const auto& row : m.tau) {
    json r = json::array();
    for (const auto& v : row) r.push_back(optional_number(v));
    tau.push_back(std::move(r));
  }
  return {{"models", m.models}, {"attributes", m.attributes}, {"tau", std::move(tau)}};
}

json representatives_to_json(const std::vector<RepresentativeScore>& scores) {
  json out = json::array();
  for (const auto& s : scores) {
    out.push_back({{"comparison_id", s.comparison_id},
                   {"score", s.score},
                   {"tau_first", s.tau_first},
                   {"tau_second", s.tau_second}});
  }
  return out;
}

// First occurrence of each comparison id, so resampled comparisons count once.
std::vector<ScoredExplanationSet> unique_by_id(const std::vector<ScoredExplanationSet>& sets) {
  std::set<std::string> seen;
  std::vector<ScoredExplanationSet> out;
  for (const auto& s : sets) {
    if (seen.insert(s.comparison_id()).second) out.push_back(s);
  }
  return out;
}

std::string method_label(const RunManifest& m, const std::string& model) {
  std::string method(to_string(m.generator));
  if (m.generator == GeneratorKind::attribute_conditioned) method += fmt::format(" {}", to_string(m.variant));
  return fmt::format("{} [{}]", method, model);
}

std::string fixed2(const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : "n/a"; }

}  // namespace

std::map<std::string, std::string> derive_reports(const RunRecord& record, const Embedder& embedder) {
  const auto& m = record.manifest;
  std::map<std::string, std::string> reports;

  // Run summary.
  json summary = {{"dataset", m.dataset.name}, {"command", m.command}};
  std::map<std::string, std::size_t> status_counts;
  std::size_t perturbations = 0;
  std::size_t failures = 0;
  std::size_t fallbacks = 0;
  std::size_t degenerate = 0;
  for (const auto& c : record.comparisons) {
    ++status_counts[std::string(to_string(c.status))];
    perturbations += c.perturbations.size();
    failures += c.failures.size();
    fallbacks += c.step1_fallbacks.size();
    for (const auto& p : c.perturbations) degenerate += p.degenerate;
  }
  summary["comparisons"] = record.comparisons.size();
  summary["status"] = status_counts;
  summary["perturbations"] = perturbations;
  summary["generation_failures"] = failures;
  summary["step1_fallbacks"] = fallbacks;
  summary["degenerate_perturbations"] = degenerate;
  reports["summary.json"] = summary.dump(2) + "\n";

  // Coverage and distance tables, mean±std over seeds.
  std::vector<TableRow> rows;
  for (const auto& model : m.models) {
    TableRow row{m.dataset.name, method_label(m, model), {}};
    for (const auto seed : m.plan.seeds) {
      const auto sets = record.sets(model, seed);
      row.seeds.push_back({seed, coverage(sets), distance_report(sets, embedder, m.distance)});
    }
    rows.push_back(std::move(row));
  }
  const auto tables = emit_tables(rows);
  reports["coverage.csv"] = tables.coverage_csv;
  reports["distances.csv"] = tables.distance_csv;

  // Correctness split over all seeds.
  std::string correctness =
      "dataset,method,group,size,both-CF,both-SF,syn. dist.,sem. dist,sem. div.\n";
  for (const auto& model : m.models) {
    const auto split = correctness_split(record.sets(model), embedder, m.distance);
    for (const auto& [name, group] : {std::pair{"correct", &split.correct}, std::pair{"wrong", &split.wrong}}) {
      if (!*group) {
        correctness += fmt::format("{},{},{},0,n/a,n/a,n/a,n/a,n/a\n", csv_field(m.dataset.name),
                                   csv_field(method_label(m, model)), name);
        continue;
      }
      const auto& g = **group;
      correctness += fmt::format(
          "{},{},{},{},{:.2f},{:.2f},{},{},{}\n", csv_field(m.dataset.name),
          csv_field(method_label(m, model)), name, g.size,
          g.coverage.fraction(CoverageScope::both, ContrastLabel::counterfactual),
          g.coverage.fraction(CoverageScope::both, ContrastLabel::semifactual),
          fixed2(g.distances.syntactic), fixed2(g.distances.semantic), fixed2(g.distances.diversity));
    }
  }
  reports["correctness.csv"] = correctness;

  // Attribute-level analyses only apply to attribute-conditioned runs.
  if (m.generator != GeneratorKind::attribute_conditioned) return reports;

  json sensitivity = {{"dataset", m.dataset.name}, {"models", json::array()}};
  json representatives = {{"dataset", m.dataset.name}, {"single_model", json::object()}};
  std::map<Side, std::vector<SensitivityReport>> by_side;
  for (const auto& model : m.models) {
    const auto sets = record.sets(model);
    auto chosen = preference_flip_rate(sets, Side::chosen, m.catalog, m.dataset.name);
    auto rejected = preference_flip_rate(sets, Side::rejected, m.catalog, m.dataset.name);
    chosen.model_id = rejected.model_id = model;
    std::optional<double> branch;
    try {
      branch = branch_correlation(chosen, rejected);
    } catch (const Error& e) {
      spdlog::warn("{}: branch correlation undefined: {}", model, e.what());
    }
    sensitivity["models"].push_back({{"model", model},
                                     {"chosen", sensitivity_to_json(chosen)},
                                     {"rejected", sensitivity_to_json(rejected)},
                                     {"branch_correlation", optional_number(branch)}});
    representatives["single_model"][model] = representatives_to_json(
        representative_single_model(unique_by_id(sets), chosen, rejected, m.catalog));
    by_side[Side::chosen].push_back(std::move(chosen));
    by_side[Side::rejected].push_back(std::move(rejected));
  }

  if (m.models.size() >= 2) {
    json similarity = json::object();
    json pairs = json::object();
    const auto sets_a = unique_by_id(record.sets(m.models[0]));
    const auto sets_b = unique_by_id(record.sets(m.models[1]));
    for (const auto side : kSides) {
      const auto& reports_side = by_side[side];
      try {
        similarity[std::string(to_string(side))] = similarity_to_json(cross_model_similarity(reports_side));
      } catch (const Error& e) {
        spdlog::warn("cross-model similarity ({}): {}", to_string(side), e.what());
        similarity[std::string(to_string(side))] = nullptr;
      }
      pairs[std::string(to_string(side))] = representatives_to_json(representative_two_models(
          sets_a, sets_b, side, reports_side[0], reports_side[1], m.catalog));
    }
    sensitivity["similarity"] = std::move(similarity);
    representatives["two_models"] = {{"models", {m.models[0], m.models[1]}}, {"sides", std::move(pairs)}};
  }
  reports["sensitivity.json"] = sensitivity.dump(2) + "\n";
  reports["representatives.json"] = representatives.dump(2) + "\n";
  for (const auto side : kSides) {
    reports[fmt::format("sensitivity_{}_{}.svg", file_token(m.dataset.name), to_string(side))] =
        sensitivity_chart_svg(by_side[side]);
  }
  return reports;
}

}  // namespace rmcontrast
