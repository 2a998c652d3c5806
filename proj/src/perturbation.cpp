#include "rmcontrast/perturbation.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rmcontrast/parallel.hpp"

namespace rmcontrast {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::map<std::string, std::string> pair_values(const Comparison& c, Side side,
                                               const OriginalRewards& rewards) {
  return {
      {"question", c.prompt},
      {"response_1", side == Side::chosen ? c.chosen : c.rejected},
      {"response_2", side == Side::chosen ? c.rejected : c.chosen},
      {"score_1", format_score(rewards.of(side))},
      {"score_2", format_score(rewards.of(other(side)))},
      {"better_worse", side == Side::chosen ? "better" : "worse"},
  };
}

TemplateId step2_template(PromptVariant v) {
  switch (v) {
    case PromptVariant::center: return TemplateId::step2_center;
    case PromptVariant::only: return TemplateId::step2_only;
    case PromptVariant::pass: return TemplateId::step2_pass;
  }
  return TemplateId::step2_center;
}

}  // namespace

std::string format_score(double reward) { return fmt::format("{:.4f}", reward); }

std::string build_step1_prompt(const TemplateSet& templates, const Comparison& c, Side side,
                               const OriginalRewards& rewards, const AttributeCatalog& catalog) {
  auto values = pair_values(c, side, rewards);
  values["attribute_list"] = join(catalog.names(), ", ");
  return templates.get(TemplateId::step1).render(values);
}

Step1Result parse_step1(std::string_view raw, const AttributeCatalog& catalog) {
  Step1Result result;
  for (const auto& a : catalog.attributes()) result.words[a.name];
  std::size_t parsable = 0;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = trim(raw.substr(pos, end - pos));
    pos = end + 1;
    // Tolerate list bullets and quoting around the whole line.
    while (!line.empty() && (line.front() == '-' || line.front() == '*' || line.front() == '\'' ||
                             line.front() == '"' || line.front() == '`')) {
      line = trim(line.substr(1));
    }
    while (!line.empty() &&
           (line.back() == '\'' || line.back() == '"' || line.back() == '`')) {
      line = trim(line.substr(0, line.size() - 1));
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string_view name = trim(line.substr(0, colon));
    while (!name.empty() && name.front() == '*') name.remove_prefix(1);
    while (!name.empty() && name.back() == '*') name.remove_suffix(1);
    name = trim(name);
    if (name.empty()) continue;
    ++parsable;
    const Attribute* attr = catalog.find_case_insensitive(name);
    if (!attr) {
      spdlog::warn("step 1 output names unknown attribute '{}'; dropped", name);
      result.unknown_attributes.emplace_back(name);
      continue;
    }
    auto& words = result.words[attr->name];
    std::string_view rest = line.substr(colon + 1);
    std::size_t wpos = 0;
    while (wpos <= rest.size()) {
      auto comma = rest.find(',', wpos);
      if (comma == std::string_view::npos) comma = rest.size();
      const auto word = trim(rest.substr(wpos, comma - wpos));
      if (!word.empty()) words.emplace_back(word);
      wpos = comma + 1;
    }
  }
  if (parsable == 0) {
    throw Error(ErrorKind::parse, "step 1 output has no 'attribute: words' lines");
  }
  return result;
}

std::string build_step2_prompt(const TemplateSet& templates, const Comparison& c, Side side,
                               const OriginalRewards& rewards, const Attribute& attribute,
                               const std::vector<std::string>& words, PromptVariant variant) {
  auto values = pair_values(c, side, rewards);
  values["attribute"] = attribute.name;
  values["attribute_description"] = attribute.description;
  values["relevant_words"] = join(words, ", ");
  values["target_quality"] = side == Side::chosen ? "worse" : "better";
  values["change_direction"] = side == Side::chosen ? "Negatively" : "Positively";
  return templates.get(step2_template(variant)).render(values);
}

std::string build_random_prompt(const TemplateSet& templates, const std::string& response) {
  return templates.get(TemplateId::random_baseline).render({{"response_1", response}});
}

std::string build_discovery_prompt(const TemplateSet& templates, const Comparison& c,
                                   const OriginalRewards& rewards) {
  return templates.get(TemplateId::attribute_discovery).render(pair_values(c, Side::chosen, rewards));
}

std::string fixture_marker(std::string_view kind,
                           const std::vector<std::pair<std::string, std::string>>& keys) {
  std::string out = fmt::format("[{}", kind);
  for (const auto& [k, v] : keys) out += fmt::format(" {}={}", k, v);
  out += "]";
  return out;
}

namespace {

std::string with_marker(const GeneratorConfig& config, std::string_view kind,
                        const std::vector<std::pair<std::string, std::string>>& keys,
                        std::string prompt) {
  if (!config.fixture_markers) return prompt;
  return fixture_marker(kind, keys) + "\n" + prompt;
}

std::string clean_completion(const std::string& text) { return std::string(trim(text)); }

}  // namespace

GenerationResult generate_perturbation_sets(const Comparison& oriented,
                                            const OriginalRewards& rewards,
                                            const AttributeCatalog& catalog,
                                            const GeneratorConfig& config, Gateway& gateway) {
  GenerationResult result;
  for (const Side side : kSides) {
    const std::string side_name(to_string(side));
    const std::string& original = side == Side::chosen ? oriented.chosen : oriented.rejected;

    std::string step1_raw;
    try {
      step1_raw = gateway.chat(
          config.chat, config.system_text,
          with_marker(config, "step1", {{"comparison", oriented.id}, {"side", side_name}},
                      build_step1_prompt(config.templates, oriented, side, rewards, catalog)));
    } catch (const Error& e) {
      spdlog::warn("{} ({}): step 1 failed, side skipped: {}", oriented.id, side_name, e.what());
      result.failures.push_back({side, std::nullopt, e.what()});
      continue;
    }

    PromptVariant variant = config.variant;
    std::optional<Step1Result> step1;
    try {
      step1 = parse_step1(step1_raw, catalog);
    } catch (const Error& e) {
      spdlog::warn("{} ({}): {}; falling back to the pass variant", oriented.id, side_name,
                   e.what());
      variant = PromptVariant::pass;
      result.step1_fallbacks.push_back(side);
    }

    const auto& attributes = catalog.attributes();
    std::vector<std::optional<Perturbation>> slots(attributes.size());
    std::vector<std::optional<std::string>> errors(attributes.size());
    parallel_for(attributes.size(), config.concurrency, [&](std::size_t i) {
      const Attribute& attribute = attributes[i];
      std::vector<std::string> words;
      if (step1) words = step1->words.at(attribute.name);
      try {
        const auto prompt = with_marker(
            config, "step2",
            {{"comparison", oriented.id}, {"side", side_name}, {"attribute", attribute.name}},
            build_step2_prompt(config.templates, oriented, side, rewards, attribute, words,
                               variant));
        Perturbation p;
        p.comparison_id = oriented.id;
        p.side = side;
        p.attribute = attribute.name;
        p.text = clean_completion(gateway.chat(config.chat, config.system_text, prompt));
        p.generator = GeneratorKind::attribute_conditioned;
        p.prompt_variant = variant;
        if (step1) p.relevant_words = std::move(words);
        p.degenerate = p.text == original;
        p.validate();
        slots[i] = std::move(p);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (slots[i]) {
        if (slots[i]->degenerate) {
          spdlog::info("{} ({}): {} perturbation is identical to the original", oriented.id,
                       side_name, attributes[i].name);
        }
        result.side(side).push_back(std::move(*slots[i]));
      } else {
        spdlog::warn("{} ({}): {} perturbation failed: {}", oriented.id, side_name,
                     attributes[i].name, errors[i].value_or("unknown error"));
        result.failures.push_back({side, attributes[i].name, errors[i].value_or("unknown error")});
      }
    }
  }
  return result;
}

GenerationResult generate_random_baseline(const Comparison& oriented, std::size_t n_per_side,
                                          const GeneratorConfig& config, Gateway& gateway) {
  if (n_per_side < 1) throw Error(ErrorKind::configuration, "random baseline needs n_per_side >= 1");
  if (config.chat.temperature == 0.0 && n_per_side > 1) {
    throw Error(ErrorKind::configuration,
                fmt::format("random baseline with {} samples per side needs a nonzero chat "
                            "temperature",
                            n_per_side));
  }
  GenerationResult result;
  for (const Side side : kSides) {
    const std::string side_name(to_string(side));
    const std::string& original = side == Side::chosen ? oriented.chosen : oriented.rejected;
    std::vector<std::optional<Perturbation>> slots(n_per_side);
    std::vector<std::optional<std::string>> errors(n_per_side);
    parallel_for(n_per_side, config.concurrency, [&](std::size_t k) {
      try {
        const auto prompt = with_marker(
            config, "random",
            {{"comparison", oriented.id}, {"side", side_name}, {"index", std::to_string(k)}},
            build_random_prompt(config.templates, original));
        Perturbation p;
        p.comparison_id = oriented.id;
        p.side = side;
        p.text = clean_completion(
            gateway.chat(config.chat, config.system_text, prompt, static_cast<int>(k)));
        p.generator = GeneratorKind::random_baseline;
        p.prompt_variant = config.variant;
        p.degenerate = p.text == original;
        p.validate();
        slots[k] = std::move(p);
      } catch (const Error& e) {
        errors[k] = e.what();
      }
    });
    for (std::size_t k = 0; k < n_per_side; ++k) {
      if (slots[k]) {
        result.side(side).push_back(std::move(*slots[k]));
      } else {
        spdlog::warn("{} ({}): random perturbation {} failed: {}", oriented.id, side_name, k,
                     errors[k].value_or("unknown error"));
        result.failures.push_back({side, std::nullopt, errors[k].value_or("unknown error")});
      }
    }
  }
  return result;
}

std::vector<std::string> split_attribute_list(std::string_view raw) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto end = raw.find_first_of(",\n", pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view item = trim(raw.substr(pos, end - pos));
    pos = end + 1;
    while (!item.empty() && item.back() == '.') item = trim(item.substr(0, item.size() - 1));
    if (item.empty()) continue;
    std::string lowered(item);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(lowered));
  }
  return out;
}

std::vector<DiscoveredAttribute> discover_attributes(
    const std::vector<std::pair<Comparison, OriginalRewards>>& comparisons,
    const GeneratorConfig& config, Gateway& gateway) {
  if (comparisons.empty()) {
    throw Error(ErrorKind::discovery, "attribute discovery needs at least one comparison");
  }
  std::vector<std::optional<std::string>> outputs(comparisons.size());
  parallel_for(comparisons.size(), config.concurrency, [&](std::size_t i) {
    const auto& [c, rewards] = comparisons[i];
    try {
      outputs[i] = gateway.chat(
          config.chat, config.system_text,
          with_marker(config, "discover", {{"comparison", c.id}},
                      build_discovery_prompt(config.templates, c, rewards)));
    } catch (const Error& e) {
      spdlog::warn("{}: attribute discovery call failed: {}", c.id, e.what());
    }
  });

  std::vector<DiscoveredAttribute> counts;
  std::size_t succeeded = 0;
  for (const auto& out : outputs) {
    if (!out) continue;
    ++succeeded;
    for (auto& name : split_attribute_list(*out)) {
      auto it = std::find_if(counts.begin(), counts.end(),
                             [&](const DiscoveredAttribute& d) { return d.name == name; });
      if (it == counts.end()) {
        counts.push_back({std::move(name), 1});
      } else {
        ++it->count;
      }
    }
  }
  if (succeeded == 0) {
    throw Error(ErrorKind::discovery, "every attribute discovery call failed");
  }
  std::stable_sort(counts.begin(), counts.end(),
                   [](const auto& a, const auto& b) { return a.count > b.count; });
  return counts;
}

}  // namespace rmcontrast
