#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "rmcontrast/digest.hpp"
#include "rmcontrast/perturbation.hpp"

namespace rmcontrast {

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::step1: return "step1";
    case TemplateId::step2_center: return "step2_center";
    case TemplateId::step2_only: return "step2_only";
    case TemplateId::step2_pass: return "step2_pass";
    case TemplateId::random_baseline: return "random_baseline";
    case TemplateId::attribute_discovery: return "attribute_discovery";
  }
  return "step1";
}

const std::set<std::string>& template_placeholders() {
  static const std::set<std::string> names = {
      "question",      "response_1",          "response_2",     "score_1",
      "score_2",       "attribute",           "attribute_description",
      "attribute_list", "relevant_words",     "better_worse",   "target_quality",
      "change_direction",
  };
  return names;
}

namespace {

bool is_name_char(char c) {
  return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
         c == '_';
}

// Calls on_text(literal) and on_placeholder(name) in order of occurrence.
template <typename OnText, typename OnPlaceholder>
void scan(std::string_view body, OnText&& on_text, OnPlaceholder&& on_placeholder) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto open = body.find('{', pos);
    if (open == std::string_view::npos) break;
    auto close = open + 1;
    while (close < body.size() && is_name_char(body[close])) ++close;
    if (close < body.size() && body[close] == '}' && close > open + 1) {
      on_text(body.substr(pos, open - pos));
      on_placeholder(body.substr(open + 1, close - open - 1));
      pos = close + 1;
    } else {
      on_text(body.substr(pos, open + 1 - pos));
      pos = open + 1;
    }
  }
  on_text(body.substr(pos));
}

constexpr std::string_view kPreamble =
    "In the task of response quality scoring, a trained deep learning model assigns real-valued "
    "scores for responses to questions, the higher the score the better the response quality.\n"
    "\n"
    "The question is '{question}'. The model assigned a score {score_1} for response A: "
    "'{response_1}'.  The model assigned a score {score_2} for response B: '{response_2}'.\n"
    "\n";

std::string step2_body(std::string_view constraint_line) {
  std::string body(kPreamble);
  body +=
      "The potential high-level attributes that caused the model to assign a {better_worse} "
      "score for response A than response B is: {attribute}. This attribute concerns "
      "{attribute_description}.\n"
      "\n"
      "Your task is to modify response A. Here is a list of requirements for the modification:\n"
      "- The modified response A becomes a {target_quality} response to the question than "
      "response B.\n"
      "- {change_direction} change the semantic meaning of response A by making it "
      "{target_quality} in terms of {attribute}.\n";
  body += constraint_line;
  body += "- Only output the modified response A.";
  return body;
}

}  // namespace

std::set<std::string> PromptTemplate::placeholders() const {
  std::set<std::string> out;
  scan(body, [](std::string_view) {}, [&](std::string_view name) { out.emplace(name); });
  return out;
}

void PromptTemplate::validate() const {
  for (const auto& name : placeholders()) {
    if (!template_placeholders().contains(name)) {
      throw Error(ErrorKind::configuration,
                  fmt::format("template {}: undeclared placeholder {{{}}}", to_string(id), name));
    }
  }
  const bool has_center = body.find(kCenterSentence) != std::string::npos;
  const bool has_only = body.find(kOnlySentence) != std::string::npos;
  const auto require = [&](bool ok, std::string_view what) {
    if (!ok) {
      throw Error(ErrorKind::configuration,
                  fmt::format("template {}: {}", to_string(id), what));
    }
  };
  switch (id) {
    case TemplateId::step2_center:
      require(has_center && !has_only, "must contain the centered-words constraint only");
      break;
    case TemplateId::step2_only:
      require(has_only && !has_center, "must contain the only-modify constraint only");
      break;
    case TemplateId::step2_pass:
      require(!has_center && !has_only, "must not contain a word-constraint sentence");
      break;
    default:
      break;
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(body.size() + 256);
  scan(
      body, [&](std::string_view text) { out += text; },
      [&](std::string_view name) {
        auto it = values.find(std::string(name));
        if (it == values.end()) {
          throw Error(ErrorKind::configuration,
                      fmt::format("template {}: no value for {{{}}}", to_string(id), name));
        }
        out += it->second;
      });
  return out;
}

TemplateSet TemplateSet::defaults() {
  TemplateSet set;
  std::string step1(kPreamble);
  step1 +=
      "The high-level attributes that potentially caused the model to assign a {better_worse} "
      "score for response A than response B are {attribute_list}.\n"
      "\n"
      "Your task: for each attribute in this list, identify the words in response A that are "
      "relevant to it.\n"
      "\n"
      "Only output the attributes and their associated words like this: 'attribute: word1, "
      "word2, word3'. Each line should contain a comma-separated word list for one attribute.\n"
      "\n"
      "It is fine to have repeated words in the words identified for each attribute, but you "
      "need to keep them in their original order of occurrence in the response A.";
  set.set({TemplateId::step1, std::move(step1)});
  set.set({TemplateId::step2_center,
           step2_body("- The changes made to response A should be centered around the following "
                      "words: {relevant_words}\n")});
  set.set({TemplateId::step2_only,
           step2_body("- Response A can only be modified by deleting, replacing, or inserting "
                      "words, at the locations of all or a subset of the following words: "
                      "{relevant_words}\n")});
  set.set({TemplateId::step2_pass, step2_body("")});
  set.set({TemplateId::random_baseline,
           "Generate a random perturbation of this piece of text: {response_1}.\n"
           "\n"
           "Only output the perturbed text.\n"
           "\n"
           "Do not output any characters other than English texts and common punctuation."});
  set.set({TemplateId::attribute_discovery,
           "In the task of response quality scoring, a trained deep learning model assigns "
           "real-valued scores for responses to questions. The higher the score, the better the "
           "response quality. The question is '{question}'. The model assigned a score {score_1} "
           "for response A: '{response_1}'. The model assigned a score {score_2} for response B: "
           "'{response_2}'. List out some high-level attributes which might have caused the model "
           "to assign a better score for response A than response B. Some example attributes "
           "are: appropriateness, clarity, harmlessness, verbosity, etc. Only output the "
           "attributes in a comma-separated list."});
  return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& directory) {
  TemplateSet set = defaults();
  for (const auto id : kTemplateIds) {
    const auto file = directory / (std::string(to_string(id)) + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, fmt::format("{}: cannot read template", file.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string body = ss.str();
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    set.set({id, std::move(body)});
  }
  return set;
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw Error(ErrorKind::configuration, fmt::format("no template {}", to_string(id)));
  }
  return it->second;
}

void TemplateSet::set(PromptTemplate t) {
  t.validate();
  templates_[t.id] = std::move(t);
}

std::string TemplateSet::hash() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, t] : templates_) j[std::string(to_string(id))] = t.body;
  return sha256_hex(j.dump());
}

}  // namespace rmcontrast
