#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aloha/error.hpp"
#include "aloha/text.hpp"

namespace aloha {

enum class ExtractMode { candidate, references };

// One extractor call: a single caption in candidate mode, or the whole
// reference set in multi-caption mode.
struct ExtractorRequest {
  std::vector<std::string> captions;
  ExtractMode mode = ExtractMode::candidate;
};

inline void validate(const ExtractorRequest& r) {
  if (r.captions.empty()) throw Error("extractor request needs at least one caption");
  if (r.mode == ExtractMode::candidate && r.captions.size() != 1)
    throw Error("candidate mode takes exactly one caption");
}

// Instruction block plus in-context examples. Each example pair holds the
// formatted input block ("Caption: ..." / "Captions:\n- ...") and the
// expected "Objects:" bullet list.
struct PromptBundle {
  std::string system_rules;
  std::vector<std::pair<std::string, std::string>> in_context_examples;
};

inline const std::vector<std::string>& default_rule_lines() {
  static const std::vector<std::string> rules = {
      "- Include all attributes and adjectives that describe the object, if present",
      "- Do not repeat objects",
      "- Do not include objects that are mentioned but have no visual presence in the "
      "image, such as light, sound, or emotions",
      "- If the caption is uncertain about an object, YOU MUST include '(possibly)' "
      "after the object",
      "- If the caption thinks an object can be one of several things, include 'or' "
      "and all the possible objects",
      "- Always give the singular form of the object, even if the caption uses the "
      "plural form",
  };
  return rules;
}

/// The shipped instruction block and its two in-context examples (one single
/// caption, one caption set).
inline PromptBundle default_prompt_bundle() {
  PromptBundle b;
  std::string rules =
      "You are an assistant that parses visually present objects from an image "
      "caption. Given an image caption, you list ALL the objects visually present "
      "in the image or photo described by the captions. Strictly abide by the "
      "following rules:\n";
  for (const auto& line : default_rule_lines()) {
    rules += "\n";
    rules += line;
  }
  b.system_rules = std::move(rules);
  b.in_context_examples.emplace_back(
      "Caption: This image shows two pink roses in a tulip-shaped vase on a wooden "
      "kitchen counter, next to a microwave and a toaster oven.",
      "Objects:\n"
      "- pink rose\n"
      "- tulip-shaped vase\n"
      "- wooden kitchen counter\n"
      "- microwave\n"
      "- toaster oven");
  b.in_context_examples.emplace_back(
      "Captions:\n"
      "- Several people riding on a motorcycle with an umbrella open.\n"
      "- Couples riding motorcycles carrying umbrellas and people sitting at tables.\n"
      "- A group of people riding scooters while holding umbrellas.\n"
      "- Some tables and umbrellas sitting next to a building.\n"
      "- Pedestrians and motorcyclists near an open outdoor market.",
      "Objects:\n"
      "- person\n"
      "- couple\n"
      "- motorcycle\n"
      "- umbrella\n"
      "- table\n"
      "- scooter\n"
      "- building\n"
      "- pedestrian\n"
      "- motorcyclist\n"
      "- open outdoor market");
  return b;
}

inline std::string format_query_block(const ExtractorRequest& request) {
  if (request.mode == ExtractMode::candidate)
    return "Caption: " + request.captions.front();
  std::string block = "Captions:";
  for (const auto& c : request.captions) {
    block += "\n- ";
    block += c;
  }
  return block;
}

/// Assemble the full completion prompt: rules, in-context examples, then the
/// query block with a trailing "Objects:" cue for the model to complete.
inline std::string build_prompt(const ExtractorRequest& request,
                                const PromptBundle& bundle) {
  validate(request);
  std::string prompt = bundle.system_rules;
  for (const auto& [input, output] : bundle.in_context_examples) {
    prompt += "\n\n";
    prompt += input;
    prompt += "\n\n";
    prompt += output;
  }
  prompt += "\n\n";
  prompt += format_query_block(request);
  prompt += "\n\nObjects:";
  return prompt;
}

/// Load a bundle from a plain-text file with ===RULES=== and ===EXAMPLE===
/// section markers. Each example section is split at its "Objects:" line.
inline PromptBundle load_prompt_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open prompt bundle: " + path);
  std::vector<std::pair<std::string, std::vector<std::string>>> sections;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t == "===RULES===" || t == "===EXAMPLE===") {
      sections.emplace_back(t, std::vector<std::string>{});
      continue;
    }
    if (sections.empty()) {
      if (t.empty()) continue;
      throw ParseError(path + ": content before the first section marker");
    }
    sections.back().second.push_back(line);
  }

  auto join_trimmed = [](const std::vector<std::string>& lines, std::size_t begin,
                         std::size_t end) {
    while (begin < end && trim(lines[begin]).empty()) ++begin;
    while (end > begin && trim(lines[end - 1]).empty()) --end;
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
      if (!out.empty()) out += "\n";
      out += lines[i];
    }
    return out;
  };

  PromptBundle bundle;
  bool have_rules = false;
  for (const auto& [marker, lines] : sections) {
    if (marker == "===RULES===") {
      bundle.system_rules = join_trimmed(lines, 0, lines.size());
      have_rules = true;
      continue;
    }
    std::size_t objects_at = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]) == "Objects:") {
        objects_at = i;
        break;
      }
    }
    if (objects_at == lines.size())
      throw ParseError(path + ": example section without an \"Objects:\" line");
    bundle.in_context_examples.emplace_back(
        join_trimmed(lines, 0, objects_at),
        join_trimmed(lines, objects_at, lines.size()));
  }
  if (!have_rules) throw ParseError(path + ": missing ===RULES=== section");
  return bundle;
}

}  // namespace aloha
