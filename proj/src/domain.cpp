#include "mts/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mts {

namespace {

bool single_line(const std::string& text) {
  return !text.empty() && text.find('\n') == std::string::npos;
}

// Every line non-blank, no leading/trailing newline.
bool well_formed_block(const std::string& text) {
  if (text.empty() || text.front() == '\n' || text.back() == '\n') return false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) return false;
  }
  return true;
}

// The criteria must talk about the 0-10 scale: a score band like "0-2" or a
// mention of 10.
bool references_score_scale(const std::string& criteria) {
  if (criteria.find("10") != std::string::npos) return true;
  for (std::size_t i = 0; i + 2 < criteria.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(criteria[i])) && criteria[i + 1] == '-' &&
        std::isdigit(static_cast<unsigned char>(criteria[i + 2]))) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string to_string(Dataset dataset) {
  return dataset == Dataset::Asap ? "asap" : "toefl11";
}

std::string to_string(Genre genre) {
  switch (genre) {
    case Genre::Arg: return "ARG";
    case Genre::Res: return "RES";
    case Genre::Nar: return "NAR";
  }
  throw ValidationError("unknown genre");
}

Dataset dataset_from_string(const std::string& name) {
  if (name == "asap") return Dataset::Asap;
  if (name == "toefl11") return Dataset::Toefl11;
  throw ValidationError("unknown dataset: " + name);
}

Genre genre_from_string(const std::string& name) {
  if (name == "ARG") return Genre::Arg;
  if (name == "RES") return Genre::Res;
  if (name == "NAR") return Genre::Nar;
  throw ValidationError("unknown genre: " + name);
}

ScoreScale ScoreScale::integer_range(double a, double b) {
  if (!(a < b)) throw ValidationError("score scale requires min < max");
  if (std::floor(a) != a || std::floor(b) != b) {
    throw ValidationError("integer range bounds must be integers");
  }
  ScoreScale scale;
  scale.kind = ScaleKind::IntegerRange;
  scale.min = a;
  scale.max = b;
  return scale;
}

ScoreScale ScoreScale::ordinal_labels(double a, double b, std::vector<std::string> labels,
                                      std::vector<double> thresholds) {
  if (!(a < b)) throw ValidationError("score scale requires min < max");
  if (labels.size() < 2) throw ValidationError("ordinal scale needs at least two labels");
  if (thresholds.size() != labels.size() - 1) {
    throw ValidationError("ordinal scale needs label count - 1 thresholds");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] <= a || thresholds[i] >= b) {
      throw ValidationError("threshold outside (min,max)");
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw ValidationError("thresholds must be strictly increasing");
    }
  }
  std::set<std::string> unique(labels.begin(), labels.end());
  if (unique.size() != labels.size()) throw ValidationError("duplicate ordinal label");
  ScoreScale scale;
  scale.kind = ScaleKind::OrdinalLabels;
  scale.min = a;
  scale.max = b;
  scale.labels = std::move(labels);
  scale.thresholds = std::move(thresholds);
  return scale;
}

ScoreScale ScoreScale::toefl11() {
  return ordinal_labels(1.0, 5.0, {"low", "medium", "high"}, {2.25, 3.75});
}

bool is_label(const ScoreValue& value) { return std::holds_alternative<std::string>(value); }

double as_number(const ScoreValue& value) {
  if (is_label(value)) throw ValidationError("score value is a label, not a number");
  return std::get<double>(value);
}

const std::string& as_label(const ScoreValue& value) {
  if (!is_label(value)) throw ValidationError("score value is a number, not a label");
  return std::get<std::string>(value);
}

std::string score_value_to_string(const ScoreValue& value) {
  if (is_label(value)) return as_label(value);
  double v = as_number(value);
  if (std::floor(v) == v && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  std::ostringstream out;
  out << v;
  return out.str();
}

void validate_prompt(const WritingPrompt& prompt) {
  if (prompt.prompt_id.empty()) throw ValidationError("prompt_id empty");
  if (prompt.prompt_text.empty()) {
    throw ValidationError("prompt " + prompt.prompt_id + ": prompt text empty");
  }
  if (prompt.rubric_guidelines.empty()) {
    throw ValidationError("prompt " + prompt.prompt_id + ": rubric guidelines empty");
  }
  bool source_dependent = prompt.dataset == Dataset::Asap && prompt.genre == Genre::Res;
  if (source_dependent && !prompt.excerpt.has_value()) {
    throw ValidationError("prompt " + prompt.prompt_id +
                          ": source-dependent prompt requires an excerpt");
  }
  if (!source_dependent && prompt.excerpt.has_value()) {
    throw ValidationError("prompt " + prompt.prompt_id +
                          ": excerpt only valid for ASAP source-dependent prompts");
  }
}

void validate_essay(const Essay& essay, const ScoreScale& scale) {
  if (essay.essay_id.empty()) throw ValidationError("essay_id empty");
  if (essay.text.empty()) throw ValidationError("essay " + essay.essay_id + ": text empty");
  if (essay.gold.has_value() && !validate_gold(*essay.gold, scale)) {
    throw ValidationError("essay " + essay.essay_id + ": gold score " +
                          score_value_to_string(*essay.gold) + " invalid for scale");
  }
}

bool validate_gold(const ScoreValue& score, const ScoreScale& scale) {
  if (scale.kind == ScaleKind::IntegerRange) {
    if (is_label(score)) return false;
    double v = as_number(score);
    return std::floor(v) == v && v >= scale.min && v <= scale.max;
  }
  if (!is_label(score)) return false;
  const std::string& label = as_label(score);
  return std::find(scale.labels.begin(), scale.labels.end(), label) != scale.labels.end();
}

std::string to_string(GuidanceSource source) {
  switch (source) {
    case GuidanceSource::ChatGptGenerated: return "chatgpt-generated";
    case GuidanceSource::SelfGenerated: return "self-generated";
    case GuidanceSource::File: return "file";
  }
  throw ValidationError("unknown guidance source");
}

GuidanceSource guidance_source_from_string(const std::string& name) {
  if (name == "chatgpt-generated") return GuidanceSource::ChatGptGenerated;
  if (name == "self-generated") return GuidanceSource::SelfGenerated;
  if (name == "file") return GuidanceSource::File;
  throw ValidationError("unknown guidance source: " + name);
}

std::vector<std::string> GuidanceSet::trait_names() const {
  std::vector<std::string> names;
  names.reserve(traits.size());
  for (const auto& trait : traits) names.push_back(trait.name);
  return names;
}

const GuidanceSet& validate_guidance_set(const GuidanceSet& set, int expected_traits) {
  if (static_cast<int>(set.traits.size()) != expected_traits) {
    throw ValidationError("wrong trait count: expected " + std::to_string(expected_traits) +
                          ", got " + std::to_string(set.traits.size()));
  }
  std::set<std::string> seen;
  for (const auto& trait : set.traits) {
    if (!single_line(trait.name)) {
      throw ValidationError("trait name must be a single non-empty line");
    }
    if (!seen.insert(trait.name).second) {
      throw ValidationError("duplicate trait name: " + trait.name);
    }
    if (!single_line(trait.description)) {
      throw ValidationError("trait " + trait.name +
                            ": description must be a single non-empty line");
    }
    if (trait.criteria.empty()) {
      throw ValidationError("trait " + trait.name + ": empty criteria");
    }
    if (!well_formed_block(trait.criteria)) {
      throw ValidationError("trait " + trait.name + ": criteria must not contain blank lines");
    }
    if (!references_score_scale(trait.criteria)) {
      throw ValidationError("trait " + trait.name + ": criteria do not reference the 0-10 scale");
    }
  }
  return set;
}

std::optional<double> TraitScoreVector::score_for(const std::string& trait) const {
  for (const auto& entry : scores) {
    if (entry.trait == trait) return entry.score;
  }
  return std::nullopt;
}

void validate_trait_scores(const TraitScoreVector& vector, const GuidanceSet& guidance) {
  if (vector.scores.size() != guidance.traits.size()) {
    throw ValidationError("essay " + vector.essay_id + ": expected " +
                          std::to_string(guidance.traits.size()) + " trait scores, got " +
                          std::to_string(vector.scores.size()));
  }
  for (const auto& trait : guidance.traits) {
    auto score = vector.score_for(trait.name);
    if (!score.has_value()) {
      throw ValidationError("essay " + vector.essay_id + ": missing score for trait " +
                            trait.name);
    }
    if (*score < 0.0 || *score > 10.0) {
      throw ValidationError("essay " + vector.essay_id + ": trait " + trait.name + " score " +
                            std::to_string(*score) + " outside [0,10]");
    }
  }
}

std::string render_guidance_file(const GuidanceSet& set) {
  std::ostringstream out;
  out << "source: " << to_string(set.source) << "\n";
  out << "prompt_id: " << set.prompt_id << "\n";
  for (const auto& trait : set.traits) {
    out << "\n" << trait.name << "\n" << trait.description << "\n" << trait.criteria << "\n";
  }
  return out.str();
}

GuidanceSet parse_guidance_file(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  GuidanceSet set;

  auto expect_field = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key + ": ", 0) != 0) {
      throw IoError("guidance file: expected '" + key + ": ...' header line");
    }
    return line.substr(key.size() + 2);
  };
  set.source = guidance_source_from_string(expect_field("source"));
  set.prompt_id = expect_field("prompt_id");

  std::vector<std::string> block;
  auto flush = [&]() {
    if (block.empty()) return;
    if (block.size() < 3) {
      throw IoError("guidance file: trait block needs name, description and criteria");
    }
    TraitGuidance trait;
    trait.name = block[0];
    trait.description = block[1];
    std::string criteria;
    for (std::size_t i = 2; i < block.size(); ++i) {
      if (i > 2) criteria += "\n";
      criteria += block[i];
    }
    trait.criteria = criteria;
    set.traits.push_back(std::move(trait));
    block.clear();
  };

  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
    } else {
      block.push_back(line);
    }
  }
  flush();
  if (set.traits.empty()) throw IoError("guidance file: no trait blocks");
  return set;
}

void save_guidance_file(const std::filesystem::path& path, const GuidanceSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write guidance file: " + path.string());
  out << render_guidance_file(set);
}

GuidanceSet load_guidance_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read guidance file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_guidance_file(buffer.str());
}

}  // namespace mts
