#include "mts/guidance.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mts {

using nlohmann::json;

void validate_decomposition_request(const DecompositionRequest& request) {
  bool toefl_fields = request.trait_name.has_value() || request.rubric_slice.has_value();
  if (request.dataset == Dataset::Toefl11) {
    if (!request.trait_name.has_value() || !request.rubric_slice.has_value()) {
      throw ValidationError("TOEFL11 decomposition requires trait_name and rubric_slice");
    }
  } else if (toefl_fields) {
    throw ValidationError("ASAP decomposition forbids trait_name and rubric_slice");
  }
}

std::vector<ChatMessage> build_decomposition_prompt_asap(const WritingPrompt& prompt,
                                                         bool include_rubric) {
  if (prompt.prompt_text.empty()) {
    throw ValidationError("prompt " + prompt.prompt_id + ": missing prompt text");
  }
  if (include_rubric && prompt.rubric_guidelines.empty()) {
    throw ValidationError("prompt " + prompt.prompt_id + ": missing rubric guidelines");
  }
  std::string text;
  if (prompt.excerpt.has_value()) {
    text += "[Excerpt]\n" + *prompt.excerpt + "\n(end of [Excerpt])\n";
  }
  text += "[Prompt]\n" + prompt.prompt_text + "\n(end of [Prompt])\n";
  if (include_rubric) {
    text += "[Rubric Guidelines]\n" + prompt.rubric_guidelines +
            "\n(end of [Rubric Guidelines])\n"
            "Refer to the provided [Prompt] and [Rubric Guidelines] to generate an essay scoring "
            "rubric divided into four primary dimensions of writing quality. Adhere to the "
            "requirements of [Prompt] and [Rubric Guidelines] when you determine the four "
            "dimensions of writing quality. At each dimension, make sure a brief description of "
            "the dimension is added before the scoring criteria. The score scale of each "
            "dimension ranges from 0 to 10, and the total score is 40.";
  } else {
    // No-reference variant: the rubric block and the clauses citing it are gone.
    text +=
        "Refer to the provided [Prompt] to generate an essay scoring rubric divided into four "
        "primary dimensions of writing quality. Adhere to the requirements of [Prompt] when you "
        "determine the four dimensions of writing quality. At each dimension, make sure a brief "
        "description of the dimension is added before the scoring criteria. The score scale of "
        "each dimension ranges from 0 to 10, and the total score is 40.";
  }
  return {user_message(text)};
}

std::vector<ChatMessage> build_decomposition_prompt_toefl(const std::string& trait_name,
                                                          const std::string& rubric_slice) {
  if (trait_name.empty()) throw ValidationError("empty trait name");
  if (rubric_slice.empty()) throw ValidationError("empty rubric slice");
  return {user_message("[Scoring Rubric]\n" + rubric_slice +
                       "\n(end of [Scoring Rubric])\n"
                       "Refer to [Scoring Rubric] to generate a scoring criteria with score "
                       "ranging from 0 to 10, following  the instruction below:\n"
                       "1. Briefly describe “" +
                       trait_name +
                       "” with one sentence.\n"
                       "2. Divide the score range [0-10] into 5 appropriate intervals.\n"
                       "3. For each interval, summarize its characteristics.")};
}

namespace {

std::string rstrip(std::string line) {
  while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
    line.pop_back();
  }
  return line;
}

std::string lowercase(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return text;
}

// "### 2. **Task Response**:" -> "Task Response"
std::string strip_decoration(const std::string& line) {
  std::size_t begin = 0;
  while (begin < line.size() && (line[begin] == '#' || line[begin] == '*' || line[begin] == ' ' ||
                                 line[begin] == '\t')) {
    ++begin;
  }
  // List numbering: digits followed by '.' or ')' and a space.
  std::size_t digits = begin;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits > begin && digits < line.size() && (line[digits] == '.' || line[digits] == ')') &&
      digits + 1 < line.size() && line[digits + 1] == ' ') {
    begin = digits + 2;
    while (begin < line.size() && (line[begin] == ' ' || line[begin] == '*')) ++begin;
  }
  std::size_t end = line.size();
  while (end > begin && (line[end - 1] == ' ' || line[end - 1] == '*' || line[end - 1] == ':' ||
                         line[end - 1] == '\t')) {
    --end;
  }
  return line.substr(begin, end - begin);
}

bool is_band_marker(const std::string& line) {
  std::string stripped = line;
  std::size_t begin = stripped.find_first_not_of(" \t*-");
  if (begin == std::string::npos) return false;
  stripped = stripped.substr(begin);
  if (lowercase(stripped).rfind("scoring criteria", 0) == 0) return true;
  std::size_t i = 0;
  while (i < stripped.size() && std::isdigit(static_cast<unsigned char>(stripped[i]))) ++i;
  if (i == 0) return false;
  while (i < stripped.size() && stripped[i] == ' ') ++i;
  if (i >= stripped.size() || stripped[i] != '-') return false;
  ++i;
  while (i < stripped.size() && stripped[i] == ' ') ++i;
  return i < stripped.size() && std::isdigit(static_cast<unsigned char>(stripped[i]));
}

bool plausible_title(const std::string& line) {
  if (line.empty() || line.size() > 100) return false;
  char first = line[0];
  if (first == '-' || std::isdigit(static_cast<unsigned char>(first)) ||
      line.rfind("•", 0) == 0) {  // bullet list item
    return false;
  }
  if (is_band_marker(line)) return false;
  std::string stripped = strip_decoration(line);
  if (stripped.empty() || stripped.size() > 80) return false;
  if (std::isdigit(static_cast<unsigned char>(stripped[0]))) return false;
  // Titles are short noun phrases; sentences and lead-ins are not titles.
  if (stripped.find_first_of(".!?") != std::string::npos) return false;
  int words = 1;
  for (char c : stripped) words += c == ' ' ? 1 : 0;
  if (words > 8) return false;
  if (lowercase(stripped).find("scoring criteria") != std::string::npos) return false;
  return true;
}

struct Block {
  std::string name;
  std::vector<std::string> lines;  // everything after the title line
};

}  // namespace

GuidanceSet parse_guidance(const std::string& reply,
                           const std::optional<std::vector<std::string>>& expected_traits,
                           int expected_count) {
  std::vector<std::string> lines;
  {
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) lines.push_back(rstrip(line));
  }

  auto match_expected = [&](const std::string& line) -> std::optional<std::string> {
    if (!expected_traits.has_value()) return std::nullopt;
    std::string stripped = lowercase(strip_decoration(line));
    for (const auto& name : *expected_traits) {
      if (stripped == lowercase(name)) return name;
    }
    return std::nullopt;
  };

  std::vector<Block> blocks;
  bool at_chunk_start = true;
  for (const auto& line : lines) {
    if (line.empty()) {
      at_chunk_start = true;
      continue;
    }
    std::optional<std::string> title;
    if (expected_traits.has_value()) {
      title = match_expected(line);
    } else if (at_chunk_start && plausible_title(line)) {
      title = strip_decoration(line);
    }
    if (title.has_value()) {
      blocks.push_back({*title, {}});
    } else if (!blocks.empty()) {
      blocks.back().lines.push_back(line);
    }
    // Preamble lines before the first title are skipped.
    at_chunk_start = false;
  }

  if (static_cast<int>(blocks.size()) != expected_count) {
    throw GuidanceParseError("expected " + std::to_string(expected_count) +
                                 " trait blocks, found " + std::to_string(blocks.size()),
                             reply);
  }

  GuidanceSet set;
  for (const auto& block : blocks) {
    TraitGuidance trait;
    trait.name = block.name;
    std::size_t criteria_begin = block.lines.size();
    for (std::size_t i = 0; i < block.lines.size(); ++i) {
      if (is_band_marker(block.lines[i])) {
        criteria_begin = i;
        break;
      }
    }
    if (criteria_begin == 0) {
      throw GuidanceParseError("trait " + trait.name + ": missing description", reply);
    }
    for (std::size_t i = 0; i < std::min(criteria_begin, block.lines.size()); ++i) {
      if (i > 0) trait.description += " ";
      trait.description += block.lines[i];
    }
    if (criteria_begin >= block.lines.size()) {
      // No band marker: everything after the first line is criteria.
      if (block.lines.size() < 2) {
        throw GuidanceParseError("trait " + trait.name + ": missing criteria", reply);
      }
      trait.description = block.lines[0];
      criteria_begin = 1;
    }
    std::string criteria;
    for (std::size_t i = criteria_begin; i < block.lines.size(); ++i) {
      if (i > criteria_begin) criteria += "\n";
      criteria += block.lines[i];
    }
    if (criteria.empty()) {
      throw GuidanceParseError("trait " + trait.name + ": missing criteria", reply);
    }
    trait.criteria = criteria;
    set.traits.push_back(std::move(trait));
  }

  try {
    validate_guidance_set(set, expected_count);
  } catch (const ValidationError& error) {
    throw GuidanceParseError(error.what(), reply);
  }
  return set;
}

std::vector<RubricSlice> load_rubric_slices(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read rubric slices: " + path.string());
  json value = json::parse(in, nullptr, true, true);
  if (!value.is_array() || value.empty()) {
    throw IoError("rubric slices file must be a non-empty JSON array");
  }
  std::vector<RubricSlice> slices;
  for (const auto& entry : value) {
    RubricSlice slice;
    slice.trait = entry.at("trait").get<std::string>();
    slice.slice = entry.at("slice").get<std::string>();
    if (slice.trait.empty() || slice.slice.empty()) {
      throw IoError("rubric slice entries need non-empty trait and slice");
    }
    slices.push_back(std::move(slice));
  }
  return slices;
}

namespace {

std::string complete_and_record(Backend& backend, const SamplingConfig& sampling,
                                const std::vector<ChatMessage>& messages,
                                const std::string& prompt_id, const std::string& trait,
                                TranscriptRecorder* recorder) {
  std::string reply = backend.complete(messages, sampling);
  if (recorder != nullptr) {
    Transcript transcript;
    transcript.transcript_id = "decompose:" + prompt_id + ":" + (trait.empty() ? "all" : trait);
    transcript.messages = messages;
    transcript.messages.push_back(assistant_message(reply));
    transcript.sampling = sampling;
    transcript.essay_id = "";
    transcript.trait_name = trait;
    transcript.pipeline_name = "decompose";
    transcript.timestamps = {utc_timestamp()};
    recorder->record(transcript);
  }
  return reply;
}

}  // namespace

GuidanceSet generate_guidance_asap(const WritingPrompt& prompt, Backend& backend,
                                   const SamplingConfig& sampling, GuidanceSource source,
                                   bool include_rubric, TranscriptRecorder* recorder) {
  std::vector<ChatMessage> messages = build_decomposition_prompt_asap(prompt, include_rubric);
  std::string reply =
      complete_and_record(backend, sampling, messages, prompt.prompt_id, "", recorder);
  GuidanceSet set = parse_guidance(reply);
  set.source = source;
  set.prompt_id = prompt.prompt_id;
  return set;
}

GuidanceSet generate_guidance_toefl(const std::vector<RubricSlice>& slices, Backend& backend,
                                    const SamplingConfig& sampling, GuidanceSource source,
                                    TranscriptRecorder* recorder) {
  if (slices.empty()) throw ValidationError("no rubric slices");
  GuidanceSet set;
  set.source = source;
  set.prompt_id = std::string(kSharedPromptId);
  for (const auto& slice : slices) {
    std::vector<ChatMessage> messages =
        build_decomposition_prompt_toefl(slice.trait, slice.slice);
    std::string reply = complete_and_record(backend, sampling, messages,
                                            std::string(kSharedPromptId), slice.trait, recorder);
    GuidanceSet single = parse_guidance(reply, std::vector<std::string>{slice.trait}, 1);
    set.traits.push_back(std::move(single.traits.front()));
  }
  validate_guidance_set(set, static_cast<int>(slices.size()));
  return set;
}

}  // namespace mts
