#include "mts/pipelines.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mts {

using nlohmann::json;

namespace {

// Anonymization note shared by every ASAP user message.
const std::string kAnonymizationNote =
    "[Note]\n"
    "I have made an effort to remove personally identifying information from the essays using "
    "the Named Entity Recognizer (NER). The relevant entities are identified in the text and "
    "then replaced with a string such as \"{PERSON}\", \"{ORGANIZATION}\", \"{LOCATION}\", "
    "\"{DATE}\", \"{TIME}\", \"{MONEY}\", \"{PERCENT}”, “{CAPS}” (any capitalized word) and "
    "“{NUM}” (any digits). Please do not penalize the essay because of the anonymizations.\n"
    "(end of [Note])\n";

const std::string kScoreLine = "Score: <score>insert ONLY the numeric score (from 0 to 10) here</score>";

std::string prompt_block(const WritingPrompt& prompt) {
  return "[Prompt]\n" + prompt.prompt_text + "\n(end of [Prompt])\n";
}

std::string note_block(const WritingPrompt& prompt) {
  return prompt.dataset == Dataset::Asap ? kAnonymizationNote : "";
}

std::string essay_block(const Essay& essay) {
  return "[Essay]\n" + essay.text + "\n(end of [Essay])\n";
}

std::string rubric_block(const TraitGuidance& trait) {
  return "[Scoring Rubric]\n**" + trait.name + "**:\n" + trait.criteria +
         "\n(end of [Scoring Rubric])\n";
}

std::string format_scale_value(double value) {
  if (std::floor(value) == value) return std::to_string(static_cast<long long>(value));
  std::ostringstream out;
  out << value;
  return out.str();
}

void require_trait(const TraitGuidance& trait) {
  if (trait.name.empty() || trait.description.empty() || trait.criteria.empty()) {
    throw ValidationError("trait guidance requires name, description and criteria");
  }
}

}  // namespace

ChatMessage render_mts_system(const TraitGuidance& trait) {
  require_trait(trait);
  return system_message(
      "You are a member of the English essay writing test evaluation committee. Four teachers "
      "will be provided with a [Prompt] and an [Essay] written by a student in response to the "
      "[Prompt]. Each teacher will score the essays based on different dimensions of writing "
      "quality. Your specific responsibility is to score the essays in terms of “" +
      trait.name + "\". " + trait.description +
      " Focus on the content of the [Essay] and the [Scoring Rubric] to determine the score.");
}

ChatMessage render_mts_turn1(const WritingPrompt& prompt, const Essay& essay,
                             const TraitGuidance& trait) {
  require_trait(trait);
  return user_message(prompt_block(prompt) + note_block(prompt) + essay_block(essay) +
                      "Q. List the quotations from the [Essay] that are relevant to “" +
                      trait.name + "” and evaluate whether each quotation is well-written or not.");
}

ChatMessage render_mts_turn2(const TraitGuidance& trait) {
  require_trait(trait);
  return user_message(rubric_block(trait) +
                      "Q. Based on the [Scoring Rubric] and the quotations you found, how would "
                      "you rate the “" +
                      trait.name +
                      "” of this essay? Assign a score from 0 to 10, strictly following the "
                      "[Output Format] below.\n[Output Format]\n" +
                      kScoreLine + "\n(End of [Output Format])");
}

namespace {

std::string vanilla_system_text(const WritingPrompt& prompt, const ScoreScale& scale,
                                bool force_zero_ten) {
  bool asap = prompt.dataset == Dataset::Asap;
  std::string text =
      "As an English teacher, your primary responsibility is to evaluate the writing quality of "
      "essays written by ";
  text += asap ? "middle school students" : "second language learners on an English exam";
  text +=
      ". During the assessment process, you will be provided with a prompt and an essay. First, "
      "you should provide comprehensive and conrete feedback that is closely linked to the "
      "content of the essay. It is essential to avoid offering generic remarks that could be "
      "applied to any piece of writing. To create a compelling evaluation for both the student "
      "and fellow experts, you should reference specific content of the essay to substantiate "
      "your assessment. Next, your evaluation should culminate in assigning an overall score to "
      "the student's essay, ";
  bool numeric = force_zero_ten || scale.kind == ScaleKind::IntegerRange;
  if (numeric) {
    std::string lo = force_zero_ten ? "0" : format_scale_value(scale.min);
    std::string hi = force_zero_ten ? "10" : format_scale_value(scale.max);
    text += "measured on a scale from " + lo + " to " + hi +
            ", where higher score should reflect a higher level of writing quality. ";
  } else {
    text += "on a three level scale of \"low\", \"medium\" and \"high\". ";
  }
  if (asap) {
    text +=
        "It's crucial to tailor your evaluation criteria to be well-suited for middle school "
        "level writing, taking into account the developmental stage and capabilities of these "
        "students.";
  } else {
    text +=
        "It's crucial to tailor your evaluation criteria to be well-suited for second language "
        "learners, taking into account their expected abilities.";
  }
  return text;
}

std::string vanilla_user_text(const WritingPrompt& prompt, const Essay& essay,
                              const ScoreScale& scale, bool force_zero_ten) {
  std::string text = prompt_block(prompt) + note_block(prompt) + essay_block(essay) +
                     "Strictly follow the format below to give your answer. Other formats are "
                     "NOT allowed. Evaluation: <evaluation>insert evaluation here</evaluation>\n";
  bool numeric = force_zero_ten || scale.kind == ScaleKind::IntegerRange;
  if (numeric) {
    std::string lo = force_zero_ten ? "0" : format_scale_value(scale.min);
    std::string hi = force_zero_ten ? "10" : format_scale_value(scale.max);
    text += "Score: <score>insert score (" + lo + " to " + hi + ") here</score>";
  } else {
    text +=
        "Score: <score>insert score (choose one of \"low\", \"medium\", and \"high\") "
        "here</score>";
  }
  return text;
}

}  // namespace

std::vector<ChatMessage> render_vanilla(const WritingPrompt& prompt, const Essay& essay,
                                        const ScoreScale& scale) {
  return {system_message(vanilla_system_text(prompt, scale, false)),
          user_message(vanilla_user_text(prompt, essay, scale, false))};
}

std::vector<ChatMessage> render_vanilla_plus(const WritingPrompt& prompt, const Essay& essay) {
  return {system_message(vanilla_system_text(prompt, prompt.scale, true)),
          user_message(vanilla_user_text(prompt, essay, prompt.scale, true))};
}

std::string render_evaluation_steps(const GuidanceSet& guidance) {
  std::string steps;
  for (std::size_t i = 0; i < guidance.traits.size(); ++i) {
    const TraitGuidance& trait = guidance.traits[i];
    if (i > 0) steps += "\n\n";
    steps += "Step " + std::to_string(i + 1) + ": " + trait.name + "\n" + trait.description +
             "\n" + trait.criteria;
  }
  return steps;
}

std::vector<ChatMessage> render_sequential(const WritingPrompt& prompt, const Essay& essay,
                                           const GuidanceSet& guidance) {
  std::string user = prompt_block(prompt) + note_block(prompt) + essay_block(essay) +
                     "[Evaluation Steps]\n" + render_evaluation_steps(guidance) +
                     "\n(end of [Evaluation Steps])\n"
                     "Q. For each step in [Evaluation Steps], assign a score from 0 to 10, "
                     "strictly following the [Output Format] below.\n[Output Format]\n";
  for (std::size_t i = 0; i < guidance.traits.size(); ++i) {
    user += "Step " + std::to_string(i + 1) +
            "\n- Evaluation: <evaluation>insert evaluation here</evaluation>\n- " + kScoreLine +
            "\n";
  }
  user += "(end of [Output Format])";
  return {system_message(
              "You are an English teacher who is responsible for rating essays. You will be "
              "provided with a prompt and a student’s essay written in response to the prompt. "
              "Follow the provided [Evaluation Steps] and assign a score to the essay in the "
              "specified format."),
          user_message(user)};
}

std::vector<ChatMessage> render_independent(const WritingPrompt& prompt, const Essay& essay,
                                            const TraitGuidance& trait) {
  require_trait(trait);
  return {render_mts_system(trait),
          user_message(prompt_block(prompt) + note_block(prompt) + essay_block(essay) +
                       rubric_block(trait) + "Q: From the above [Scoring Rubric], how would you "
                       "rate the “" +
                       trait.name +
                       "” of this essay? Respond a reasoning followed by a score from 0 to 10, "
                       "strictly following the [Output Format] below:\n[Output Format]\n"
                       "Reasoning: <reasoning>insert your reasoning which will justify your "
                       "decision on the score</reasoning>\n" +
                       kScoreLine + " (End of [Output Format])")};
}

// --- parsing -----------------------------------------------------------------

std::string to_string(ScoreParseErrorKind kind) {
  switch (kind) {
    case ScoreParseErrorKind::NoTag: return "NoTag";
    case ScoreParseErrorKind::NotNumeric: return "NotNumeric";
    case ScoreParseErrorKind::OutOfRange: return "OutOfRange";
  }
  throw ValidationError("unknown parse error kind");
}

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

// First <score>...</score> span; trailing self-corrections are untrusted.
std::optional<std::string> first_score_span(const std::string& reply) {
  std::size_t open = reply.find("<score>");
  if (open == std::string::npos) return std::nullopt;
  std::size_t start = open + 7;
  std::size_t close = reply.find("</score>", start);
  if (close == std::string::npos) return std::nullopt;
  return reply.substr(start, close - start);
}

}  // namespace

double parse_score_tag(const std::string& reply, double lo, double hi) {
  auto span = first_score_span(reply);
  if (!span.has_value()) {
    throw ScoreParseError(ScoreParseErrorKind::NoTag, "no <score>...</score> tag in reply",
                          reply);
  }
  std::string content = trim(*span);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(content, &used);
    if (used != content.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw ScoreParseError(ScoreParseErrorKind::NotNumeric,
                          "score tag content is not a number: '" + content + "'", reply);
  }
  if (!std::isfinite(value)) {
    throw ScoreParseError(ScoreParseErrorKind::NotNumeric,
                          "score tag content is not finite: '" + content + "'", reply);
  }
  if (value < lo || value > hi) {
    throw ScoreParseError(ScoreParseErrorKind::OutOfRange,
                          "score " + content + " outside [" + format_scale_value(lo) + "," +
                              format_scale_value(hi) + "]",
                          reply);
  }
  return value;
}

ScoreValue parse_vanilla_score(const std::string& reply, const ScoreScale& scale) {
  if (scale.kind == ScaleKind::IntegerRange) {
    double value = parse_score_tag(reply, scale.min, scale.max);
    if (std::floor(value) != value) {
      throw ScoreParseError(ScoreParseErrorKind::OutOfRange,
                            "score must be an integer in [" + format_scale_value(scale.min) +
                                "," + format_scale_value(scale.max) + "]",
                            reply);
    }
    return ScoreValue{value};
  }
  auto span = first_score_span(reply);
  if (!span.has_value()) {
    throw ScoreParseError(ScoreParseErrorKind::NoTag, "no <score>...</score> tag in reply",
                          reply);
  }
  std::string label = trim(*span);
  std::transform(label.begin(), label.end(), label.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const auto& candidate : scale.labels) {
    if (label == candidate) return ScoreValue{candidate};
  }
  throw ScoreParseError(ScoreParseErrorKind::NotNumeric,
                        "score tag content '" + trim(*span) + "' is not one of the scale labels",
                        reply);
}

std::vector<double> parse_step_scores(const std::string& reply, int steps) {
  // Locate "Step k" markers at line starts (allowing list/heading decoration).
  std::vector<std::pair<int, std::size_t>> markers;  // (step, offset in reply)
  std::istringstream in(reply);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    std::size_t position = offset;
    offset += line.size() + 1;
    std::size_t i = line.find_first_not_of(" \t#*->");
    if (i == std::string::npos) continue;
    if (line.compare(i, 5, "Step ") != 0) continue;
    std::size_t digits = i + 5;
    std::size_t end = digits;
    while (end < line.size() && std::isdigit(static_cast<unsigned char>(line[end]))) ++end;
    if (end == digits) continue;
    markers.emplace_back(std::stoi(line.substr(digits, end - digits)), position);
  }

  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(steps));
  for (int step = 1; step <= steps; ++step) {
    auto it = std::find_if(markers.begin(), markers.end(),
                           [&](const auto& marker) { return marker.first == step; });
    if (it == markers.end()) {
      throw StepParseError(step, "missing Step " + std::to_string(step) + " block", reply);
    }
    std::size_t begin = it->second;
    std::size_t end = reply.size();
    for (const auto& marker : markers) {
      if (marker.second > begin) end = std::min(end, marker.second);
    }
    try {
      scores.push_back(parse_score_tag(reply.substr(begin, end - begin)));
    } catch (const ScoreParseError& error) {
      throw StepParseError(step,
                           "Step " + std::to_string(step) + ": " + error.what(), reply);
    }
  }
  return scores;
}

// --- drivers -----------------------------------------------------------------

namespace {

// Completes one request and stores the transcript before any parsing happens.
std::string ask(RunContext& ctx, const std::vector<ChatMessage>& messages,
                const std::string& essay_id, const std::string& trait,
                const std::string& pipeline, const std::string& transcript_id,
                std::vector<std::string>& refs) {
  std::string reply = ctx.backend.complete(messages, ctx.sampling);
  if (ctx.recorder != nullptr) {
    Transcript transcript;
    transcript.transcript_id = transcript_id;
    transcript.messages = messages;
    transcript.messages.push_back(assistant_message(reply));
    transcript.sampling = ctx.sampling;
    transcript.essay_id = essay_id;
    transcript.trait_name = trait;
    transcript.pipeline_name = pipeline;
    transcript.timestamps = {utc_timestamp()};
    ctx.recorder->record(transcript);
  }
  refs.push_back(transcript_id);
  return reply;
}

std::string transcript_name(const std::string& pipeline, const std::string& essay_id,
                            const std::string& trait, int turn, int attempt) {
  return pipeline + ":" + essay_id + ":" + (trait.empty() ? "overall" : trait) + ":t" +
         std::to_string(turn) + ":a" + std::to_string(attempt);
}

// Runs fn up to retry_limit attempts, re-sending the same final turn on
// malformed replies. Out-of-range scores are never clamped.
template <typename Fn>
auto with_retries(RunContext& ctx, const std::string& trait, EssayScoringResult& result, Fn fn)
    -> std::optional<decltype(fn(1))> {
  std::string last_reason;
  int attempts = std::max(ctx.retry_limit, 1);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      return fn(attempt);
    } catch (const ScoreParseError& error) {
      last_reason = to_string(error.kind()) + ": " + error.what();
    } catch (const StepParseError& error) {
      last_reason = error.what();
    } catch (const Error& error) {
      // Backend errors surface immediately; retrying is the transport's job.
      result.failures.push_back({trait, attempt, error.what()});
      return std::nullopt;
    }
  }
  result.failures.push_back({trait, attempts, last_reason});
  return std::nullopt;
}

}  // namespace

EssayScoringResult run_mts_essay(const Essay& essay, const WritingPrompt& prompt,
                                 const GuidanceSet& guidance, RunContext& ctx) {
  EssayScoringResult result;
  result.essay_id = essay.essay_id;
  result.prompt_id = prompt.prompt_id;
  result.kind = PipelineKind::Mts;
  result.gold = essay.gold;
  TraitScoreVector vector;
  vector.essay_id = essay.essay_id;

  for (const auto& trait : guidance.traits) {
    // Each trait gets its own conversation; contexts are never shared.
    std::vector<ChatMessage> messages{render_mts_system(trait),
                                      render_mts_turn1(prompt, essay, trait)};
    std::string reply1;
    try {
      reply1 = ask(ctx, messages, essay.essay_id, trait.name, "mts",
                   transcript_name("mts", essay.essay_id, trait.name, 1, 1),
                   vector.transcript_refs);
    } catch (const Error& error) {
      result.failures.push_back({trait.name, 1, error.what()});
      continue;
    }
    messages.push_back(assistant_message(reply1));
    messages.push_back(render_mts_turn2(trait));

    auto score = with_retries(ctx, trait.name, result, [&](int attempt) {
      std::string reply2 = ask(ctx, messages, essay.essay_id, trait.name, "mts",
                               transcript_name("mts", essay.essay_id, trait.name, 2, attempt),
                               vector.transcript_refs);
      return parse_score_tag(reply2);
    });
    if (score.has_value()) vector.scores.push_back({trait.name, *score});
  }

  result.transcript_refs = vector.transcript_refs;
  result.trait_scores = std::move(vector);
  return result;
}

namespace {

EssayScoringResult run_single_turn(const Essay& essay, const WritingPrompt& prompt,
                                   PipelineKind kind, const std::vector<ChatMessage>& messages,
                                   RunContext& ctx,
                                   const std::function<ScoreValue(const std::string&)>& parse) {
  EssayScoringResult result;
  result.essay_id = essay.essay_id;
  result.prompt_id = prompt.prompt_id;
  result.kind = kind;
  result.gold = essay.gold;
  std::string pipeline = to_string(kind);

  auto score = with_retries(ctx, "", result, [&](int attempt) {
    std::string reply = ask(ctx, messages, essay.essay_id, "", pipeline,
                            transcript_name(pipeline, essay.essay_id, "", 1, attempt),
                            result.transcript_refs);
    return parse(reply);
  });
  if (score.has_value()) result.direct_score = *score;
  return result;
}

}  // namespace

EssayScoringResult run_vanilla(const Essay& essay, const WritingPrompt& prompt, RunContext& ctx) {
  return run_single_turn(essay, prompt, PipelineKind::Vanilla,
                         render_vanilla(prompt, essay, prompt.scale), ctx,
                         [&](const std::string& reply) {
                           return parse_vanilla_score(reply, prompt.scale);
                         });
}

EssayScoringResult run_vanilla_plus(const Essay& essay, const WritingPrompt& prompt,
                                    RunContext& ctx) {
  return run_single_turn(essay, prompt, PipelineKind::VanillaPlus,
                         render_vanilla_plus(prompt, essay), ctx,
                         [](const std::string& reply) {
                           return ScoreValue{parse_score_tag(reply)};
                         });
}

EssayScoringResult run_sequential(const Essay& essay, const WritingPrompt& prompt,
                                  const GuidanceSet& guidance, RunContext& ctx) {
  EssayScoringResult result;
  result.essay_id = essay.essay_id;
  result.prompt_id = prompt.prompt_id;
  result.kind = PipelineKind::SequentialTraits;
  result.gold = essay.gold;
  TraitScoreVector vector;
  vector.essay_id = essay.essay_id;

  std::vector<ChatMessage> messages = render_sequential(prompt, essay, guidance);
  auto scores = with_retries(ctx, "", result, [&](int attempt) {
    std::string reply = ask(ctx, messages, essay.essay_id, "", "sequential",
                            transcript_name("sequential", essay.essay_id, "", 1, attempt),
                            vector.transcript_refs);
    return parse_step_scores(reply, static_cast<int>(guidance.traits.size()));
  });
  if (scores.has_value()) {
    // Step k maps onto trait k in guidance order; ranges were checked in the parse.
    for (std::size_t i = 0; i < guidance.traits.size(); ++i) {
      vector.scores.push_back({guidance.traits[i].name, (*scores)[i]});
    }
  }
  result.transcript_refs = vector.transcript_refs;
  result.trait_scores = std::move(vector);
  return result;
}

EssayScoringResult run_independent(const Essay& essay, const WritingPrompt& prompt,
                                   const GuidanceSet& guidance, RunContext& ctx) {
  EssayScoringResult result;
  result.essay_id = essay.essay_id;
  result.prompt_id = prompt.prompt_id;
  result.kind = PipelineKind::IndependentTraits;
  result.gold = essay.gold;
  TraitScoreVector vector;
  vector.essay_id = essay.essay_id;

  for (const auto& trait : guidance.traits) {
    std::vector<ChatMessage> messages = render_independent(prompt, essay, trait);
    auto score = with_retries(ctx, trait.name, result, [&](int attempt) {
      std::string reply =
          ask(ctx, messages, essay.essay_id, trait.name, "independent",
              transcript_name("independent", essay.essay_id, trait.name, 1, attempt),
              vector.transcript_refs);
      return parse_score_tag(reply);
    });
    if (score.has_value()) vector.scores.push_back({trait.name, *score});
  }

  result.transcript_refs = vector.transcript_refs;
  result.trait_scores = std::move(vector);
  return result;
}

EssayScoringResult run_pipeline(PipelineKind kind, const Essay& essay,
                                const WritingPrompt& prompt, const GuidanceSet* guidance,
                                RunContext& ctx) {
  if (is_trait_pipeline(kind) && guidance == nullptr) {
    throw ValidationError(to_string(kind) + " requires a guidance set");
  }
  switch (kind) {
    case PipelineKind::Mts: return run_mts_essay(essay, prompt, *guidance, ctx);
    case PipelineKind::Vanilla: return run_vanilla(essay, prompt, ctx);
    case PipelineKind::VanillaPlus: return run_vanilla_plus(essay, prompt, ctx);
    case PipelineKind::SequentialTraits: return run_sequential(essay, prompt, *guidance, ctx);
    case PipelineKind::IndependentTraits: return run_independent(essay, prompt, *guidance, ctx);
  }
  throw ValidationError("unknown pipeline kind");
}

// --- results JSONL -----------------------------------------------------------

namespace {

json score_value_to_json(const ScoreValue& value) {
  if (is_label(value)) return json(as_label(value));
  return json(as_number(value));
}

ScoreValue score_value_from_json(const json& value) {
  if (value.is_string()) return ScoreValue{value.get<std::string>()};
  return ScoreValue{value.get<double>()};
}

}  // namespace

std::string serialize_result(const EssayScoringResult& result) {
  json value;
  value["essay_id"] = result.essay_id;
  value["prompt_id"] = result.prompt_id;
  value["kind"] = to_string(result.kind);
  value["gold"] = result.gold.has_value() ? score_value_to_json(*result.gold) : json();
  if (result.trait_scores.has_value()) {
    json scores = json::array();
    for (const auto& entry : result.trait_scores->scores) {
      scores.push_back({{"trait", entry.trait}, {"score", entry.score}});
    }
    value["trait_scores"] = scores;
  } else {
    value["trait_scores"] = json();
  }
  value["direct_score"] =
      result.direct_score.has_value() ? score_value_to_json(*result.direct_score) : json();
  value["transcript_refs"] = result.transcript_refs;
  json failures = json::array();
  for (const auto& failure : result.failures) {
    failures.push_back(
        {{"trait", failure.trait}, {"attempt", failure.attempt}, {"reason", failure.reason}});
  }
  value["failures"] = failures;
  return value.dump();
}

EssayScoringResult deserialize_result(const std::string& line) {
  json value = json::parse(line);
  EssayScoringResult result;
  result.essay_id = value.at("essay_id").get<std::string>();
  result.prompt_id = value.at("prompt_id").get<std::string>();
  result.kind = pipeline_kind_from_string(value.at("kind").get<std::string>());
  if (!value.at("gold").is_null()) result.gold = score_value_from_json(value.at("gold"));
  if (!value.at("trait_scores").is_null()) {
    TraitScoreVector vector;
    vector.essay_id = result.essay_id;
    for (const auto& entry : value.at("trait_scores")) {
      vector.scores.push_back(
          {entry.at("trait").get<std::string>(), entry.at("score").get<double>()});
    }
    vector.transcript_refs = value.at("transcript_refs").get<std::vector<std::string>>();
    result.trait_scores = std::move(vector);
  }
  if (!value.at("direct_score").is_null()) {
    result.direct_score = score_value_from_json(value.at("direct_score"));
  }
  result.transcript_refs = value.at("transcript_refs").get<std::vector<std::string>>();
  for (const auto& failure : value.at("failures")) {
    result.failures.push_back({failure.at("trait").get<std::string>(),
                               failure.at("attempt").get<int>(),
                               failure.at("reason").get<std::string>()});
  }
  return result;
}

}  // namespace mts
