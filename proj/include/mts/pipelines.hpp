#pragma once

#include <string>
#include <vector>

#include "mts/domain.hpp"
#include "mts/llm.hpp"
#include "mts/results.hpp"

namespace mts {

enum class ScoreParseErrorKind { NoTag, NotNumeric, OutOfRange };

std::string to_string(ScoreParseErrorKind kind);

class ScoreParseError : public Error {
 public:
  ScoreParseError(ScoreParseErrorKind kind, const std::string& message, std::string raw_reply)
      : Error(message), kind_(kind), raw_reply_(std::move(raw_reply)) {}
  ScoreParseErrorKind kind() const { return kind_; }
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  ScoreParseErrorKind kind_;
  std::string raw_reply_;
};

// A "Step k" block is missing from a sequential-scoring reply.
class StepParseError : public Error {
 public:
  StepParseError(int step, const std::string& message, std::string raw_reply)
      : Error(message), step_(step), raw_reply_(std::move(raw_reply)) {}
  int step() const { return step_; }
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  int step_;
  std::string raw_reply_;
};

// Extracts the first <score>...</score> span and parses it as a decimal in
// [lo,hi]. Failures are NoTag / NotNumeric / OutOfRange, carrying the reply.
double parse_score_tag(const std::string& reply, double lo = 0.0, double hi = 10.0);

// Vanilla reply: a numeric score on integer scales (must be integral and in
// range), or one of the scale's labels, case-insensitive.
ScoreValue parse_vanilla_score(const std::string& reply, const ScoreScale& scale);

// Sequential reply: one score per "Step k" block, k = 1..steps.
std::vector<double> parse_step_scores(const std::string& reply, int steps = kDefaultTraitCount);

// --- template renders (pure; byte-stable) ---

ChatMessage render_mts_system(const TraitGuidance& trait);
ChatMessage render_mts_turn1(const WritingPrompt& prompt, const Essay& essay,
                             const TraitGuidance& trait);
ChatMessage render_mts_turn2(const TraitGuidance& trait);

std::vector<ChatMessage> render_vanilla(const WritingPrompt& prompt, const Essay& essay,
                                        const ScoreScale& scale);
// Vanilla conversation with the score requested on [0,10] instead of the
// target scale; the batch is scaled like MTS afterwards.
std::vector<ChatMessage> render_vanilla_plus(const WritingPrompt& prompt, const Essay& essay);

std::string render_evaluation_steps(const GuidanceSet& guidance);
std::vector<ChatMessage> render_sequential(const WritingPrompt& prompt, const Essay& essay,
                                           const GuidanceSet& guidance);
std::vector<ChatMessage> render_independent(const WritingPrompt& prompt, const Essay& essay,
                                            const TraitGuidance& trait);

// --- pipeline drivers ---

struct RunContext {
  Backend& backend;
  SamplingConfig sampling;
  TranscriptRecorder* recorder = nullptr;
  int retry_limit = 3;  // re-asks of a malformed final turn
};

EssayScoringResult run_mts_essay(const Essay& essay, const WritingPrompt& prompt,
                                 const GuidanceSet& guidance, RunContext& ctx);
EssayScoringResult run_vanilla(const Essay& essay, const WritingPrompt& prompt, RunContext& ctx);
EssayScoringResult run_vanilla_plus(const Essay& essay, const WritingPrompt& prompt,
                                    RunContext& ctx);
EssayScoringResult run_sequential(const Essay& essay, const WritingPrompt& prompt,
                                  const GuidanceSet& guidance, RunContext& ctx);
EssayScoringResult run_independent(const Essay& essay, const WritingPrompt& prompt,
                                   const GuidanceSet& guidance, RunContext& ctx);

EssayScoringResult run_pipeline(PipelineKind kind, const Essay& essay,
                                const WritingPrompt& prompt, const GuidanceSet* guidance,
                                RunContext& ctx);

// JSONL round-trip for per-run results files.
std::string serialize_result(const EssayScoringResult& result);
EssayScoringResult deserialize_result(const std::string& line);

}  // namespace mts
