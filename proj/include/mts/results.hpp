#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mts/domain.hpp"

namespace mts {

enum class PipelineKind { Mts, Vanilla, VanillaPlus, SequentialTraits, IndependentTraits };

std::string to_string(PipelineKind kind);
PipelineKind pipeline_kind_from_string(const std::string& name);

// True for pipelines that produce one score per trait (rather than a single
// overall score).
bool is_trait_pipeline(PipelineKind kind);

struct ScoringFailure {
  std::string trait;  // empty for overall-score pipelines
  int attempt = 0;
  std::string reason;

  bool operator==(const ScoringFailure&) const = default;
};

// Outcome of scoring one essay with one pipeline. Exactly one of
// trait_scores / direct_score is populated, matching the pipeline kind.
struct EssayScoringResult {
  std::string essay_id;
  std::string prompt_id;
  PipelineKind kind = PipelineKind::Mts;
  std::optional<TraitScoreVector> trait_scores;  // trait pipelines
  std::optional<ScoreValue> direct_score;        // Vanilla (target scale) / Vanilla+ ([0,10])
  std::optional<ScoreValue> gold;                // snapshot of the gold score, when known
  std::vector<std::string> transcript_refs;
  std::vector<ScoringFailure> failures;

  bool complete() const;

  bool operator==(const EssayScoringResult&) const = default;
};

void validate_result(const EssayScoringResult& result);

}  // namespace mts
