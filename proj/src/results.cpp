#include "mts/results.hpp"

namespace mts {

std::string to_string(PipelineKind kind) {
  switch (kind) {
    case PipelineKind::Mts: return "mts";
    case PipelineKind::Vanilla: return "vanilla";
    case PipelineKind::VanillaPlus: return "vanilla-plus";
    case PipelineKind::SequentialTraits: return "sequential";
    case PipelineKind::IndependentTraits: return "independent";
  }
  throw ValidationError("unknown pipeline kind");
}

PipelineKind pipeline_kind_from_string(const std::string& name) {
  if (name == "mts") return PipelineKind::Mts;
  if (name == "vanilla") return PipelineKind::Vanilla;
  if (name == "vanilla-plus" || name == "vanilla_plus") return PipelineKind::VanillaPlus;
  if (name == "sequential") return PipelineKind::SequentialTraits;
  if (name == "independent") return PipelineKind::IndependentTraits;
  throw ValidationError("unknown pipeline: " + name);
}

bool is_trait_pipeline(PipelineKind kind) {
  return kind == PipelineKind::Mts || kind == PipelineKind::SequentialTraits ||
         kind == PipelineKind::IndependentTraits;
}

bool EssayScoringResult::complete() const {
  if (!failures.empty()) return false;
  if (is_trait_pipeline(kind)) {
    return trait_scores.has_value() && !trait_scores->scores.empty() && !direct_score.has_value();
  }
  return direct_score.has_value() && !trait_scores.has_value();
}

void validate_result(const EssayScoringResult& result) {
  if (result.essay_id.empty()) throw ValidationError("scoring result without essay_id");
  if (result.trait_scores.has_value() && result.direct_score.has_value()) {
    throw ValidationError("essay " + result.essay_id +
                          ": trait_scores and direct_score are mutually exclusive");
  }
  if (is_trait_pipeline(result.kind) && result.direct_score.has_value()) {
    throw ValidationError("essay " + result.essay_id + ": " + to_string(result.kind) +
                          " results must carry trait scores, not a direct score");
  }
  if (!is_trait_pipeline(result.kind) && result.trait_scores.has_value()) {
    throw ValidationError("essay " + result.essay_id + ": " + to_string(result.kind) +
                          " results must carry a direct score, not trait scores");
  }
  if (result.complete() && !result.trait_scores.has_value() && !result.direct_score.has_value()) {
    throw ValidationError("essay " + result.essay_id + ": no score recorded");
  }
}

}  // namespace mts
