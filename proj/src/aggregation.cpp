#include "mts/aggregation.hpp"

#include <algorithm>
#include <cmath>

namespace mts {

std::string to_string(ScalingMethod method) {
  switch (method) {
    case ScalingMethod::MinmaxClip: return "minmax-clip";
    case ScalingMethod::Minmax: return "minmax";
    case ScalingMethod::Fixed: return "fixed";
  }
  throw ValidationError("unknown scaling method");
}

ScalingMethod scaling_method_from_string(const std::string& name) {
  if (name == "minmax-clip" || name == "minmax_clip") return ScalingMethod::MinmaxClip;
  if (name == "minmax") return ScalingMethod::Minmax;
  if (name == "fixed") return ScalingMethod::Fixed;
  throw ValidationError("unknown scaling method: " + name);
}

double mean_traits(const TraitScoreVector& vector) {
  if (vector.scores.empty()) throw ValidationError("essay " + vector.essay_id + ": no trait scores");
  double sum = 0.0;
  for (const auto& entry : vector.scores) sum += entry.score;
  return sum / static_cast<double>(vector.scores.size());
}

double mean_traits(const TraitScoreVector& vector, const std::vector<std::string>& subset) {
  if (subset.empty()) throw ValidationError("trait subset empty");
  double sum = 0.0;
  for (const auto& name : subset) {
    auto score = vector.score_for(name);
    if (!score.has_value()) {
      throw ValidationError("essay " + vector.essay_id + ": missing trait score " + name);
    }
    sum += *score;
  }
  return sum / static_cast<double>(subset.size());
}

std::pair<double, double> quartiles(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("quartiles of an empty list");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  auto at_rank = [&](double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  };
  return {at_rank(0.25), at_rank(0.75)};
}

ClipResult clip_outliers(const std::vector<double>& means) {
  auto [q1, q3] = quartiles(means);
  double iqr = q3 - q1;
  ClipResult result;
  result.v_min = q1 - 1.5 * iqr;
  result.v_max = q3 + 1.5 * iqr;
  result.clipped.reserve(means.size());
  for (double v : means) {
    result.clipped.push_back(std::min(std::max(v, result.v_min), result.v_max));
  }
  return result;
}

std::vector<double> minmax_scale(const std::vector<double>& values, const ScoreScale& scale) {
  if (values.empty()) throw ValidationError("minmax_scale of an empty list");
  double y_min = *std::min_element(values.begin(), values.end());
  double y_max = *std::max_element(values.begin(), values.end());
  std::vector<double> scaled;
  scaled.reserve(values.size());
  if (y_max == y_min) {
    // Degenerate batch: min-max is undefined, map everything to the midpoint.
    double mid = (scale.min + scale.max) / 2.0;
    scaled.assign(values.size(), mid);
    return scaled;
  }
  for (double v : values) {
    scaled.push_back(scale.min + (v - y_min) * (scale.max - scale.min) / (y_max - y_min));
  }
  return scaled;
}

std::vector<double> fixed_scale(const std::vector<double>& values, const ScoreScale& scale) {
  if (values.empty()) throw ValidationError("fixed_scale of an empty list");
  std::vector<double> scaled;
  scaled.reserve(values.size());
  for (double v : values) {
    if (v < 0.0 || v > 10.0) {
      throw ValidationError("fixed_scale value " + std::to_string(v) + " outside [0,10]");
    }
    scaled.push_back(scale.min + v * (scale.max - scale.min) / 10.0);
  }
  return scaled;
}

ScoreValue discretize(double scaled, const ScoreScale& scale, bool boundary_to_upper) {
  if (scale.kind == ScaleKind::IntegerRange) {
    double rounded = std::round(scaled);  // half away from zero
    rounded = std::min(std::max(rounded, scale.min), scale.max);
    return ScoreValue{rounded};
  }
  std::size_t index = 0;
  for (double threshold : scale.thresholds) {
    bool above = boundary_to_upper ? scaled >= threshold : scaled > threshold;
    if (above) ++index;
  }
  return ScoreValue{scale.labels[index]};
}

BatchAggregate aggregate_batch(const std::vector<EssayScoringResult>& results,
                               const ScoreScale& scale, ScalingMethod method,
                               const std::optional<std::vector<std::string>>& trait_subset) {
  if (results.empty()) throw ValidationError("aggregate_batch over an empty batch");

  std::string incomplete;
  for (const auto& result : results) {
    if (!result.complete()) incomplete += (incomplete.empty() ? "" : ", ") + result.essay_id;
  }
  if (!incomplete.empty()) {
    throw ValidationError("incomplete scoring results for essays: " + incomplete);
  }

  std::vector<double> means;
  means.reserve(results.size());
  for (const auto& result : results) {
    if (result.trait_scores.has_value()) {
      means.push_back(trait_subset.has_value() ? mean_traits(*result.trait_scores, *trait_subset)
                                               : mean_traits(*result.trait_scores));
    } else {
      // Overall-score pipelines (Vanilla+) feed the same scaling path.
      double v = as_number(*result.direct_score);
      if (v < 0.0 || v > 10.0) {
        throw ValidationError("essay " + result.essay_id + ": direct score outside [0,10]");
      }
      means.push_back(v);
    }
  }

  BatchAggregate batch;
  batch.scale = scale;
  batch.method = method;
  auto [q1, q3] = quartiles(means);
  batch.stats.q1 = q1;
  batch.stats.q3 = q3;
  batch.stats.v_min = q1 - 1.5 * (q3 - q1);
  batch.stats.v_max = q3 + 1.5 * (q3 - q1);

  std::vector<double> clipped = means;
  if (method == ScalingMethod::MinmaxClip) {
    clipped = clip_outliers(means).clipped;
  }
  std::vector<double> scaled = method == ScalingMethod::Fixed ? fixed_scale(clipped, scale)
                                                              : minmax_scale(clipped, scale);

  batch.stats.y_min = *std::min_element(clipped.begin(), clipped.end());
  batch.stats.y_max = *std::max_element(clipped.begin(), clipped.end());
  batch.degenerate = method != ScalingMethod::Fixed && batch.stats.y_min == batch.stats.y_max;

  batch.essays.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    EssayAggregate entry;
    entry.essay_id = results[i].essay_id;
    entry.trait_mean = means[i];
    entry.clipped = clipped[i];
    entry.scaled = scaled[i];
    entry.final = discretize(scaled[i], scale);
    batch.essays.push_back(std::move(entry));
  }
  return batch;
}

}  // namespace mts
