#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mts/domain.hpp"
#include "mts/results.hpp"

namespace mts {

enum class ScalingMethod { MinmaxClip, Minmax, Fixed };

std::string to_string(ScalingMethod method);
ScalingMethod scaling_method_from_string(const std::string& name);

struct BatchStats {
  double q1 = 0.0;
  double q3 = 0.0;
  double v_min = 0.0;  // q1 - 1.5*(q3-q1)
  double v_max = 0.0;  // q3 + 1.5*(q3-q1)
  double y_min = 0.0;  // min of the values fed to scaling
  double y_max = 0.0;  // max of the values fed to scaling

  bool operator==(const BatchStats&) const = default;
};

struct EssayAggregate {
  std::string essay_id;
  double trait_mean = 0.0;  // average of the selected trait scores (or the direct score)
  double clipped = 0.0;     // after outlier clipping (= trait_mean when clipping is off)
  double scaled = 0.0;      // after min-max / fixed scaling, in [scale.min, scale.max]
  ScoreValue final;         // after discretization

  bool operator==(const EssayAggregate&) const = default;
};

struct BatchAggregate {
  std::vector<EssayAggregate> essays;
  BatchStats stats;
  ScoreScale scale;
  ScalingMethod method = ScalingMethod::MinmaxClip;
  bool degenerate = false;  // all values fed to min-max scaling were equal

  bool operator==(const BatchAggregate&) const = default;
};

// Arithmetic mean of all trait scores in the vector.
double mean_traits(const TraitScoreVector& vector);
// Mean restricted to the named traits; every named trait must be present.
double mean_traits(const TraitScoreVector& vector, const std::vector<std::string>& subset);

// First and third quartiles by sorted linear interpolation at ranks
// 0.25*(n-1) and 0.75*(n-1).
std::pair<double, double> quartiles(const std::vector<double>& values);

struct ClipResult {
  std::vector<double> clipped;
  double v_min = 0.0;
  double v_max = 0.0;
};

// Clamps every value to the IQR fences computed from the batch itself.
ClipResult clip_outliers(const std::vector<double>& means);

// Affine map onto [scale.min, scale.max] using the batch extrema. A batch
// whose values are all equal maps to the midpoint (min+max)/2.
std::vector<double> minmax_scale(const std::vector<double>& values, const ScoreScale& scale);

// Min-max scaling with the extrema pinned to 0 and 10; values must lie in [0,10].
std::vector<double> fixed_scale(const std::vector<double>& values, const ScoreScale& scale);

// IntegerRange: round half away from zero, clamped to [min,max].
// OrdinalLabels: map through the thresholds; a value exactly on a threshold
// belongs to the upper class when boundary_to_upper is set.
ScoreValue discretize(double scaled, const ScoreScale& scale, bool boundary_to_upper = true);

// Full chain over one prompt's batch: per-essay mean (restricted to
// trait_subset when given, or the direct score for overall pipelines),
// optional outlier clipping, scaling, discretization. Incomplete results are
// rejected with their essay ids.
BatchAggregate aggregate_batch(const std::vector<EssayScoringResult>& results,
                               const ScoreScale& scale, ScalingMethod method,
                               const std::optional<std::vector<std::string>>& trait_subset = {});

}  // namespace mts
