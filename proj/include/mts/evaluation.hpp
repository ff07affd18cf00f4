#pragma once

#include <string>
#include <vector>

#include "mts/aggregation.hpp"
#include "mts/domain.hpp"
#include "mts/results.hpp"

namespace mts {

struct ConfusionMatrix {
  std::vector<std::string> categories;     // ordered category names
  std::vector<std::vector<long>> counts;   // counts[truth][pred]

  long total() const;
};

// Quadratic weighted kappa over category indices in [0, num_categories).
// kappa = 1 - sum(w*O) / sum(w*E) with w_ij = (i-j)^2/(C-1)^2. When both
// raters are constant on the same category the statistic is taken as 1.
double qwk(const std::vector<int>& truth, const std::vector<int>& pred, int num_categories);

// Maps scores onto the scale's category space (integers min..max, or label
// indices) and delegates to the index form.
double qwk(const std::vector<ScoreValue>& truth, const std::vector<ScoreValue>& pred,
           const ScoreScale& scale);

ConfusionMatrix confusion_matrix(const std::vector<ScoreValue>& truth,
                                 const std::vector<ScoreValue>& pred, const ScoreScale& scale);

int category_index(const ScoreValue& value, const ScoreScale& scale);
int category_count(const ScoreScale& scale);

// One prompt's aligned predictions and gold scores.
struct PromptScores {
  std::string prompt_id;
  ScoreScale scale;
  std::vector<std::string> essay_ids;
  std::vector<ScoreValue> predicted;
  std::vector<ScoreValue> gold;
  bool degenerate = false;  // degenerate-batch rule: report QWK as 0
};

struct PromptEvaluation {
  std::string prompt_id;
  double qwk = 0.0;
  int essay_count = 0;
  bool degenerate = false;

  bool operator==(const PromptEvaluation&) const = default;
};

struct EvaluationReport {
  std::string pipeline;
  std::string method;
  std::vector<PromptEvaluation> prompts;
  double average_qwk = 0.0;  // plain mean over prompts
};

EvaluationReport evaluate_run(const std::vector<PromptScores>& prompts,
                              const std::string& pipeline, const std::string& method);

// One prompt's complete trait-score results with aligned gold scores, the
// input to the trait-subset ablation.
struct PromptTraitResults {
  std::string prompt_id;
  ScoreScale scale;
  std::vector<EssayScoringResult> results;
  std::vector<ScoreValue> gold;
};

struct SubsetAblation {
  int n = 0;
  std::vector<std::vector<std::string>> subsets;  // all C(N_T, n) trait combinations
  std::vector<double> subset_qwks;                // per subset, averaged over prompts
  double average_qwk = 0.0;                       // averaged over subsets and prompts
};

// Aggregates every size-n subset of the traits with the given method and
// averages the resulting QWK over subsets and prompts. n must be in [2, N_T].
SubsetAblation ablate_trait_subsets(const std::vector<PromptTraitResults>& prompts,
                                    const std::vector<std::string>& trait_names, int n,
                                    ScalingMethod method);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long> counts;
};

// Bins the batch's scaled scores over the target range.
Histogram export_distribution(const BatchAggregate& batch, int bins);

// Tab-separated table: bin bounds plus one count column per named histogram.
std::string render_distribution_table(
    const std::vector<std::pair<std::string, Histogram>>& columns);

// Tab-separated report table in the P1..P8 / Avg. layout, one row per report.
std::string render_report_table(const std::vector<EvaluationReport>& reports);

}  // namespace mts
