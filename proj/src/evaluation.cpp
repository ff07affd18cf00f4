#include "mts/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>

namespace mts {

long ConfusionMatrix::total() const {
  long sum = 0;
  for (const auto& row : counts) {
    for (long c : row) sum += c;
  }
  return sum;
}

double qwk(const std::vector<int>& truth, const std::vector<int>& pred, int num_categories) {
  if (truth.size() != pred.size()) throw ValidationError("qwk: rating lists differ in length");
  if (truth.empty()) throw ValidationError("qwk: empty rating lists");
  if (num_categories < 1) throw ValidationError("qwk: need at least one category");
  const std::size_t n = truth.size();
  const int c = num_categories;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i] < 0 || truth[i] >= c || pred[i] < 0 || pred[i] >= c) {
      throw ValidationError("qwk: rating outside the category space");
    }
  }
  if (c == 1) return 1.0;

  std::vector<std::vector<double>> observed(c, std::vector<double>(c, 0.0));
  std::vector<double> truth_marginal(c, 0.0), pred_marginal(c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    observed[truth[i]][pred[i]] += 1.0;
    truth_marginal[truth[i]] += 1.0;
    pred_marginal[pred[i]] += 1.0;
  }

  const double denom_w = static_cast<double>(c - 1) * static_cast<double>(c - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      double w = static_cast<double>(i - j) * static_cast<double>(i - j) / denom_w;
      double expected = truth_marginal[i] * pred_marginal[j] / static_cast<double>(n);
      num += w * observed[i][j];
      den += w * expected;
    }
  }
  if (den == 0.0) {
    // Both raters constant on one category; agreement is perfect iff the
    // observed mass sits on the diagonal.
    return 1.0;
  }
  return 1.0 - num / den;
}

int category_count(const ScoreScale& scale) {
  if (scale.kind == ScaleKind::IntegerRange) {
    return static_cast<int>(scale.max - scale.min) + 1;
  }
  return static_cast<int>(scale.labels.size());
}

int category_index(const ScoreValue& value, const ScoreScale& scale) {
  if (scale.kind == ScaleKind::IntegerRange) {
    double v = as_number(value);
    if (std::floor(v) != v || v < scale.min || v > scale.max) {
      throw ValidationError("score " + score_value_to_string(value) +
                            " outside the scale's category space");
    }
    return static_cast<int>(v - scale.min);
  }
  const std::string& label = as_label(value);
  auto it = std::find(scale.labels.begin(), scale.labels.end(), label);
  if (it == scale.labels.end()) throw ValidationError("unknown category label: " + label);
  return static_cast<int>(it - scale.labels.begin());
}

namespace {

std::pair<std::vector<int>, std::vector<int>> to_indices(const std::vector<ScoreValue>& truth,
                                                         const std::vector<ScoreValue>& pred,
                                                         const ScoreScale& scale) {
  if (truth.size() != pred.size()) throw ValidationError("qwk: rating lists differ in length");
  std::vector<int> t, p;
  t.reserve(truth.size());
  p.reserve(pred.size());
  for (const auto& v : truth) t.push_back(category_index(v, scale));
  for (const auto& v : pred) p.push_back(category_index(v, scale));
  return {std::move(t), std::move(p)};
}

}  // namespace

double qwk(const std::vector<ScoreValue>& truth, const std::vector<ScoreValue>& pred,
           const ScoreScale& scale) {
  auto [t, p] = to_indices(truth, pred, scale);
  return qwk(t, p, category_count(scale));
}

ConfusionMatrix confusion_matrix(const std::vector<ScoreValue>& truth,
                                 const std::vector<ScoreValue>& pred, const ScoreScale& scale) {
  auto [t, p] = to_indices(truth, pred, scale);
  int c = category_count(scale);
  ConfusionMatrix matrix;
  matrix.categories.reserve(c);
  if (scale.kind == ScaleKind::IntegerRange) {
    for (int i = 0; i < c; ++i) {
      matrix.categories.push_back(std::to_string(static_cast<long>(scale.min) + i));
    }
  } else {
    matrix.categories = scale.labels;
  }
  matrix.counts.assign(c, std::vector<long>(c, 0));
  for (std::size_t i = 0; i < t.size(); ++i) matrix.counts[t[i]][p[i]] += 1;
  return matrix;
}

EvaluationReport evaluate_run(const std::vector<PromptScores>& prompts,
                              const std::string& pipeline, const std::string& method) {
  if (prompts.empty()) throw ValidationError("evaluate_run: no prompts");
  EvaluationReport report;
  report.pipeline = pipeline;
  report.method = method;
  double sum = 0.0;
  for (const auto& prompt : prompts) {
    if (prompt.predicted.size() != prompt.gold.size() ||
        (!prompt.essay_ids.empty() && prompt.essay_ids.size() != prompt.predicted.size())) {
      throw ValidationError("prompt " + prompt.prompt_id + ": misaligned essays");
    }
    PromptEvaluation entry;
    entry.prompt_id = prompt.prompt_id;
    entry.essay_count = static_cast<int>(prompt.predicted.size());
    entry.degenerate = prompt.degenerate;
    entry.qwk = prompt.degenerate ? 0.0 : qwk(prompt.gold, prompt.predicted, prompt.scale);
    sum += entry.qwk;
    report.prompts.push_back(std::move(entry));
  }
  report.average_qwk = sum / static_cast<double>(report.prompts.size());
  return report;
}

namespace {

void enumerate_subsets(const std::vector<std::string>& names, int n,
                       std::vector<std::vector<std::string>>& out) {
  std::vector<int> pick(n);
  // Lexicographic combinations in guidance order.
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == n) {
      std::vector<std::string> subset;
      subset.reserve(n);
      for (int index : pick) subset.push_back(names[index]);
      out.push_back(std::move(subset));
      return;
    }
    for (int i = start; i <= static_cast<int>(names.size()) - (n - depth); ++i) {
      pick[depth] = i;
      recurse(i + 1, depth + 1);
    }
  };
  recurse(0, 0);
}

}  // namespace

SubsetAblation ablate_trait_subsets(const std::vector<PromptTraitResults>& prompts,
                                    const std::vector<std::string>& trait_names, int n,
                                    ScalingMethod method) {
  if (n < 2 || n > static_cast<int>(trait_names.size())) {
    throw ValidationError("trait subset size must be in [2, " +
                          std::to_string(trait_names.size()) + "]");
  }
  if (prompts.empty()) throw ValidationError("ablate_trait_subsets: no prompts");

  SubsetAblation ablation;
  ablation.n = n;
  enumerate_subsets(trait_names, n, ablation.subsets);

  for (const auto& subset : ablation.subsets) {
    double sum = 0.0;
    for (const auto& prompt : prompts) {
      if (prompt.results.size() != prompt.gold.size()) {
        throw ValidationError("prompt " + prompt.prompt_id + ": misaligned essays");
      }
      BatchAggregate batch = aggregate_batch(prompt.results, prompt.scale, method, subset);
      std::vector<ScoreValue> predicted;
      predicted.reserve(batch.essays.size());
      for (const auto& essay : batch.essays) predicted.push_back(essay.final);
      sum += qwk(prompt.gold, predicted, prompt.scale);
    }
    ablation.subset_qwks.push_back(sum / static_cast<double>(prompts.size()));
  }

  double total = 0.0;
  for (double v : ablation.subset_qwks) total += v;
  ablation.average_qwk = total / static_cast<double>(ablation.subset_qwks.size());
  return ablation;
}

Histogram export_distribution(const BatchAggregate& batch, int bins) {
  if (bins < 1) throw ValidationError("histogram needs at least one bin");
  Histogram histogram;
  histogram.lo = batch.scale.min;
  histogram.hi = batch.scale.max;
  histogram.counts.assign(bins, 0);
  double width = (histogram.hi - histogram.lo) / static_cast<double>(bins);
  for (const auto& essay : batch.essays) {
    int bin = static_cast<int>((essay.scaled - histogram.lo) / width);
    bin = std::min(std::max(bin, 0), bins - 1);
    histogram.counts[bin] += 1;
  }
  return histogram;
}

std::string render_distribution_table(
    const std::vector<std::pair<std::string, Histogram>>& columns) {
  if (columns.empty()) throw ValidationError("no histograms to render");
  std::size_t bins = columns.front().second.counts.size();
  for (const auto& [name, histogram] : columns) {
    if (histogram.counts.size() != bins) {
      throw ValidationError("histogram " + name + " has a different bin count");
    }
  }
  std::ostringstream out;
  out << "bin_lo\tbin_hi";
  for (const auto& [name, histogram] : columns) out << "\t" << name;
  out << "\n";
  const Histogram& first = columns.front().second;
  double width = (first.hi - first.lo) / static_cast<double>(bins);
  out << std::setprecision(6);
  for (std::size_t b = 0; b < bins; ++b) {
    out << first.lo + width * static_cast<double>(b) << "\t"
        << first.lo + width * static_cast<double>(b + 1);
    for (const auto& [name, histogram] : columns) out << "\t" << histogram.counts[b];
    out << "\n";
  }
  return out.str();
}

std::string render_report_table(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw ValidationError("no reports to render");
  const auto& first = reports.front().prompts;
  for (const auto& report : reports) {
    if (report.prompts.size() != first.size()) {
      throw ValidationError("reports cover different prompt sets");
    }
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (report.prompts[i].prompt_id != first[i].prompt_id) {
        throw ValidationError("reports cover different prompts: " +
                              report.prompts[i].prompt_id + " vs " + first[i].prompt_id);
      }
    }
  }
  std::ostringstream out;
  out << "pipeline\tmethod";
  for (const auto& prompt : first) out << "\t" << prompt.prompt_id;
  out << "\tavg\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& report : reports) {
    out << report.pipeline << "\t" << report.method;
    for (const auto& prompt : report.prompts) {
      out << "\t" << prompt.qwk;
      if (prompt.degenerate) out << "*";  // degenerate batch, QWK forced to zero
    }
    out << "\t" << report.average_qwk << "\n";
  }
  return out.str();
}

}  // namespace mts
