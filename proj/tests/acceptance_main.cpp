// Acceptance suite: one check per release criterion, one pass/fail line each.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "mts/evaluation.hpp"
#include "mts/guidance.hpp"
#include "mts/ingestion.hpp"
#include "mts/orchestration.hpp"
#include "mts/pipelines.hpp"
#include "e2e_fixture.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace mts;

namespace {

struct Checker {
  std::vector<std::string> failures;

  void expect(bool condition, const std::string& message) {
    if (!condition) failures.push_back(message);
  }
  void expect_near(double actual, double wanted, double tolerance, const std::string& message) {
    if (!(std::abs(actual - wanted) <= tolerance)) {
      failures.push_back(message + " (got " + std::to_string(actual) + ", wanted " +
                         std::to_string(wanted) + ")");
    }
  }
};

double label_rank(const ScoreValue& value) {
  if (!is_label(value)) return as_number(value);
  const std::string& label = as_label(value);
  return label == "low" ? 0.0 : label == "medium" ? 1.0 : 2.0;
}

EssayScoringResult trait_result(const std::string& id, const std::vector<double>& scores) {
  EssayScoringResult result;
  result.essay_id = id;
  result.prompt_id = "asap-1";
  result.kind = PipelineKind::Mts;
  TraitScoreVector vector;
  vector.essay_id = id;
  const char* names[] = {"A", "B", "C", "D"};
  for (std::size_t i = 0; i < scores.size(); ++i) vector.scores.push_back({names[i], scores[i]});
  result.trait_scores = std::move(vector);
  return result;
}

// --- criteria ---------------------------------------------------------------

void criterion_qwk_oracle(Checker& check) {
  auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    int categories = 2 + static_cast<int>(rng() % 12);
    std::size_t length = 2 + rng() % 49;
    std::vector<int> truth(length), pred(length);
    for (std::size_t i = 0; i < length; ++i) {
      truth[i] = static_cast<int>(rng() % categories);
      pred[i] = static_cast<int>(rng() % categories);
    }
    worst = std::max(worst,
                     std::abs(qwk(truth, pred, categories) - oracle::qwk(truth, pred, categories)));
  }
  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check.expect(worst < 1e-9, "max |qwk - oracle| = " + std::to_string(worst));
  check.expect(seconds < 10.0, "runtime " + std::to_string(seconds) + "s exceeds 10s");
}

std::vector<std::vector<std::vector<double>>> random_batches(int count, int max_size) {
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> score(0.0, 10.0);
  std::vector<std::vector<std::vector<double>>> batches(count);
  for (auto& batch : batches) {
    std::size_t size = 1 + rng() % max_size;
    batch.resize(size);
    for (auto& row : batch) {
      row.resize(4);
      for (auto& v : row) v = score(rng);
    }
  }
  return batches;
}

void criterion_aggregate_oracle(Checker& check) {
  ScoreScale scale = ScoreScale::integer_range(2, 12);
  double worst = 0.0;
  for (const auto& rows : random_batches(1000, 200)) {
    std::vector<EssayScoringResult> results;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      results.push_back(trait_result("e" + std::to_string(i), rows[i]));
    }
    for (int method = 0; method < 3; ++method) {
      ScalingMethod m = method == 0   ? ScalingMethod::MinmaxClip
                        : method == 1 ? ScalingMethod::Minmax
                                      : ScalingMethod::Fixed;
      BatchAggregate batch = aggregate_batch(results, scale, m);
      auto expected = oracle::aggregate(rows, 2, 12, method);
      for (std::size_t i = 0; i < expected.size(); ++i) {
        worst = std::max(worst, std::abs(batch.essays[i].trait_mean - expected[i].mean));
        worst = std::max(worst, std::abs(batch.essays[i].clipped - expected[i].clipped));
        worst = std::max(worst, std::abs(batch.essays[i].scaled - expected[i].scaled));
      }
    }
  }
  check.expect(worst < 1e-9, "max pre-discretization deviation = " + std::to_string(worst));

  // Degenerate cases map to the documented midpoint.
  auto single = aggregate_batch({trait_result("only", {4, 5, 6, 7})}, scale,
                                ScalingMethod::MinmaxClip);
  check.expect(single.essays[0].scaled == 7.0, "single-essay batch must scale to the midpoint");
  check.expect(single.degenerate, "single-essay batch must be flagged degenerate");
  std::vector<EssayScoringResult> constant;
  for (int i = 0; i < 5; ++i) constant.push_back(trait_result("c" + std::to_string(i), {6, 6, 6, 6}));
  auto flat = aggregate_batch(constant, scale, ScalingMethod::Minmax);
  for (const auto& essay : flat.essays) {
    check.expect(essay.scaled == 7.0, "constant batch must scale to the midpoint");
  }
}

void criterion_clipping_fences(Checker& check) {
  for (const auto& rows : random_batches(1000, 60)) {
    std::vector<double> means;
    for (const auto& row : rows) {
      double sum = 0.0;
      for (double v : row) sum += v;
      means.push_back(sum / 4.0);
    }
    auto [q1, q3] = quartiles(means);
    check.expect(q1 == oracle::quantile(means, 0.25), "Q1 deviates from the oracle");
    check.expect(q3 == oracle::quantile(means, 0.75), "Q3 deviates from the oracle");

    ClipResult clip = clip_outliers(means);
    check.expect(clip.v_min == q1 - 1.5 * (q3 - q1), "v_min formula violated");
    check.expect(clip.v_max == q3 + 1.5 * (q3 - q1), "v_max formula violated");
    for (double v : clip.clipped) {
      check.expect(v >= clip.v_min && v <= clip.v_max, "clipped value escapes the fences");
    }
    ClipResult again = clip_outliers(clip.clipped);
    for (std::size_t i = 0; i < clip.clipped.size(); ++i) {
      double re = std::min(std::max(clip.clipped[i], clip.v_min), clip.v_max);
      check.expect(re == clip.clipped[i], "clipping is not idempotent under its own fences");
    }
    (void)again;
    if (!check.failures.empty()) return;  // one batch's detail is enough
  }
}

void criterion_monotonicity(Checker& check) {
  ScoreScale asap = ScoreScale::integer_range(2, 12);
  ScoreScale toefl = ScoreScale::toefl11();
  for (const auto& rows : random_batches(1000, 40)) {
    std::vector<EssayScoringResult> results;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      results.push_back(trait_result("e" + std::to_string(i), rows[i]));
    }
    for (ScalingMethod method :
         {ScalingMethod::MinmaxClip, ScalingMethod::Minmax, ScalingMethod::Fixed}) {
      for (const ScoreScale& scale : {asap, toefl}) {
        BatchAggregate batch = aggregate_batch(results, scale, method);
        std::vector<std::size_t> order(batch.essays.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return batch.essays[a].trait_mean < batch.essays[b].trait_mean;
        });
        for (std::size_t k = 1; k < order.size(); ++k) {
          if (label_rank(batch.essays[order[k]].final) <
              label_rank(batch.essays[order[k - 1]].final)) {
            check.expect(false, "inversion under " + to_string(method));
            return;
          }
        }
      }
    }
  }
}

void criterion_discretization(Checker& check) {
  ScoreScale toefl = ScoreScale::toefl11();
  const std::pair<double, const char*> cases[] = {{1.0, "low"},    {2.24, "low"},
                                                  {2.25, "medium"}, {3.74, "medium"},
                                                  {3.75, "high"},   {5.0, "high"}};
  for (const auto& [value, wanted] : cases) {
    std::string got = as_label(discretize(value, toefl));
    check.expect(got == wanted, "discretize(" + std::to_string(value) + ") = " + got +
                                    ", wanted " + wanted);
  }
  for (const auto& info : asap_prompt_table()) {
    ScoreScale scale = ScoreScale::integer_range(info.min_score, info.max_score);
    for (double v = info.min_score; v <= info.max_score + 1e-9; v += 0.25) {
      double value = std::min(v, static_cast<double>(info.max_score));
      double got = as_number(discretize(value, scale));
      double wanted = oracle::round_clamped(value, info.min_score, info.max_score);
      check.expect(got == wanted, "rounding mismatch on prompt " + std::to_string(info.number));
      check.expect(got >= info.min_score && got <= info.max_score,
                   "rounded value escapes the target range");
    }
  }
}

void criterion_template_fixtures(Checker& check) {
  auto asap = testsupport::sample_asap_prompt(false);
  auto asap_excerpt = testsupport::sample_asap_prompt(true);
  auto toefl = testsupport::sample_toefl_prompt();
  auto essay = testsupport::sample_asap_essay();
  auto toefl_essay = testsupport::sample_toefl_essay();
  auto trait = testsupport::sample_trait();
  auto guidance = testsupport::sample_guidance();

  auto match = [&](const std::string& fixture, const std::string& actual) {
    if (actual != testsupport::read_fixture("templates/" + fixture)) {
      check.expect(false, "render differs from fixture " + fixture);
    }
  };
  match("decompose_asap_excerpt.txt", build_decomposition_prompt_asap(asap_excerpt)[0].content);
  match("decompose_asap_no_excerpt.txt", build_decomposition_prompt_asap(asap)[0].content);
  match("decompose_toefl.txt",
        build_decomposition_prompt_toefl(
            "Task Response",
            "Band 9: fully addresses all parts of the task with a fully developed position. "
            "Band 6: addresses all parts of the task although some parts may be more fully "
            "covered than others. Band 3: does not adequately address any part of the task.")[0]
            .content);
  match("mts_system.txt", render_mts_system(trait).content);
  match("mts_turn1_asap.txt", render_mts_turn1(asap, essay, trait).content);
  match("mts_turn1_toefl.txt", render_mts_turn1(toefl, toefl_essay, trait).content);
  match("mts_turn2.txt", render_mts_turn2(trait).content);
  match("vanilla_system_asap.txt", render_vanilla(asap, essay, asap.scale)[0].content);
  match("vanilla_user_asap.txt", render_vanilla(asap, essay, asap.scale)[1].content);
  match("vanilla_system_toefl.txt",
        render_vanilla(toefl, toefl_essay, toefl.scale)[0].content);
  match("vanilla_user_toefl.txt", render_vanilla(toefl, toefl_essay, toefl.scale)[1].content);
  match("sequential_system.txt", render_sequential(asap, essay, guidance)[0].content);
  match("sequential_user_asap.txt", render_sequential(asap, essay, guidance)[1].content);
  match("sequential_user_toefl.txt",
        render_sequential(toefl, toefl_essay, guidance)[1].content);
  match("independent_user_asap.txt", render_independent(asap, essay, trait)[1].content);
  match("independent_user_toefl.txt", render_independent(toefl, toefl_essay, trait)[1].content);

  // 100 randomized renders leave no unsubstituted placeholder behind.
  std::mt19937 rng(303);
  auto random_text = [&](int words) {
    static const char* pool[] = {"school", "essay",  "writing", "students", "ideas",
                                 "support", "claim", "grammar", "voice",    "detail"};
    std::string text;
    for (int i = 0; i < words; ++i) {
      if (i) text += " ";
      text += pool[rng() % 10];
    }
    return text;
  };
  for (int trial = 0; trial < 100; ++trial) {
    WritingPrompt prompt = rng() % 2 == 0 ? asap_excerpt : asap;
    prompt.prompt_text = random_text(8 + static_cast<int>(rng() % 20));
    prompt.rubric_guidelines = random_text(10);
    if (prompt.excerpt.has_value()) prompt.excerpt = random_text(12);
    Essay sample = essay;
    sample.text = random_text(15 + static_cast<int>(rng() % 30));
    TraitGuidance t = trait;
    t.name = random_text(2);
    t.description = random_text(6) + ".";
    t.criteria = "- 0-10: " + random_text(5) + ".";
    GuidanceSet set = guidance;

    std::vector<std::string> renders;
    renders.push_back(build_decomposition_prompt_asap(prompt)[0].content);
    renders.push_back(build_decomposition_prompt_toefl(t.name, random_text(9))[0].content);
    renders.push_back(render_mts_system(t).content);
    renders.push_back(render_mts_turn1(prompt, sample, t).content);
    renders.push_back(render_mts_turn2(t).content);
    for (const auto& message : render_vanilla(prompt, sample, prompt.scale)) {
      renders.push_back(message.content);
    }
    for (const auto& message : render_vanilla_plus(prompt, sample)) {
      renders.push_back(message.content);
    }
    for (const auto& message : render_sequential(prompt, sample, set)) {
      renders.push_back(message.content);
    }
    for (const auto& message : render_independent(prompt, sample, t)) {
      renders.push_back(message.content);
    }
    for (const auto& text : renders) {
      if (text.find("{{") != std::string::npos || text.find("}}") != std::string::npos) {
        check.expect(false, "unsubstituted placeholder in a randomized render");
        return;
      }
    }
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void criterion_replay_determinism(Checker& check) {
  auto start = std::chrono::steady_clock::now();
  testsupport::TempDir dir("acceptance_e2e");
  auto store = dir.path() / "store.jsonl";
  RunConfig config = testsupport::e2e_config(dir.path() / "run1", store);
  testsupport::build_e2e_store(config, store);

  std::ostringstream quiet;
  check.expect(cmd_score(config, quiet) == 0, "first score run failed");
  check.expect(cmd_evaluate(config, quiet) == 0, "first evaluate run failed");
  std::string results1 = slurp(config.out_dir / "results.jsonl");
  std::string report1 = slurp(config.out_dir / "reports" / "report_mts_minmax-clip.json");
  std::string table1 = slurp(config.out_dir / "reports" / "report_mts_minmax-clip.tsv");

  config.out_dir = dir.path() / "run2";
  check.expect(cmd_score(config, quiet) == 0, "second score run failed");
  check.expect(cmd_evaluate(config, quiet) == 0, "second evaluate run failed");
  check.expect(slurp(config.out_dir / "results.jsonl") == results1,
               "trait scores differ between replay runs");
  check.expect(slurp(config.out_dir / "reports" / "report_mts_minmax-clip.json") == report1,
               "QWK report differs between replay runs");
  check.expect(slurp(config.out_dir / "reports" / "report_mts_minmax-clip.tsv") == table1,
               "report table differs between replay runs");
  check.expect(!results1.empty() && !report1.empty(), "replay run produced empty outputs");

  double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  check.expect(seconds < 5.0, "runtime " + std::to_string(seconds) + "s exceeds 5s");
}

void criterion_degenerate_rule(Checker& check) {
  std::vector<EssayScoringResult> results;
  std::vector<ScoreValue> gold;
  for (int i = 0; i < 10; ++i) {
    EssayScoringResult result;
    result.essay_id = "v" + std::to_string(i);
    result.prompt_id = "asap-1";
    result.kind = PipelineKind::VanillaPlus;
    // One outlier, nine identical scores: clipping collapses the batch.
    result.direct_score = ScoreValue{i == 0 ? 10.0 : 6.0};
    results.push_back(std::move(result));
    gold.push_back(ScoreValue{static_cast<double>(2 + i)});
  }
  ScoreScale scale = ScoreScale::integer_range(2, 12);
  BatchAggregate batch = aggregate_batch(results, scale, ScalingMethod::MinmaxClip);
  check.expect(batch.degenerate, "collapsed batch not flagged degenerate");

  PromptScores scores;
  scores.prompt_id = "asap-1";
  scores.scale = scale;
  for (const auto& essay : batch.essays) scores.predicted.push_back(essay.final);
  scores.gold = gold;
  scores.degenerate = batch.degenerate;
  EvaluationReport report = evaluate_run({scores}, "vanilla-plus", "minmax-clip");
  check.expect(report.prompts[0].degenerate, "report entry lost the degenerate flag");
  check.expect(report.prompts[0].qwk == 0.0, "degenerate prompt must report QWK 0");
}

void criterion_subset_ablation(Checker& check) {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> score(0.0, 10.0);
  PromptTraitResults prompt;
  prompt.prompt_id = "asap-1";
  prompt.scale = ScoreScale::integer_range(2, 12);
  for (int i = 0; i < 16; ++i) {
    prompt.results.push_back(trait_result("e" + std::to_string(i),
                                          {score(rng), score(rng), score(rng), score(rng)}));
    prompt.gold.push_back(ScoreValue{std::floor(score(rng)) + 2});
  }
  std::vector<std::string> names{"A", "B", "C", "D"};
  const std::pair<int, std::size_t> expected[] = {{2, 6}, {3, 4}, {4, 1}};
  for (const auto& [n, count] : expected) {
    SubsetAblation ablation = ablate_trait_subsets({prompt}, names, n, ScalingMethod::MinmaxClip);
    check.expect(ablation.subsets.size() == count,
                 "C(4," + std::to_string(n) + ") must enumerate " + std::to_string(count) +
                     " subsets");
    for (std::size_t s = 0; s < ablation.subsets.size(); ++s) {
      BatchAggregate batch = aggregate_batch(prompt.results, prompt.scale,
                                             ScalingMethod::MinmaxClip, ablation.subsets[s]);
      std::vector<ScoreValue> predicted;
      for (const auto& essay : batch.essays) predicted.push_back(essay.final);
      double wanted = qwk(prompt.gold, predicted, prompt.scale);
      check.expect_near(ablation.subset_qwks[s], wanted, 1e-12,
                        "subset aggregate differs from the hand-restricted batch");
    }
  }
}

void criterion_parser_robustness(Checker& check) {
  // Every format-conforming half-point score parses back exactly.
  for (int half = 0; half <= 20; ++half) {
    double v = half / 2.0;
    std::ostringstream formatted;
    formatted << "Score: <score>" << v << "</score>";
    double parsed = parse_score_tag(formatted.str());
    check.expect(parsed == v, "round-trip failed for " + formatted.str());
  }

  struct Reject {
    const char* reply;
    ScoreParseErrorKind kind;
  };
  const Reject rejects[] = {
      {"", ScoreParseErrorKind::NoTag},
      {"score 7", ScoreParseErrorKind::NoTag},
      {"the essay deserves a 7 out of 10", ScoreParseErrorKind::NoTag},
      {"<score>7", ScoreParseErrorKind::NoTag},
      {"7</score>", ScoreParseErrorKind::NoTag},
      {"<Score>7</Score>", ScoreParseErrorKind::NoTag},
      {"[score]7[/score]", ScoreParseErrorKind::NoTag},
      {"Score: 7", ScoreParseErrorKind::NoTag},
      {"<score/>", ScoreParseErrorKind::NoTag},
      {"</score><score>", ScoreParseErrorKind::NoTag},
      {"<score>seven</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>eleven</score>", ScoreParseErrorKind::NotNumeric},
      {"<score></score>", ScoreParseErrorKind::NotNumeric},
      {"<score>   </score>", ScoreParseErrorKind::NotNumeric},
      {"<score>7/10</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>7 out of 10</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>seven.five</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>N/A</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>nan</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>inf</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>--7</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>7,5</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>score=7</score>", ScoreParseErrorKind::NotNumeric},
      {"<score>insert ONLY the numeric score (from 0 to 10) here</score>",
       ScoreParseErrorKind::NotNumeric},
      {"<score>11</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>10.5</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>-1</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>-0.5</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>100</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>42</score>", ScoreParseErrorKind::OutOfRange},
      {"<score>1e3</score>", ScoreParseErrorKind::OutOfRange},
  };
  int cases = 0;
  for (const auto& reject : rejects) {
    ++cases;
    try {
      parse_score_tag(reject.reply);
      check.expect(false, std::string("accepted malformed reply: ") + reject.reply);
    } catch (const ScoreParseError& error) {
      check.expect(error.kind() == reject.kind,
                   std::string("wrong error class for: ") + reject.reply + " (got " +
                       to_string(error.kind()) + ")");
    }
  }
  check.expect(cases >= 30, "rejection corpus must hold at least 30 cases");

  // Canonical guidance file format round-trips.
  GuidanceSet set = testsupport::sample_guidance();
  check.expect(parse_guidance_file(render_guidance_file(set)) == set,
               "guidance file round-trip failed");
  check.expect(render_guidance_file(parse_guidance_file(render_guidance_file(set))) ==
                   render_guidance_file(set),
               "guidance file render not canonical");

  // The worked examples parse into four named traits each.
  GuidanceSet asap = parse_guidance(testsupport::read_fixture("guidance/asap_p1_reply.txt"));
  check.expect(asap.traits.size() == 4, "worked ASAP example must yield 4 traits");
  check.expect(asap.traits[0].name == "Position and Thesis Clarity",
               "first ASAP trait name mismatch");
  GuidanceSet toefl = parse_guidance(testsupport::read_fixture("guidance/toefl_reply.txt"));
  check.expect(toefl.traits.size() == 4, "worked TOEFL example must yield 4 traits");
  check.expect(toefl.traits[3].name == "Grammatical Range and Accuracy",
               "fourth TOEFL trait name mismatch");
}

void criterion_split_sampling(Checker& check) {
  auto dataset = load_asap(testsupport::fixture_path("e2e/split_population.tsv"));
  const auto& essays = dataset[0].essays;
  check.expect(essays.size() == 400, "fixture population must hold 400 essays");

  DatasetSplit split = sample_test_split(essays, 0.10, 11);
  check.expect(split.sample.count == 40, "sample size must be round(0.10 * 400)");
  check.expect(std::abs(split.z) <= normal_two_sided_critical(0.05),
               "accepted sample must pass the Z-test at alpha 0.05");

  DatasetSplit again = sample_test_split(essays, 0.10, 11);
  bool same = again.test_essays.size() == split.test_essays.size();
  for (std::size_t i = 0; same && i < split.test_essays.size(); ++i) {
    same = again.test_essays[i].essay_id == split.test_essays[i].essay_id;
  }
  check.expect(same, "same seed must reproduce the same sample");
  check.expect(split.seed == again.seed, "accepted seed must be stable");
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* description;
    std::function<void(Checker&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "QWK oracle equivalence (10,000 random rating pairs, <1e-9, <10s)",
       criterion_qwk_oracle},
      {2, "aggregation chain oracle equivalence (1,000 random batches, <1e-9, midpoint rule)",
       criterion_aggregate_oracle},
      {3, "clipping fences (quartiles, exact fence formulas, idempotence)",
       criterion_clipping_fences},
      {4, "monotonicity of final scores under all three scaling methods",
       criterion_monotonicity},
      {5, "discretization thresholds and integer-range clamping", criterion_discretization},
      {6, "template golden fixtures byte-equal; no placeholder survives 100 random renders",
       criterion_template_fixtures},
      {7, "end-to-end replay determinism on the bundled fixture (<5s)",
       criterion_replay_determinism},
      {8, "degenerate-batch rule: flagged entry reports QWK 0", criterion_degenerate_rule},
      {9, "trait-subset ablation enumerates C(4,n) and matches restricted batches",
       criterion_subset_ablation},
      {10, "score-tag parser corpus and guidance parser round-trips",
       criterion_parser_robustness},
      {11, "split sampling: reproducible, round(0.10*n)-sized, Z-test passes",
       criterion_split_sampling},
  };

  int failed = 0;
  for (const auto& criterion : criteria) {
    Checker check;
    try {
      criterion.run(check);
    } catch (const std::exception& error) {
      check.failures.push_back(std::string("exception: ") + error.what());
    }
    if (check.failures.empty()) {
      std::printf("PASS  %2d. %s\n", criterion.number, criterion.description);
    } else {
      ++failed;
      std::printf("FAIL  %2d. %s\n", criterion.number, criterion.description);
      for (const auto& failure : check.failures) {
        std::printf("      - %s\n", failure.c_str());
      }
    }
  }
  if (failed > 0) std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
