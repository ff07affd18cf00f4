#include <doctest.h>

#include <random>

#include "mts/domain.hpp"
#include "test_support.hpp"

using namespace mts;

TEST_SUITE("domain") {

TEST_CASE("score scale factories enforce ordering") {
  CHECK_THROWS_AS(ScoreScale::integer_range(5, 5), ValidationError);
  CHECK_THROWS_AS(ScoreScale::integer_range(5, 2), ValidationError);
  ScoreScale scale = ScoreScale::integer_range(2, 12);
  CHECK(scale.min == 2);
  CHECK(scale.max == 12);

  CHECK_THROWS_AS(ScoreScale::ordinal_labels(1, 5, {"a", "b", "c"}, {3.0, 2.0}),
                  ValidationError);
  CHECK_THROWS_AS(ScoreScale::ordinal_labels(1, 5, {"a", "b", "c"}, {2.0}), ValidationError);
  CHECK_THROWS_AS(ScoreScale::ordinal_labels(1, 5, {"a", "b", "c"}, {0.5, 2.0}),
                  ValidationError);
}

TEST_CASE("randomly generated violating scales are rejected") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  int rejected = 0;
  const int trials = 300;
  for (int i = 0; i < trials; ++i) {
    double a = value(rng);
    double b = a - std::abs(value(rng)) - 0.001;  // guaranteed b < a
    try {
      ScoreScale::ordinal_labels(a, b, {"x", "y", "z"}, {a - 1.0, a - 0.5});
    } catch (const ValidationError&) {
      ++rejected;
    }
  }
  CHECK(rejected == trials);

  rejected = 0;
  for (int i = 0; i < trials; ++i) {
    double t0 = value(rng);
    double t1 = t0 - std::abs(value(rng)) - 0.001;  // out-of-order thresholds
    try {
      ScoreScale::ordinal_labels(-100.0, 100.0, {"x", "y", "z"}, {t0, t1});
    } catch (const ValidationError&) {
      ++rejected;
    }
  }
  CHECK(rejected == trials);
}

TEST_CASE("toefl11 scale carries the published thresholds") {
  ScoreScale scale = ScoreScale::toefl11();
  CHECK(scale.min == 1.0);
  CHECK(scale.max == 5.0);
  REQUIRE(scale.thresholds.size() == 2);
  CHECK(scale.thresholds[0] == 2.25);
  CHECK(scale.thresholds[1] == 3.75);
  CHECK(scale.labels == std::vector<std::string>{"low", "medium", "high"});
}

TEST_CASE("validate_gold") {
  ScoreScale asap1 = ScoreScale::integer_range(2, 12);
  CHECK(validate_gold(ScoreValue{7.0}, asap1));
  CHECK_FALSE(validate_gold(ScoreValue{1.0}, asap1));
  CHECK_FALSE(validate_gold(ScoreValue{7.5}, asap1));
  CHECK_FALSE(validate_gold(ScoreValue{std::string("medium")}, asap1));

  ScoreScale toefl = ScoreScale::toefl11();
  CHECK(validate_gold(ScoreValue{std::string("medium")}, toefl));
  CHECK_FALSE(validate_gold(ScoreValue{std::string("mid")}, toefl));
  CHECK_FALSE(validate_gold(ScoreValue{3.0}, toefl));
}

TEST_CASE("validate_guidance_set names the violation") {
  GuidanceSet set = testsupport::sample_guidance();
  CHECK_NOTHROW(validate_guidance_set(set));

  GuidanceSet three = set;
  three.traits.pop_back();
  CHECK_THROWS_WITH_AS(validate_guidance_set(three),
                       "wrong trait count: expected 4, got 3", ValidationError);

  GuidanceSet duplicate = set;
  duplicate.traits[1].name = "Task Response";
  CHECK_THROWS_WITH_AS(validate_guidance_set(duplicate),
                       "duplicate trait name: Task Response", ValidationError);

  GuidanceSet empty_criteria = set;
  empty_criteria.traits[2].criteria = "";
  CHECK_THROWS_AS(validate_guidance_set(empty_criteria), ValidationError);

  GuidanceSet blank_line = set;
  blank_line.traits[0].criteria = "- 0-2: weak.\n\n- 9-10: strong.";
  CHECK_THROWS_AS(validate_guidance_set(blank_line), ValidationError);

  GuidanceSet no_scale = set;
  no_scale.traits[0].criteria = "Strong essays score high, weak ones score low.";
  CHECK_THROWS_AS(validate_guidance_set(no_scale), ValidationError);
}

TEST_CASE("prompt invariants") {
  WritingPrompt prompt = testsupport::sample_asap_prompt(true);
  CHECK_NOTHROW(validate_prompt(prompt));

  WritingPrompt missing_excerpt = prompt;
  missing_excerpt.excerpt.reset();
  CHECK_THROWS_AS(validate_prompt(missing_excerpt), ValidationError);

  WritingPrompt stray_excerpt = testsupport::sample_asap_prompt(false);
  stray_excerpt.excerpt = "not allowed here";
  CHECK_THROWS_AS(validate_prompt(stray_excerpt), ValidationError);

  WritingPrompt no_rubric = prompt;
  no_rubric.rubric_guidelines.clear();
  CHECK_THROWS_AS(validate_prompt(no_rubric), ValidationError);
}

TEST_CASE("essay invariants") {
  ScoreScale scale = ScoreScale::integer_range(2, 12);
  Essay essay = testsupport::sample_asap_essay();
  CHECK_NOTHROW(validate_essay(essay, scale));
  essay.gold = ScoreValue{42.0};
  CHECK_THROWS_AS(validate_essay(essay, scale), ValidationError);
  essay.gold.reset();
  essay.text.clear();
  CHECK_THROWS_AS(validate_essay(essay, scale), ValidationError);
}

TEST_CASE("guidance file round-trips byte-exactly") {
  GuidanceSet set = testsupport::sample_guidance();
  std::string rendered = render_guidance_file(set);
  GuidanceSet parsed = parse_guidance_file(rendered);
  CHECK(parsed == set);
  CHECK(render_guidance_file(parsed) == rendered);

  testsupport::TempDir dir("guidance");
  auto path = dir.path() / "set.guidance.txt";
  save_guidance_file(path, set);
  CHECK(load_guidance_file(path) == set);
}

TEST_CASE("guidance file round-trip holds for random valid sets") {
  std::mt19937 rng(11);
  auto word = [&]() {
    static const char* words[] = {"Focus", "Clarity", "Voice", "Logic", "Detail",
                                  "Balance", "Precision", "Flow"};
    return std::string(words[rng() % 8]);
  };
  for (int trial = 0; trial < 50; ++trial) {
    GuidanceSet set;
    set.source = GuidanceSource::File;
    set.prompt_id = "asap-" + std::to_string(1 + rng() % 8);
    for (int t = 0; t < 4; ++t) {
      TraitGuidance trait;
      trait.name = word() + " " + word() + " " + std::to_string(t);  // distinct
      trait.description = "Covers " + word() + " and " + word() + ".";
      int bands = 2 + static_cast<int>(rng() % 3);
      for (int b = 0; b < bands; ++b) {
        if (b > 0) trait.criteria += "\n";
        trait.criteria += "- " + std::to_string(b * 3) + "-" + std::to_string(b * 3 + 2) + ": " +
                          word() + " " + word() + ".";
      }
      trait.criteria += "\n- 9-10: " + word() + ".";
      set.traits.push_back(std::move(trait));
    }
    validate_guidance_set(set);
    std::string rendered = render_guidance_file(set);
    CHECK(parse_guidance_file(rendered) == set);
    CHECK(render_guidance_file(parse_guidance_file(rendered)) == rendered);
  }
}

TEST_CASE("trait score vector lookups and validation") {
  GuidanceSet guidance = testsupport::sample_guidance();
  TraitScoreVector vector;
  vector.essay_id = "e1";
  for (const auto& trait : guidance.traits) vector.scores.push_back({trait.name, 7.0});
  CHECK_NOTHROW(validate_trait_scores(vector, guidance));
  CHECK(vector.score_for("Lexical Resource") == 7.0);
  CHECK_FALSE(vector.score_for("Unknown").has_value());

  vector.scores[1].score = 11.0;
  CHECK_THROWS_AS(validate_trait_scores(vector, guidance), ValidationError);
  vector.scores.pop_back();
  vector.scores[1].score = 7.0;
  CHECK_THROWS_AS(validate_trait_scores(vector, guidance), ValidationError);
}

}  // TEST_SUITE
