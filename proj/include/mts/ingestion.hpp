#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mts/domain.hpp"

namespace mts {

// Rewrites anonymization markers "@TOKEN" / "@TOKEN12" (TOKEN uppercase
// alphabetic) to "{TOKEN}"; with keep_digits, to "{TOKEN12}". Idempotent.
std::string normalize_entities(const std::string& text, bool keep_digits = false);

struct ZTestResult {
  double z = 0.0;
  bool pass = false;
};

// Two-sided Z-test of a sample mean against a known population.
// z = (sample_mean - pop_mean) / (pop_std / sqrt(n)), 0 when pop_std is 0.
ZTestResult ztest_mean(double sample_mean, long n, double pop_mean, double pop_std,
                       double alpha);

// Two-sided critical value for the standard normal at significance alpha.
double normal_two_sided_critical(double alpha);

struct PopulationStats {
  double mean = 0.0;
  double stddev = 0.0;  // population form (denominator N)
  long count = 0;
};

struct SampleStats {
  double mean = 0.0;
  long count = 0;
};

struct DatasetSplit {
  std::string prompt_id;
  std::vector<Essay> test_essays;
  PopulationStats population;
  SampleStats sample;
  long seed = 0;  // seed that produced the accepted sample
  double z = 0.0;
};

// Samples round(fraction*n) essays without replacement. When the sample mean
// fails the Z-test against the population, reseeds with seed+1, ... up to
// max_retries. Reproducible: the same seed always yields the same sample.
DatasetSplit sample_test_split(const std::vector<Essay>& essays, double fraction, long seed,
                               double alpha = 0.05, int max_retries = 100);

struct SplitManifest {
  std::string prompt_id;
  long seed = 0;
  double z = 0.0;
  double fraction = 0.0;
  std::vector<std::string> essay_ids;
};

void save_split_manifest(const std::filesystem::path& path, const DatasetSplit& split,
                         double fraction);
SplitManifest load_split_manifest(const std::filesystem::path& path);

struct PromptEssays {
  WritingPrompt prompt;
  std::vector<Essay> essays;
};

// Table 1 metadata for the eight ASAP prompts.
struct AsapPromptInfo {
  int number = 0;
  Genre genre = Genre::Arg;
  int min_score = 0;
  int max_score = 0;
  int essay_count = 0;  // released essay count, informational
};

const std::array<AsapPromptInfo, 8>& asap_prompt_table();

// Loads the ASAP tab-separated release (columns essay_id, essay_set, essay,
// domain1_score). Essay text is passed through normalize_entities. Prompt
// text, rubric guidelines and excerpts are read from prompt_pack when given
// (prompt<k>.txt, rubric<k>.txt, excerpt<k>.txt). encoding: "utf-8" or
// "latin-1" (the original release).
std::vector<PromptEssays> load_asap(const std::filesystem::path& tsv_path,
                                    const std::optional<std::filesystem::path>& prompt_pack = {},
                                    const std::string& encoding = "utf-8",
                                    bool keep_entity_digits = false);

// Loads a TOEFL11 split: an index file (comma- or tab-separated rows of
// filename, prompt, label) plus a directory of plain-text essays. Labels must
// be low/medium/high. Prompt texts come from prompt_pack when given.
std::vector<PromptEssays> load_toefl11(const std::filesystem::path& index_path,
                                       const std::filesystem::path& essays_dir,
                                       const std::optional<std::filesystem::path>& prompt_pack = {});

}  // namespace mts
