#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mts/aggregation.hpp"
#include "mts/domain.hpp"
#include "mts/ingestion.hpp"
#include "mts/llm.hpp"
#include "mts/results.hpp"

namespace mts {

// Full configuration of a run, mirrored by the JSON config file. CLI flags
// override individual fields.
struct RunConfig {
  Dataset flavor = Dataset::Asap;
  std::filesystem::path dataset_path;               // ASAP tsv / TOEFL11 index
  std::optional<std::filesystem::path> essays_dir;  // TOEFL11 essay directory
  std::optional<std::filesystem::path> prompt_pack; // prompt/rubric/excerpt text files
  std::vector<std::string> prompts;                 // selection; empty = all
  PipelineKind pipeline = PipelineKind::Mts;
  ScalingMethod method = ScalingMethod::MinmaxClip;
  std::optional<std::filesystem::path> guidance_path;  // directory (ASAP) or file (TOEFL11)
  std::optional<std::filesystem::path> rubric_slices;  // TOEFL11 decomposition input

  // Exactly one backend source: a live endpoint or a replay store.
  std::string backend_url;
  std::string model_id;
  std::string api_key;                       // from the config file; env var wins
  std::string api_key_env = "MTS_API_KEY";
  std::optional<std::filesystem::path> replay_path;
  std::optional<std::filesystem::path> record_path;  // extra replay store to append to

  SamplingConfig sampling;
  int concurrency = 1;
  int retry_limit = 3;
  long seed = 0;
  std::filesystem::path out_dir = "run";
  std::optional<std::filesystem::path> split_manifest;
  double split_fraction = 0.10;
  std::optional<int> limit;  // cap essays per prompt
  bool allow_partial = false;
  bool force = false;
  int ablate_traits = 0;  // 0 = off; else n in [2, N_T]
  bool export_distribution = false;
  int distribution_bins = 20;
  std::string encoding = "utf-8";
  bool keep_entity_digits = false;
  bool include_rubric = true;  // decompose: reference the rubric guidelines
  GuidanceSource guidance_source = GuidanceSource::ChatGptGenerated;
};

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config,
                     bool redact_key = true);

// Resolves the configured backend. Replay runs forbid live endpoints and vice
// versa; the API key env var overrides any file-provided key.
std::unique_ptr<Backend> open_backend(const RunConfig& config);

// Loads the configured dataset and applies prompt selection, split manifest
// and per-prompt limit.
std::vector<PromptEssays> load_selected(const RunConfig& config);

std::filesystem::path guidance_file_path(const RunConfig& config, const std::string& prompt_id);
GuidanceSet load_guidance_for(const RunConfig& config, const std::string& prompt_id);

// Commands. Each returns a process exit code and reports progress on `out`.
int cmd_decompose(const RunConfig& config, std::ostream& out);
int cmd_score(const RunConfig& config, std::ostream& out);
int cmd_evaluate(const RunConfig& config, std::ostream& out);
int cmd_split(const RunConfig& config, std::ostream& out);
int cmd_report(const std::vector<std::filesystem::path>& report_files,
               const std::optional<std::filesystem::path>& out_path, std::ostream& out);

// Bounded worker pool; fn may run concurrently for distinct indices.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace mts
