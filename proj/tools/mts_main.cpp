#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mts/orchestration.hpp"

namespace {

// Flags the user actually passed; merged over the config file afterwards.
struct Overrides {
  std::optional<std::string> flavor;
  std::optional<std::string> dataset;
  std::optional<std::string> essays_dir;
  std::optional<std::string> prompt_pack;
  std::vector<std::string> prompts;
  std::optional<std::string> pipeline;
  std::optional<std::string> method;
  std::optional<std::string> guidance;
  std::optional<std::string> rubric_slices;
  std::optional<std::string> backend_url;
  std::optional<std::string> model;
  std::optional<std::string> api_key_env;
  std::optional<std::string> replay;
  std::optional<std::string> record;
  std::optional<double> temperature;
  std::optional<double> repetition_penalty;
  std::optional<int> max_tokens;
  std::optional<int> concurrency;
  std::optional<int> retry_limit;
  std::optional<long> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> split;
  std::optional<double> fraction;
  std::optional<int> limit;
  bool allow_partial = false;
  bool force = false;
  std::optional<int> ablate_traits;
  bool export_distribution = false;
  std::optional<int> bins;
  std::optional<std::string> encoding;
  bool keep_entity_digits = false;
  bool no_rubric_reference = false;
  std::optional<std::string> guidance_source;
};

void add_common_options(CLI::App* cmd, std::string& config_path, Overrides& flags) {
  cmd->add_option("-c,--config", config_path, "JSON run config; flags override its fields");
  cmd->add_option("--flavor", flags.flavor, "Dataset flavor: asap or toefl11");
  cmd->add_option("--dataset", flags.dataset, "ASAP tsv file / TOEFL11 index file");
  cmd->add_option("--essays-dir", flags.essays_dir, "TOEFL11 essay directory");
  cmd->add_option("--prompt-pack", flags.prompt_pack,
                  "Directory with prompt<k>.txt / rubric<k>.txt / excerpt<k>.txt");
  cmd->add_option("--prompts", flags.prompts, "Prompt selection, e.g. 1,2,5")->delimiter(',');
  cmd->add_option("--pipeline", flags.pipeline,
                  "mts | vanilla | vanilla-plus | sequential | independent");
  cmd->add_option("--method", flags.method, "Scaling: minmax-clip | minmax | fixed");
  cmd->add_option("--guidance", flags.guidance, "Guidance directory (or single .txt file)");
  cmd->add_option("--rubric-slices", flags.rubric_slices,
                  "TOEFL11 decompose: JSON array of {trait, slice}");
  cmd->add_option("--backend-url", flags.backend_url, "Chat-completions endpoint base url");
  cmd->add_option("--model", flags.model, "Model id sent to the endpoint");
  cmd->add_option("--api-key-env", flags.api_key_env,
                  "Environment variable holding the API key (default MTS_API_KEY)");
  cmd->add_option("--replay", flags.replay, "Replay store; forbids a live endpoint");
  cmd->add_option("--record", flags.record, "Also append transcripts to this replay store");
  cmd->add_option("--temperature", flags.temperature, "Sampling temperature (default 0.1)");
  cmd->add_option("--repetition-penalty", flags.repetition_penalty,
                  "Repetition penalty (default 1.1)");
  cmd->add_option("--max-tokens", flags.max_tokens, "Completion token cap");
  cmd->add_option("--concurrency", flags.concurrency, "In-flight request bound (default 1)");
  cmd->add_option("--retry-limit", flags.retry_limit,
                  "Attempts per malformed score reply (default 3)");
  cmd->add_option("--seed", flags.seed, "Run seed (sampling + split)");
  cmd->add_option("--out", flags.out_dir, "Run output directory");
  cmd->add_option("--split", flags.split, "Split manifest file or directory");
  cmd->add_option("--fraction", flags.fraction, "Split fraction (default 0.10)");
  cmd->add_option("--limit", flags.limit, "Cap essays per prompt");
  cmd->add_flag("--allow-partial", flags.allow_partial, "Evaluate despite incomplete essays");
  cmd->add_flag("--force", flags.force, "Redo work even when outputs exist");
  cmd->add_option("--ablate-traits", flags.ablate_traits, "Trait-subset ablation size (2..4)");
  cmd->add_flag("--export-distribution", flags.export_distribution,
                "Write per-prompt score distribution tables");
  cmd->add_option("--bins", flags.bins, "Distribution histogram bins (default 20)");
  cmd->add_option("--encoding", flags.encoding, "Dataset encoding: utf-8 or latin-1");
  cmd->add_flag("--keep-entity-digits", flags.keep_entity_digits,
                "Keep indices on anonymization markers ({PERSON1})");
  cmd->add_flag("--no-rubric-reference", flags.no_rubric_reference,
                "Decompose without citing the rubric guidelines");
  cmd->add_option("--guidance-source", flags.guidance_source,
                  "chatgpt-generated | self-generated | file");
}

mts::RunConfig merge(const std::string& config_path, const Overrides& flags) {
  mts::RunConfig config;
  if (!config_path.empty()) config = mts::load_run_config(config_path);
  if (flags.flavor) config.flavor = mts::dataset_from_string(*flags.flavor);
  if (flags.dataset) config.dataset_path = *flags.dataset;
  if (flags.essays_dir) config.essays_dir = *flags.essays_dir;
  if (flags.prompt_pack) config.prompt_pack = *flags.prompt_pack;
  if (!flags.prompts.empty()) config.prompts = flags.prompts;
  if (flags.pipeline) config.pipeline = mts::pipeline_kind_from_string(*flags.pipeline);
  if (flags.method) config.method = mts::scaling_method_from_string(*flags.method);
  if (flags.guidance) config.guidance_path = *flags.guidance;
  if (flags.rubric_slices) config.rubric_slices = *flags.rubric_slices;
  if (flags.backend_url) config.backend_url = *flags.backend_url;
  if (flags.model) config.model_id = *flags.model;
  if (flags.api_key_env) config.api_key_env = *flags.api_key_env;
  if (flags.replay) config.replay_path = *flags.replay;
  if (flags.record) config.record_path = *flags.record;
  if (flags.temperature) config.sampling.temperature = *flags.temperature;
  if (flags.repetition_penalty) config.sampling.repetition_penalty = *flags.repetition_penalty;
  if (flags.max_tokens) config.sampling.max_tokens = *flags.max_tokens;
  if (flags.concurrency) config.concurrency = *flags.concurrency;
  if (flags.retry_limit) config.retry_limit = *flags.retry_limit;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.split) config.split_manifest = *flags.split;
  if (flags.fraction) config.split_fraction = *flags.fraction;
  if (flags.limit) config.limit = *flags.limit;
  if (flags.allow_partial) config.allow_partial = true;
  if (flags.force) config.force = true;
  if (flags.ablate_traits) config.ablate_traits = *flags.ablate_traits;
  if (flags.export_distribution) config.export_distribution = true;
  if (flags.bins) config.distribution_bins = *flags.bins;
  if (flags.encoding) config.encoding = *flags.encoding;
  if (flags.keep_entity_digits) config.keep_entity_digits = true;
  if (flags.no_rubric_reference) config.include_rubric = false;
  if (flags.guidance_source) {
    config.guidance_source = mts::guidance_source_from_string(*flags.guidance_source);
  }
  if (config.sampling.model_id.empty()) config.sampling.model_id = config.model_id;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot multi-trait essay scoring pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides flags;

  CLI::App* decompose =
      app.add_subcommand("decompose", "Generate trait guidance from rubric guidelines");
  CLI::App* score = app.add_subcommand("score", "Run a scoring pipeline over essays");
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Aggregate, scale and report QWK for a scored run");
  CLI::App* split = app.add_subcommand("split", "Sample per-prompt test splits (Z-tested)");
  for (CLI::App* cmd : {decompose, score, evaluate, split}) {
    add_common_options(cmd, config_path, flags);
  }

  CLI::App* report = app.add_subcommand("report", "Merge evaluation reports into one table");
  std::vector<std::string> report_files;
  std::string report_out;
  report->add_option("reports", report_files, "report_*.json files")->required();
  report->add_option("--out", report_out, "Write the merged table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::vector<std::filesystem::path> paths(report_files.begin(), report_files.end());
      std::optional<std::filesystem::path> out_path;
      if (!report_out.empty()) out_path = report_out;
      return mts::cmd_report(paths, out_path, std::cout);
    }
    mts::RunConfig config = merge(config_path, flags);
    if (decompose->parsed()) return mts::cmd_decompose(config, std::cout);
    if (score->parsed()) return mts::cmd_score(config, std::cout);
    if (evaluate->parsed()) return mts::cmd_evaluate(config, std::cout);
    if (split->parsed()) return mts::cmd_split(config, std::cout);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
