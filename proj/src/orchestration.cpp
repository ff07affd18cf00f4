#include "mts/orchestration.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mts/evaluation.hpp"
#include "mts/guidance.hpp"
#include "mts/ingestion.hpp"
#include "mts/pipelines.hpp"

namespace mts {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << content;
}

std::optional<std::filesystem::path> path_or_null(const json& value, const std::string& key) {
  if (!value.contains(key) || value.at(key).is_null()) return std::nullopt;
  return std::filesystem::path(value.at(key).get<std::string>());
}

json path_json(const std::optional<std::filesystem::path>& path) {
  return path.has_value() ? json(path->string()) : json();
}

}  // namespace

void save_run_config(const std::filesystem::path& path, const RunConfig& config,
                     bool redact_key) {
  json value;
  value["flavor"] = to_string(config.flavor);
  value["dataset_path"] = config.dataset_path.string();
  value["essays_dir"] = path_json(config.essays_dir);
  value["prompt_pack"] = path_json(config.prompt_pack);
  value["prompts"] = config.prompts;
  value["pipeline"] = to_string(config.pipeline);
  value["method"] = to_string(config.method);
  value["guidance_path"] = path_json(config.guidance_path);
  value["rubric_slices"] = path_json(config.rubric_slices);
  value["backend_url"] = config.backend_url;
  value["model_id"] = config.model_id;
  value["api_key"] = redact_key ? "" : config.api_key;  // the key never reaches outputs
  value["api_key_env"] = config.api_key_env;
  value["replay_path"] = path_json(config.replay_path);
  value["record_path"] = path_json(config.record_path);
  value["sampling"] = {
      {"model_id", config.sampling.model_id},
      {"temperature", config.sampling.temperature},
      {"repetition_penalty", config.sampling.repetition_penalty.has_value()
                                 ? json(*config.sampling.repetition_penalty)
                                 : json()},
      {"seed", config.sampling.seed.has_value() ? json(*config.sampling.seed) : json()},
      {"max_tokens",
       config.sampling.max_tokens.has_value() ? json(*config.sampling.max_tokens) : json()},
  };
  value["concurrency"] = config.concurrency;
  value["retry_limit"] = config.retry_limit;
  value["seed"] = config.seed;
  value["out_dir"] = config.out_dir.string();
  value["split_manifest"] = path_json(config.split_manifest);
  value["split_fraction"] = config.split_fraction;
  value["limit"] = config.limit.has_value() ? json(*config.limit) : json();
  value["allow_partial"] = config.allow_partial;
  value["force"] = config.force;
  value["ablate_traits"] = config.ablate_traits;
  value["export_distribution"] = config.export_distribution;
  value["distribution_bins"] = config.distribution_bins;
  value["encoding"] = config.encoding;
  value["keep_entity_digits"] = config.keep_entity_digits;
  value["include_rubric"] = config.include_rubric;
  value["guidance_source"] = to_string(config.guidance_source);
  write_text(path, value.dump(2) + "\n");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json value;
  try {
    value = json::parse(read_text(path), nullptr, true, true);
  } catch (const json::exception& error) {
    throw ConfigError("config " + path.string() + ": " + error.what());
  }
  RunConfig config;
  if (value.contains("flavor")) config.flavor = dataset_from_string(value.at("flavor"));
  if (value.contains("dataset_path")) {
    config.dataset_path = value.at("dataset_path").get<std::string>();
  }
  config.essays_dir = path_or_null(value, "essays_dir");
  config.prompt_pack = path_or_null(value, "prompt_pack");
  if (value.contains("prompts")) config.prompts = value.at("prompts").get<std::vector<std::string>>();
  if (value.contains("pipeline")) {
    config.pipeline = pipeline_kind_from_string(value.at("pipeline"));
  }
  if (value.contains("method")) config.method = scaling_method_from_string(value.at("method"));
  config.guidance_path = path_or_null(value, "guidance_path");
  config.rubric_slices = path_or_null(value, "rubric_slices");
  if (value.contains("backend_url")) config.backend_url = value.at("backend_url");
  if (value.contains("model_id")) config.model_id = value.at("model_id");
  if (value.contains("api_key")) config.api_key = value.at("api_key");
  if (value.contains("api_key_env")) config.api_key_env = value.at("api_key_env");
  config.replay_path = path_or_null(value, "replay_path");
  config.record_path = path_or_null(value, "record_path");
  if (value.contains("sampling")) {
    const json& sampling = value.at("sampling");
    config.sampling.model_id = sampling.value("model_id", std::string{});
    config.sampling.temperature = sampling.value("temperature", 0.1);
    if (sampling.contains("repetition_penalty") && !sampling.at("repetition_penalty").is_null()) {
      config.sampling.repetition_penalty = sampling.at("repetition_penalty").get<double>();
    }
    if (sampling.contains("seed") && !sampling.at("seed").is_null()) {
      config.sampling.seed = sampling.at("seed").get<long>();
    }
    if (sampling.contains("max_tokens") && !sampling.at("max_tokens").is_null()) {
      config.sampling.max_tokens = sampling.at("max_tokens").get<int>();
    }
  }
  if (value.contains("concurrency")) config.concurrency = value.at("concurrency");
  if (value.contains("retry_limit")) config.retry_limit = value.at("retry_limit");
  if (value.contains("seed")) config.seed = value.at("seed");
  if (value.contains("out_dir")) config.out_dir = value.at("out_dir").get<std::string>();
  config.split_manifest = path_or_null(value, "split_manifest");
  if (value.contains("split_fraction")) config.split_fraction = value.at("split_fraction");
  if (value.contains("limit") && !value.at("limit").is_null()) {
    config.limit = value.at("limit").get<int>();
  }
  if (value.contains("allow_partial")) config.allow_partial = value.at("allow_partial");
  if (value.contains("force")) config.force = value.at("force");
  if (value.contains("ablate_traits")) config.ablate_traits = value.at("ablate_traits");
  if (value.contains("export_distribution")) {
    config.export_distribution = value.at("export_distribution");
  }
  if (value.contains("distribution_bins")) config.distribution_bins = value.at("distribution_bins");
  if (value.contains("encoding")) config.encoding = value.at("encoding");
  if (value.contains("keep_entity_digits")) config.keep_entity_digits = value.at("keep_entity_digits");
  if (value.contains("include_rubric")) config.include_rubric = value.at("include_rubric");
  if (value.contains("guidance_source")) {
    config.guidance_source = guidance_source_from_string(value.at("guidance_source"));
  }
  return config;
}

std::unique_ptr<Backend> open_backend(const RunConfig& config) {
  bool has_live = !config.backend_url.empty();
  bool has_replay = config.replay_path.has_value();
  if (has_live && has_replay) {
    throw ConfigError("replay runs forbid live endpoints: configure exactly one backend");
  }
  if (!has_live && !has_replay) {
    throw ConfigError("no backend configured: set a backend url or a replay store");
  }
  if (has_replay) {
    ReplayStore store = ReplayStore::load(*config.replay_path);
    if (store.duplicates_overwritten() > 0) {
      std::cerr << "warning: replay store " << config.replay_path->string() << " had "
                << store.duplicates_overwritten()
                << " duplicate request key(s); latest record wins\n";
    }
    return make_replay_backend(std::move(store));
  }
  HttpBackendConfig http;
  http.base_url = config.backend_url;
  http.api_key = config.api_key;
  if (const char* env_key = std::getenv(config.api_key_env.c_str());
      env_key != nullptr && *env_key != '\0') {
    http.api_key = env_key;  // environment overrides the config file
  }
  return make_http_backend(std::move(http));
}

namespace {

SamplingConfig effective_sampling(const RunConfig& config) {
  SamplingConfig sampling = config.sampling;
  if (sampling.model_id.empty()) sampling.model_id = config.model_id;
  if (!sampling.seed.has_value()) sampling.seed = config.seed;
  return sampling;
}

int prompt_number(const std::string& prompt_id) {
  auto dash = prompt_id.rfind('-');
  if (dash == std::string::npos) throw ValidationError("malformed prompt id: " + prompt_id);
  try {
    return std::stoi(prompt_id.substr(dash + 1));
  } catch (const std::exception&) {
    throw ValidationError("malformed prompt id: " + prompt_id);
  }
}

std::string normalize_prompt_selector(const std::string& selector, Dataset flavor) {
  std::string prefix = flavor == Dataset::Asap ? "asap-" : "toefl-";
  if (selector.rfind(prefix, 0) == 0) return selector;
  return prefix + selector;
}

ScoreScale scale_for_prompt(Dataset flavor, const std::string& prompt_id) {
  if (flavor == Dataset::Toefl11) return ScoreScale::toefl11();
  int number = prompt_number(prompt_id);
  if (number < 1 || number > 8) throw ValidationError("unknown ASAP prompt: " + prompt_id);
  const AsapPromptInfo& info = asap_prompt_table()[static_cast<std::size_t>(number - 1)];
  return ScoreScale::integer_range(info.min_score, info.max_score);
}

std::map<std::string, SplitManifest> load_split_manifests(const std::filesystem::path& path) {
  std::map<std::string, SplitManifest> manifests;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".txt") {
        SplitManifest manifest = load_split_manifest(entry.path());
        manifests[manifest.prompt_id] = std::move(manifest);
      }
    }
  } else {
    SplitManifest manifest = load_split_manifest(path);
    manifests[manifest.prompt_id] = std::move(manifest);
  }
  return manifests;
}

}  // namespace

std::vector<PromptEssays> load_selected(const RunConfig& config) {
  std::vector<PromptEssays> dataset;
  if (config.flavor == Dataset::Asap) {
    dataset = load_asap(config.dataset_path, config.prompt_pack, config.encoding,
                        config.keep_entity_digits);
  } else {
    if (!config.essays_dir.has_value()) {
      throw ConfigError("TOEFL11 runs need --essays-dir");
    }
    dataset = load_toefl11(config.dataset_path, *config.essays_dir, config.prompt_pack);
  }

  if (!config.prompts.empty()) {
    std::vector<std::string> wanted;
    for (const auto& selector : config.prompts) {
      wanted.push_back(normalize_prompt_selector(selector, config.flavor));
    }
    std::vector<PromptEssays> filtered;
    for (auto& entry : dataset) {
      if (std::find(wanted.begin(), wanted.end(), entry.prompt.prompt_id) != wanted.end()) {
        filtered.push_back(std::move(entry));
      }
    }
    for (const auto& id : wanted) {
      bool found = std::any_of(filtered.begin(), filtered.end(),
                               [&](const PromptEssays& e) { return e.prompt.prompt_id == id; });
      if (!found) throw ConfigError("prompt " + id + " not present in the dataset");
    }
    dataset = std::move(filtered);
  }

  if (config.split_manifest.has_value()) {
    auto manifests = load_split_manifests(*config.split_manifest);
    for (auto& entry : dataset) {
      auto it = manifests.find(entry.prompt.prompt_id);
      if (it == manifests.end()) {
        throw ConfigError("no split manifest for prompt " + entry.prompt.prompt_id);
      }
      std::vector<Essay> kept;
      for (const auto& id : it->second.essay_ids) {
        auto essay = std::find_if(entry.essays.begin(), entry.essays.end(),
                                  [&](const Essay& e) { return e.essay_id == id; });
        if (essay == entry.essays.end()) {
          throw ConfigError("split manifest references unknown essay " + id + " in prompt " +
                            entry.prompt.prompt_id);
        }
        kept.push_back(*essay);
      }
      entry.essays = std::move(kept);
    }
  }

  if (config.limit.has_value()) {
    for (auto& entry : dataset) {
      if (static_cast<int>(entry.essays.size()) > *config.limit) {
        entry.essays.resize(static_cast<std::size_t>(*config.limit));
      }
    }
  }
  return dataset;
}

std::filesystem::path guidance_file_path(const RunConfig& config, const std::string& prompt_id) {
  std::filesystem::path base =
      config.guidance_path.value_or(config.out_dir / "guidance");
  if (base.extension() == ".txt") return base;  // single-file mode
  std::string name = config.flavor == Dataset::Toefl11 ? std::string(kSharedPromptId)
                                                       : prompt_id;
  return base / (name + ".guidance.txt");
}

GuidanceSet load_guidance_for(const RunConfig& config, const std::string& prompt_id) {
  std::filesystem::path path = guidance_file_path(config, prompt_id);
  GuidanceSet set = load_guidance_file(path);
  validate_guidance_set(set, static_cast<int>(set.traits.size()));
  return set;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  int pool = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (pool == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::exception_ptr error;
  std::mutex error_mutex;
  threads.reserve(static_cast<std::size_t>(pool));
  for (int t = 0; t < pool; ++t) {
    threads.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  if (error) std::rethrow_exception(error);
}

// --- decompose ---------------------------------------------------------------

int cmd_decompose(const RunConfig& config, std::ostream& out) {
  std::filesystem::create_directories(config.out_dir);
  save_run_config(config.out_dir / "config.json", config);
  auto backend = open_backend(config);
  SamplingConfig sampling = effective_sampling(config);
  TranscriptRecorder recorder(config.out_dir / "transcripts.jsonl");

  int failures = 0;
  auto emit = [&](const std::string& prompt_id,
                  const std::function<GuidanceSet()>& generate) {
    std::filesystem::path path = guidance_file_path(config, prompt_id);
    if (std::filesystem::exists(path) && !config.force) {
      out << prompt_id << ": guidance exists at " << path.string() << ", skipping (use --force)\n";
      return;
    }
    try {
      GuidanceSet set = generate();
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      save_guidance_file(path, set);
      out << prompt_id << ": parsed " << set.traits.size() << " traits -> " << path.string()
          << "\n";
      for (const auto& trait : set.traits) out << "  - " << trait.name << "\n";
    } catch (const GuidanceParseError& error) {
      ++failures;
      std::filesystem::path raw = config.out_dir / "raw" / (prompt_id + ".reply.txt");
      write_text(raw, error.raw_reply());
      out << prompt_id << ": parse failed (" << error.what() << "); raw reply kept at "
          << raw.string() << " for manual repair\n";
    } catch (const Error& error) {
      ++failures;
      out << prompt_id << ": failed: " << error.what() << "\n";
    }
  };

  if (config.flavor == Dataset::Toefl11) {
    if (!config.rubric_slices.has_value()) {
      throw ConfigError("TOEFL11 decompose needs --rubric-slices");
    }
    auto slices = load_rubric_slices(*config.rubric_slices);
    emit(std::string(kSharedPromptId), [&]() {
      return generate_guidance_toefl(slices, *backend, sampling, config.guidance_source,
                                     &recorder);
    });
  } else {
    auto dataset = load_selected(config);
    for (const auto& entry : dataset) {
      emit(entry.prompt.prompt_id, [&]() {
        return generate_guidance_asap(entry.prompt, *backend, sampling, config.guidance_source,
                                      config.include_rubric, &recorder);
      });
    }
  }
  return failures == 0 ? 0 : 1;
}

// --- score -------------------------------------------------------------------

int cmd_score(const RunConfig& config, std::ostream& out) {
  std::filesystem::create_directories(config.out_dir);
  save_run_config(config.out_dir / "config.json", config);
  auto dataset = load_selected(config);
  auto backend = open_backend(config);
  SamplingConfig sampling = effective_sampling(config);
  TranscriptRecorder recorder(config.out_dir / "transcripts.jsonl");

  std::map<std::string, GuidanceSet> guidance;
  if (is_trait_pipeline(config.pipeline)) {
    for (const auto& entry : dataset) {
      const std::string& prompt_id = entry.prompt.prompt_id;
      auto [it, inserted] = guidance.emplace(prompt_id, load_guidance_for(config, prompt_id));
      // Snapshot the guidance into the run directory for provenance.
      std::string name = config.flavor == Dataset::Toefl11 ? std::string(kSharedPromptId)
                                                           : prompt_id;
      std::filesystem::path snapshot = config.out_dir / "guidance" / (name + ".guidance.txt");
      if (inserted && guidance_file_path(config, prompt_id) != snapshot) {
        std::filesystem::create_directories(snapshot.parent_path());
        save_guidance_file(snapshot, it->second);
      }
    }
  }

  // Resume: completed essays in an existing results file are not re-scored.
  std::filesystem::path results_path = config.out_dir / "results.jsonl";
  std::map<std::string, EssayScoringResult> existing;
  if (std::filesystem::exists(results_path) && !config.force) {
    std::istringstream in(read_text(results_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      EssayScoringResult result;
      try {
        result = deserialize_result(line);
      } catch (const std::exception&) {
        continue;  // a kill mid-append leaves a truncated line; just re-score it
      }
      if (result.kind == config.pipeline && result.complete()) {
        existing.emplace(result.essay_id, std::move(result));
      }
    }
  }

  struct Task {
    const WritingPrompt* prompt;
    const Essay* essay;
    const GuidanceSet* guidance;
    std::size_t slot;
  };
  std::size_t total = 0;
  for (const auto& entry : dataset) total += entry.essays.size();
  std::vector<EssayScoringResult> results(total);
  std::vector<Task> pending;
  std::size_t slot = 0;
  std::size_t reused = 0;
  for (const auto& entry : dataset) {
    const GuidanceSet* set = nullptr;
    if (auto it = guidance.find(entry.prompt.prompt_id); it != guidance.end()) set = &it->second;
    for (const auto& essay : entry.essays) {
      if (auto it = existing.find(essay.essay_id); it != existing.end()) {
        results[slot] = it->second;
        ++reused;
      } else {
        pending.push_back({&entry.prompt, &essay, set, slot});
      }
      ++slot;
    }
  }

  std::ofstream append(results_path, std::ios::binary | std::ios::app);
  if (!append) throw IoError("cannot write results: " + results_path.string());
  std::mutex write_mutex;
  parallel_for(pending.size(), config.concurrency, [&](std::size_t i) {
    const Task& task = pending[i];
    RunContext ctx{*backend, sampling, &recorder, config.retry_limit};
    EssayScoringResult result =
        run_pipeline(config.pipeline, *task.essay, *task.prompt, task.guidance, ctx);
    {
      // Incremental persistence; a killed run resumes from here.
      std::scoped_lock lock(write_mutex);
      append << serialize_result(result) << "\n";
      append.flush();
    }
    results[task.slot] = std::move(result);
  });
  append.close();

  // Deterministic final file: dataset order, independent of completion order.
  std::string canonical;
  std::size_t incomplete = 0;
  for (const auto& result : results) {
    canonical += serialize_result(result);
    canonical += "\n";
    if (!result.complete()) ++incomplete;
  }
  std::filesystem::path tmp = results_path;
  tmp += ".tmp";
  write_text(tmp, canonical);
  std::filesystem::rename(tmp, results_path);

  if (config.record_path.has_value()) {
    std::ofstream store(*config.record_path, std::ios::binary | std::ios::app);
    if (!store) throw IoError("cannot append to replay store: " + config.record_path->string());
    store << read_text(config.out_dir / "transcripts.jsonl");
  }

  std::size_t index = 0;
  for (const auto& entry : dataset) {
    std::size_t failed = 0;
    for (std::size_t i = 0; i < entry.essays.size(); ++i, ++index) {
      if (!results[index].complete()) ++failed;
    }
    out << entry.prompt.prompt_id << ": scored " << (entry.essays.size() - failed) << "/"
        << entry.essays.size();
    if (reused > 0) out << " (" << reused << " reused across run)";
    if (failed > 0) out << ", " << failed << " incomplete";
    out << "\n";
  }
  out << "results: " << results_path.string() << "\n";
  return incomplete == 0 ? 0 : 2;
}

// --- evaluate ----------------------------------------------------------------

namespace {

json report_to_json(const EvaluationReport& report, Dataset flavor) {
  json value;
  value["pipeline"] = report.pipeline;
  value["method"] = report.method;
  value["dataset"] = to_string(flavor);
  value["prompts"] = json::array();
  for (const auto& prompt : report.prompts) {
    value["prompts"].push_back({{"prompt_id", prompt.prompt_id},
                                {"qwk", prompt.qwk},
                                {"essay_count", prompt.essay_count},
                                {"degenerate", prompt.degenerate}});
  }
  value["average_qwk"] = report.average_qwk;
  return value;
}

EvaluationReport report_from_json(const json& value) {
  EvaluationReport report;
  report.pipeline = value.at("pipeline").get<std::string>();
  report.method = value.at("method").get<std::string>();
  for (const auto& prompt : value.at("prompts")) {
    report.prompts.push_back({prompt.at("prompt_id").get<std::string>(),
                              prompt.at("qwk").get<double>(),
                              prompt.at("essay_count").get<int>(),
                              prompt.at("degenerate").get<bool>()});
  }
  report.average_qwk = value.at("average_qwk").get<double>();
  return report;
}

json batch_to_json(const std::string& prompt_id, const BatchAggregate& batch) {
  json essays = json::array();
  for (const auto& essay : batch.essays) {
    essays.push_back({{"essay_id", essay.essay_id},
                      {"trait_mean", essay.trait_mean},
                      {"clipped", essay.clipped},
                      {"scaled", essay.scaled},
                      {"final", is_label(essay.final) ? json(as_label(essay.final))
                                                      : json(as_number(essay.final))}});
  }
  return json{{"prompt_id", prompt_id},
              {"method", to_string(batch.method)},
              {"degenerate", batch.degenerate},
              {"stats",
               {{"q1", batch.stats.q1},
                {"q3", batch.stats.q3},
                {"v_min", batch.stats.v_min},
                {"v_max", batch.stats.v_max},
                {"y_min", batch.stats.y_min},
                {"y_max", batch.stats.y_max}}},
              {"essays", essays}};
}

}  // namespace

int cmd_evaluate(const RunConfig& config, std::ostream& out) {
  std::filesystem::path results_path = config.out_dir / "results.jsonl";
  if (!std::filesystem::exists(results_path)) {
    throw ConfigError("no results file at " + results_path.string() + "; run `score` first");
  }

  std::vector<std::string> prompt_order;
  std::map<std::string, std::vector<EssayScoringResult>> by_prompt;
  {
    std::istringstream in(read_text(results_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      EssayScoringResult result = deserialize_result(line);
      if (by_prompt.find(result.prompt_id) == by_prompt.end()) {
        prompt_order.push_back(result.prompt_id);
      }
      by_prompt[result.prompt_id].push_back(std::move(result));
    }
  }
  if (prompt_order.empty()) throw ConfigError("results file is empty");

  PipelineKind kind = by_prompt.begin()->second.front().kind;
  std::vector<PromptScores> scored;
  std::vector<PromptTraitResults> trait_data;
  json aggregates = json::array();

  for (const auto& prompt_id : prompt_order) {
    auto& results = by_prompt[prompt_id];
    std::vector<EssayScoringResult> complete;
    std::string dropped;
    for (auto& result : results) {
      if (result.kind != kind) {
        throw ConfigError("results file mixes pipelines; evaluate one run at a time");
      }
      if (result.complete()) {
        complete.push_back(result);
      } else {
        dropped += (dropped.empty() ? "" : ", ") + result.essay_id;
      }
    }
    if (!dropped.empty() && !config.allow_partial) {
      throw ConfigError("prompt " + prompt_id + " has incomplete essays (" + dropped +
                        "); re-score or pass --allow-partial");
    }
    if (!dropped.empty()) out << prompt_id << ": skipping incomplete essays: " << dropped << "\n";
    if (complete.empty()) {
      throw ConfigError("prompt " + prompt_id + " has no complete essays");
    }

    ScoreScale scale = scale_for_prompt(config.flavor, prompt_id);
    PromptScores entry;
    entry.prompt_id = prompt_id;
    entry.scale = scale;
    for (const auto& result : complete) {
      if (!result.gold.has_value()) {
        throw ConfigError("essay " + result.essay_id + " has no gold score; cannot evaluate");
      }
      entry.essay_ids.push_back(result.essay_id);
      entry.gold.push_back(*result.gold);
    }

    if (kind == PipelineKind::Vanilla) {
      for (const auto& result : complete) {
        if (!validate_gold(*result.direct_score, scale)) {
          throw ConfigError("essay " + result.essay_id + ": vanilla score " +
                            score_value_to_string(*result.direct_score) +
                            " is not in the target scale");
        }
        entry.predicted.push_back(*result.direct_score);
      }
    } else {
      BatchAggregate batch = aggregate_batch(complete, scale, config.method);
      for (const auto& essay : batch.essays) entry.predicted.push_back(essay.final);
      // The degenerate-batch QWK-zero rule applies to the overall-score
      // baseline that reuses this scaling path.
      entry.degenerate = batch.degenerate && kind == PipelineKind::VanillaPlus;
      aggregates.push_back(batch_to_json(prompt_id, batch));
      if (is_trait_pipeline(kind)) {
        PromptTraitResults data;
        data.prompt_id = prompt_id;
        data.scale = scale;
        data.results = complete;
        data.gold = entry.gold;
        trait_data.push_back(std::move(data));
      }
    }
    scored.push_back(std::move(entry));
  }

  EvaluationReport report =
      evaluate_run(scored, to_string(kind), to_string(config.method));
  std::filesystem::path reports_dir = config.out_dir / "reports";
  std::string stem = "report_" + report.pipeline + "_" + report.method;
  write_text(reports_dir / (stem + ".json"),
             report_to_json(report, config.flavor).dump(2) + "\n");
  std::string table = render_report_table({report});
  write_text(reports_dir / (stem + ".tsv"), table);
  if (!aggregates.empty()) {
    write_text(reports_dir / ("aggregates_" + report.method + ".json"),
               aggregates.dump(2) + "\n");
  }
  out << table;

  if (config.ablate_traits > 0) {
    if (trait_data.empty()) {
      throw ConfigError("--ablate-traits needs a trait pipeline's results");
    }
    std::vector<std::string> trait_names;
    for (const auto& score : trait_data.front().results.front().trait_scores->scores) {
      trait_names.push_back(score.trait);
    }
    SubsetAblation ablation = ablate_trait_subsets(trait_data, trait_names,
                                                   config.ablate_traits, config.method);
    std::ostringstream ablation_table;
    ablation_table << "subset\tqwk\n";
    ablation_table << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < ablation.subsets.size(); ++i) {
      std::string joined;
      for (const auto& name : ablation.subsets[i]) {
        joined += (joined.empty() ? "" : "+") + name;
      }
      ablation_table << joined << "\t" << ablation.subset_qwks[i] << "\n";
    }
    ablation_table << "average(n=" << ablation.n << ")\t" << ablation.average_qwk << "\n";
    write_text(reports_dir / ("ablation_n" + std::to_string(ablation.n) + "_" + report.method +
                              ".tsv"),
               ablation_table.str());
    out << ablation_table.str();
  }

  if (config.export_distribution && kind != PipelineKind::Vanilla) {
    for (const auto& prompt_id : prompt_order) {
      auto& results = by_prompt[prompt_id];
      std::vector<EssayScoringResult> complete;
      for (auto& result : results) {
        if (result.complete()) complete.push_back(result);
      }
      ScoreScale scale = scale_for_prompt(config.flavor, prompt_id);
      std::vector<std::pair<std::string, Histogram>> columns;
      for (ScalingMethod method :
           {ScalingMethod::Fixed, ScalingMethod::Minmax, ScalingMethod::MinmaxClip}) {
        BatchAggregate batch = aggregate_batch(complete, scale, method);
        columns.emplace_back(to_string(method),
                             export_distribution(batch, config.distribution_bins));
      }
      write_text(reports_dir / ("distribution_" + prompt_id + ".tsv"),
                 render_distribution_table(columns));
    }
    out << "distribution tables written to " << reports_dir.string() << "\n";
  }
  return 0;
}

// --- split -------------------------------------------------------------------

int cmd_split(const RunConfig& config, std::ostream& out) {
  auto dataset = load_selected(config);
  std::filesystem::path splits_dir = config.out_dir / "splits";
  std::filesystem::create_directories(splits_dir);
  for (const auto& entry : dataset) {
    DatasetSplit split =
        sample_test_split(entry.essays, config.split_fraction, config.seed);
    std::filesystem::path path = splits_dir / (entry.prompt.prompt_id + ".split.txt");
    save_split_manifest(path, split, config.split_fraction);
    out << entry.prompt.prompt_id << ": " << split.sample.count << "/" << split.population.count
        << " essays, seed " << split.seed << ", z " << split.z << " -> " << path.string() << "\n";
  }
  return 0;
}

// --- report ------------------------------------------------------------------

int cmd_report(const std::vector<std::filesystem::path>& report_files,
               const std::optional<std::filesystem::path>& out_path, std::ostream& out) {
  if (report_files.empty()) throw ConfigError("report: no evaluation reports given");
  std::vector<EvaluationReport> reports;
  for (const auto& path : report_files) {
    try {
      reports.push_back(report_from_json(json::parse(read_text(path))));
    } catch (const json::exception& error) {
      throw IoError("report " + path.string() + ": " + error.what());
    }
  }
  std::string table = render_report_table(reports);
  if (out_path.has_value()) write_text(*out_path, table);
  out << table;
  return 0;
}

}  // namespace mts
