#pragma once

// Shared end-to-end fixture: the bundled 12-essay dataset scored by a
// deterministic scripted backend, recorded into a replay store.

#include <sstream>
#include <string>

#include "mts/guidance.hpp"
#include "mts/orchestration.hpp"
#include "mts/pipelines.hpp"
#include "test_support.hpp"

namespace testsupport {

inline mts::RunConfig e2e_config(const std::filesystem::path& work,
                                 const std::filesystem::path& store) {
  mts::RunConfig config;
  config.flavor = mts::Dataset::Asap;
  config.dataset_path = fixture_path("e2e/essays.tsv");
  config.pipeline = mts::PipelineKind::Mts;
  config.method = mts::ScalingMethod::MinmaxClip;
  config.guidance_path = fixture_path("e2e/guidance.txt");
  config.model_id = "mock-model";
  config.sampling.model_id = "mock-model";
  config.sampling.seed = 7;
  config.seed = 7;
  config.out_dir = work;
  config.replay_path = store;
  return config;
}

inline void build_e2e_store(const mts::RunConfig& config, const std::filesystem::path& store) {
  auto dataset = mts::load_asap(config.dataset_path);
  mts::GuidanceSet guidance = mts::load_guidance_file(*config.guidance_path);
  auto backend = mts::make_mock_backend(
      [&guidance](const std::vector<mts::ChatMessage>& messages, const mts::SamplingConfig&) {
        if (messages.size() == 2) return std::string("Quote: \"volunteering\" - relevant.");
        auto at = messages[1].content.find("Essay number ");
        int essay = std::stoi(messages[1].content.substr(at + 13));
        int trait = 0;
        for (std::size_t t = 0; t < guidance.traits.size(); ++t) {
          if (messages.front().content.find("“" + guidance.traits[t].name + "\"") !=
              std::string::npos) {
            trait = static_cast<int>(t);
          }
        }
        std::ostringstream reply;
        reply << "Score: <score>" << ((essay * 7 + trait * 3) % 21) / 2.0 << "</score>";
        return reply.str();
      });
  mts::TranscriptRecorder recorder(store);
  mts::SamplingConfig sampling = config.sampling;
  mts::RunContext ctx{*backend, sampling, &recorder, 3};
  for (const auto& essay : dataset[0].essays) {
    mts::run_pipeline(mts::PipelineKind::Mts, essay, dataset[0].prompt, &guidance, ctx);
  }
}

}  // namespace testsupport
