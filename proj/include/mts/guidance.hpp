#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mts/domain.hpp"
#include "mts/llm.hpp"

namespace mts {

// Input to trait decomposition. ASAP mode decomposes a whole rubric at once;
// TOEFL11 mode generates criteria for one named trait from a rubric slice.
struct DecompositionRequest {
  Dataset dataset = Dataset::Asap;
  WritingPrompt prompt;                     // ASAP mode
  std::optional<std::string> trait_name;    // TOEFL11 mode
  std::optional<std::string> rubric_slice;  // TOEFL11 mode
};

void validate_decomposition_request(const DecompositionRequest& request);

// Single user message asking for a four-trait rubric. include_rubric=false is
// the no-reference ablation: the [Rubric Guidelines] block and the clauses
// citing it are dropped.
std::vector<ChatMessage> build_decomposition_prompt_asap(const WritingPrompt& prompt,
                                                         bool include_rubric = true);

// Single user message asking for one trait's criteria from a rubric slice.
std::vector<ChatMessage> build_decomposition_prompt_toefl(const std::string& trait_name,
                                                          const std::string& rubric_slice);

// Reply could not be split into the expected trait blocks.
class GuidanceParseError : public Error {
 public:
  GuidanceParseError(const std::string& message, std::string raw_reply)
      : Error(message), raw_reply_(std::move(raw_reply)) {}
  const std::string& raw_reply() const { return raw_reply_; }

 private:
  std::string raw_reply_;
};

// Extracts exactly expected_count trait blocks from a model reply. Block
// detection is lenient (title line, then description, then criteria from the
// first band marker); strictness lives in the count check. When
// expected_traits is given the block titles must match those names.
GuidanceSet parse_guidance(const std::string& reply,
                           const std::optional<std::vector<std::string>>& expected_traits = {},
                           int expected_count = kDefaultTraitCount);

struct RubricSlice {
  std::string trait;
  std::string slice;
};

// JSON array of {"trait": ..., "slice": ...} in trait order.
std::vector<RubricSlice> load_rubric_slices(const std::filesystem::path& path);

// Builds the decomposition prompt, asks the backend, and parses the reply.
GuidanceSet generate_guidance_asap(const WritingPrompt& prompt, Backend& backend,
                                   const SamplingConfig& sampling, GuidanceSource source,
                                   bool include_rubric = true,
                                   TranscriptRecorder* recorder = nullptr);

// One call per trait; the four replies are assembled into the shared set.
GuidanceSet generate_guidance_toefl(const std::vector<RubricSlice>& slices, Backend& backend,
                                    const SamplingConfig& sampling, GuidanceSource source,
                                    TranscriptRecorder* recorder = nullptr);

}  // namespace mts
