#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mts/errors.hpp"

namespace mts {

enum class Dataset { Asap, Toefl11 };
enum class Genre { Arg, Res, Nar };

std::string to_string(Dataset dataset);
std::string to_string(Genre genre);
Dataset dataset_from_string(const std::string& name);
Genre genre_from_string(const std::string& name);

enum class ScaleKind { IntegerRange, OrdinalLabels };

// Target output space for final scores: an integer range [a,b], or ordered
// labels over a numeric intermediate range split by thresholds.
struct ScoreScale {
  ScaleKind kind = ScaleKind::IntegerRange;
  double min = 0.0;
  double max = 1.0;
  std::vector<std::string> labels;     // OrdinalLabels only, low to high
  std::vector<double> thresholds;      // size = labels.size() - 1, inside (min,max)

  static ScoreScale integer_range(double a, double b);
  static ScoreScale ordinal_labels(double a, double b, std::vector<std::string> labels,
                                   std::vector<double> thresholds);
  // The low/medium/high scale on the intermediate range [1,5], thresholds 2.25 and 3.75.
  static ScoreScale toefl11();

  bool operator==(const ScoreScale&) const = default;
};

// A final or gold score: numeric on integer scales, a label on ordinal ones.
using ScoreValue = std::variant<double, std::string>;

bool is_label(const ScoreValue& value);
double as_number(const ScoreValue& value);
const std::string& as_label(const ScoreValue& value);
std::string score_value_to_string(const ScoreValue& value);

struct WritingPrompt {
  std::string prompt_id;
  Dataset dataset = Dataset::Asap;
  Genre genre = Genre::Arg;
  std::string prompt_text;
  std::optional<std::string> excerpt;  // source material, ASAP source-dependent prompts only
  std::string rubric_guidelines;
  ScoreScale scale;

  bool operator==(const WritingPrompt&) const = default;
};

// Throws ValidationError when an invariant does not hold.
void validate_prompt(const WritingPrompt& prompt);

struct Essay {
  std::string essay_id;
  std::string prompt_id;
  std::string text;  // normalized essay text
  std::optional<ScoreValue> gold;

  bool operator==(const Essay&) const = default;
};

void validate_essay(const Essay& essay, const ScoreScale& scale);

// True iff the score is valid under the scale: an integral number inside
// [min,max] for IntegerRange, or a member label for OrdinalLabels.
bool validate_gold(const ScoreValue& score, const ScoreScale& scale);

struct TraitGuidance {
  std::string name;         // e.g. "Organization and Structure"
  std::string description;  // one sentence, single line
  std::string criteria;     // banded criteria over [0,10], no blank lines

  bool operator==(const TraitGuidance&) const = default;
};

enum class GuidanceSource { ChatGptGenerated, SelfGenerated, File };

std::string to_string(GuidanceSource source);
GuidanceSource guidance_source_from_string(const std::string& name);

inline constexpr int kDefaultTraitCount = 4;
inline constexpr std::string_view kSharedPromptId = "shared";  // TOEFL11 shares one set

struct GuidanceSet {
  std::vector<TraitGuidance> traits;
  GuidanceSource source = GuidanceSource::File;
  std::string prompt_id;  // prompt the set belongs to, or "shared"

  std::vector<std::string> trait_names() const;

  bool operator==(const GuidanceSet&) const = default;
};

// Returns the set unchanged iff all invariants hold; the thrown error names
// the violation (wrong trait count, duplicate trait name, empty field, ...).
const GuidanceSet& validate_guidance_set(const GuidanceSet& set,
                                         int expected_traits = kDefaultTraitCount);

struct TraitScore {
  std::string trait;
  double score = 0.0;  // raw trait score in [0,10]

  bool operator==(const TraitScore&) const = default;
};

struct TraitScoreVector {
  std::string essay_id;
  std::vector<TraitScore> scores;
  std::vector<std::string> transcript_refs;

  std::optional<double> score_for(const std::string& trait) const;

  bool operator==(const TraitScoreVector&) const = default;
};

void validate_trait_scores(const TraitScoreVector& vector, const GuidanceSet& guidance);

// Canonical guidance file format: a two-line header (source, prompt_id),
// a blank line, then one block per trait (name line, description line,
// criteria lines) with blank lines between blocks. Round-trips byte-exactly.
std::string render_guidance_file(const GuidanceSet& set);
GuidanceSet parse_guidance_file(const std::string& content);
void save_guidance_file(const std::filesystem::path& path, const GuidanceSet& set);
GuidanceSet load_guidance_file(const std::filesystem::path& path);

}  // namespace mts
