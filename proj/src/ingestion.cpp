#include "mts/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

namespace mts {

std::string normalize_entities(const std::string& text, bool keep_digits) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '@' && i + 1 < text.size() && std::isupper(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isupper(static_cast<unsigned char>(text[j]))) ++j;
      std::size_t token_end = j;
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      out += '{';
      out.append(text, i + 1, (keep_digits ? j : token_end) - i - 1);
      out += '}';
      i = j;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

double normal_two_sided_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  double target = 1.0 - alpha / 2.0;
  auto cdf = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (cdf(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ZTestResult ztest_mean(double sample_mean, long n, double pop_mean, double pop_std,
                       double alpha) {
  if (n < 1) throw ValidationError("ztest_mean: sample size must be >= 1");
  if (pop_std < 0.0) throw ValidationError("ztest_mean: negative population std");
  ZTestResult result;
  result.z = pop_std > 0.0
                 ? (sample_mean - pop_mean) / (pop_std / std::sqrt(static_cast<double>(n)))
                 : 0.0;
  result.pass = std::abs(result.z) <= normal_two_sided_critical(alpha);
  return result;
}

namespace {

double gold_as_numeric(const Essay& essay) {
  if (!essay.gold.has_value()) {
    throw ValidationError("essay " + essay.essay_id + ": gold score missing");
  }
  if (!is_label(*essay.gold)) return as_number(*essay.gold);
  // Ordinal labels enter the Z-test by their category index.
  const std::string& label = as_label(*essay.gold);
  if (label == "low") return 0.0;
  if (label == "medium") return 1.0;
  if (label == "high") return 2.0;
  throw ValidationError("essay " + essay.essay_id + ": unknown label " + label);
}

}  // namespace

DatasetSplit sample_test_split(const std::vector<Essay>& essays, double fraction, long seed,
                               double alpha, int max_retries) {
  if (essays.empty()) throw ValidationError("sample_test_split: no essays");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("sample_test_split: fraction must be in (0,1]");
  }
  const std::size_t n = essays.size();
  const auto k = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));  // half away from zero
  if (k == 0) throw ValidationError("sample_test_split: sample size rounds to zero");

  std::vector<double> gold(n);
  for (std::size_t i = 0; i < n; ++i) gold[i] = gold_as_numeric(essays[i]);
  double pop_mean = 0.0;
  for (double g : gold) pop_mean += g;
  pop_mean /= static_cast<double>(n);
  double variance = 0.0;
  for (double g : gold) variance += (g - pop_mean) * (g - pop_mean);
  variance /= static_cast<double>(n);
  double pop_std = std::sqrt(variance);

  double last_z = 0.0;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    long attempt_seed = seed + attempt;
    // Partial Fisher-Yates with explicit draws: reproducible across platforms.
    std::mt19937_64 rng(static_cast<std::uint64_t>(attempt_seed));
    std::vector<std::size_t> indices(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(indices[i], indices[j]);
    }
    std::vector<std::size_t> chosen(indices.begin(), indices.begin() + static_cast<long>(k));
    std::sort(chosen.begin(), chosen.end());

    double sample_mean = 0.0;
    for (std::size_t index : chosen) sample_mean += gold[index];
    sample_mean /= static_cast<double>(k);

    ZTestResult ztest = ztest_mean(sample_mean, static_cast<long>(k), pop_mean, pop_std, alpha);
    last_z = ztest.z;
    if (!ztest.pass) continue;

    DatasetSplit split;
    split.prompt_id = essays.front().prompt_id;
    for (std::size_t index : chosen) split.test_essays.push_back(essays[index]);
    split.population = {pop_mean, pop_std, static_cast<long>(n)};
    split.sample = {sample_mean, static_cast<long>(k)};
    split.seed = attempt_seed;
    split.z = ztest.z;
    return split;
  }
  std::ostringstream message;
  message << "sample_test_split: no sample passed the Z-test after " << (max_retries + 1)
          << " seeds (last z = " << last_z << ")";
  throw ValidationError(message.str());
}

void save_split_manifest(const std::filesystem::path& path, const DatasetSplit& split,
                         double fraction) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write split manifest: " + path.string());
  out << "prompt_id: " << split.prompt_id << "\n";
  out << "seed: " << split.seed << "\n";
  out << "z: " << std::setprecision(17) << split.z << "\n";
  out << "fraction: " << std::setprecision(17) << fraction << "\n";
  for (const auto& essay : split.test_essays) out << essay.essay_id << "\n";
}

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read split manifest: " + path.string());
  SplitManifest manifest;
  std::string line;
  auto field = [&](const std::string& key) {
    if (!std::getline(in, line) || line.rfind(key + ": ", 0) != 0) {
      throw IoError("split manifest " + path.string() + ": expected '" + key + ": ...'");
    }
    return line.substr(key.size() + 2);
  };
  manifest.prompt_id = field("prompt_id");
  manifest.seed = std::stol(field("seed"));
  manifest.z = std::stod(field("z"));
  manifest.fraction = std::stod(field("fraction"));
  while (std::getline(in, line)) {
    if (!line.empty()) manifest.essay_ids.push_back(line);
  }
  return manifest;
}

const std::array<AsapPromptInfo, 8>& asap_prompt_table() {
  static const std::array<AsapPromptInfo, 8> table = {{
      {1, Genre::Arg, 2, 12, 1783},
      {2, Genre::Arg, 1, 6, 1800},
      {3, Genre::Res, 0, 3, 1726},
      {4, Genre::Res, 0, 3, 1772},
      {5, Genre::Res, 0, 4, 1805},
      {6, Genre::Res, 0, 4, 1800},
      {7, Genre::Nar, 0, 30, 1569},
      {8, Genre::Nar, 0, 60, 723},
  }};
  return table;
}

namespace {

std::string latin1_to_utf8(const std::string& bytes) {
  std::string out;
  out.reserve(bytes.size());
  for (unsigned char b : bytes) {
    if (b < 0x80) {
      out += static_cast<char>(b);
    } else {
      out += static_cast<char>(0xC0 | (b >> 6));
      out += static_cast<char>(0x80 | (b & 0x3F));
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string rtrim(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ' ||
                           text.back() == '\t')) {
    text.pop_back();
  }
  return text;
}

std::optional<std::string> read_pack_file(const std::optional<std::filesystem::path>& pack,
                                          const std::string& name) {
  if (!pack.has_value()) return std::nullopt;
  std::filesystem::path path = *pack / name;
  if (!std::filesystem::exists(path)) return std::nullopt;
  return rtrim(read_file(path));
}

std::vector<std::string> split_on(const std::string& line, char separator) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, separator)) fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<PromptEssays> load_asap(const std::filesystem::path& tsv_path,
                                    const std::optional<std::filesystem::path>& prompt_pack,
                                    const std::string& encoding, bool keep_entity_digits) {
  std::string raw = read_file(tsv_path);
  if (encoding == "latin-1" || encoding == "latin1" || encoding == "iso-8859-1") {
    raw = latin1_to_utf8(raw);
  } else if (encoding != "utf-8" && encoding != "utf8") {
    throw ConfigError("unsupported encoding: " + encoding);
  }

  std::istringstream in(raw);
  std::string line;
  if (!std::getline(in, line)) throw IoError("ASAP file is empty: " + tsv_path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header = split_on(line, '\t');
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError("ASAP file missing column: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  std::size_t id_col = column("essay_id");
  std::size_t set_col = column("essay_set");
  std::size_t text_col = column("essay");
  std::size_t score_col = column("domain1_score");

  std::map<int, std::vector<Essay>> by_prompt;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_on(line, '\t');
    std::size_t needed = std::max({id_col, set_col, text_col, score_col}) + 1;
    if (fields.size() < needed) {
      throw IoError("ASAP row " + std::to_string(row) + ": too few columns");
    }
    int prompt_number = 0;
    try {
      prompt_number = std::stoi(fields[set_col]);
    } catch (const std::exception&) {
      throw IoError("ASAP row " + std::to_string(row) + ": unparseable essay_set '" +
                    fields[set_col] + "'");
    }
    if (prompt_number < 1 || prompt_number > 8) {
      throw IoError("ASAP row " + std::to_string(row) + ": unknown essay_set " +
                    std::to_string(prompt_number));
    }
    double score = 0.0;
    try {
      std::size_t used = 0;
      score = std::stod(fields[score_col], &used);
      if (used != fields[score_col].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw IoError("ASAP row " + std::to_string(row) + ": unparseable score '" +
                    fields[score_col] + "'");
    }
    const AsapPromptInfo& info = asap_prompt_table()[static_cast<std::size_t>(prompt_number - 1)];
    if (std::floor(score) != score || score < info.min_score || score > info.max_score) {
      throw IoError("ASAP row " + std::to_string(row) + ": score " + fields[score_col] +
                    " outside prompt " + std::to_string(prompt_number) + " range [" +
                    std::to_string(info.min_score) + "," + std::to_string(info.max_score) + "]");
    }
    Essay essay;
    essay.essay_id = fields[id_col];
    essay.prompt_id = "asap-" + std::to_string(prompt_number);
    essay.text = normalize_entities(fields[text_col], keep_entity_digits);
    essay.gold = ScoreValue{score};
    by_prompt[prompt_number].push_back(std::move(essay));
  }

  std::vector<PromptEssays> out;
  for (auto& [number, essays] : by_prompt) {
    const AsapPromptInfo& info = asap_prompt_table()[static_cast<std::size_t>(number - 1)];
    WritingPrompt prompt;
    prompt.prompt_id = "asap-" + std::to_string(number);
    prompt.dataset = Dataset::Asap;
    prompt.genre = info.genre;
    prompt.scale = ScoreScale::integer_range(info.min_score, info.max_score);
    std::string suffix = std::to_string(number) + ".txt";
    prompt.prompt_text = read_pack_file(prompt_pack, "prompt" + suffix).value_or("");
    prompt.rubric_guidelines = read_pack_file(prompt_pack, "rubric" + suffix).value_or("");
    prompt.excerpt = read_pack_file(prompt_pack, "excerpt" + suffix);
    out.push_back({std::move(prompt), std::move(essays)});
  }
  return out;
}

std::vector<PromptEssays> load_toefl11(const std::filesystem::path& index_path,
                                       const std::filesystem::path& essays_dir,
                                       const std::optional<std::filesystem::path>& prompt_pack) {
  std::string raw = read_file(index_path);
  std::istringstream in(raw);
  std::string line;
  std::map<int, std::vector<Essay>> by_prompt;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char separator = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<std::string> fields = split_on(line, separator);
    if (fields.size() < 3) {
      throw IoError("TOEFL11 index row " + std::to_string(row) + ": expected at least 3 columns");
    }
    std::string filename = fields[0];
    if (row == 1) {
      std::string lowered = filename;
      std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (lowered == "filename") continue;  // header row
    }
    std::string prompt_field = fields[1];
    // Accept "P3" or "3".
    if (!prompt_field.empty() && (prompt_field[0] == 'P' || prompt_field[0] == 'p')) {
      prompt_field = prompt_field.substr(1);
    }
    int prompt_number = 0;
    try {
      prompt_number = std::stoi(prompt_field);
    } catch (const std::exception&) {
      throw IoError("TOEFL11 index row " + std::to_string(row) + ": unparseable prompt '" +
                    fields[1] + "'");
    }
    if (prompt_number < 1 || prompt_number > 8) {
      throw IoError("TOEFL11 index row " + std::to_string(row) + ": unknown prompt " +
                    std::to_string(prompt_number));
    }
    std::string label = fields.back();
    std::transform(label.begin(), label.end(), label.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (label != "low" && label != "medium" && label != "high") {
      throw IoError("TOEFL11 index row " + std::to_string(row) + ": label '" + fields.back() +
                    "' not one of low/medium/high");
    }
    std::filesystem::path essay_path = essays_dir / filename;
    if (!std::filesystem::exists(essay_path)) {
      throw IoError("TOEFL11 essay file missing: " + essay_path.string());
    }
    Essay essay;
    essay.essay_id = std::filesystem::path(filename).stem().string();
    essay.prompt_id = "toefl-" + std::to_string(prompt_number);
    essay.text = rtrim(read_file(essay_path));
    essay.gold = ScoreValue{label};
    by_prompt[prompt_number].push_back(std::move(essay));
  }

  std::vector<PromptEssays> out;
  for (auto& [number, essays] : by_prompt) {
    WritingPrompt prompt;
    prompt.prompt_id = "toefl-" + std::to_string(number);
    prompt.dataset = Dataset::Toefl11;
    prompt.genre = Genre::Arg;
    prompt.scale = ScoreScale::toefl11();
    std::string suffix = std::to_string(number) + ".txt";
    prompt.prompt_text = read_pack_file(prompt_pack, "prompt" + suffix).value_or("");
    prompt.rubric_guidelines = read_pack_file(prompt_pack, "rubric" + suffix).value_or("");
    out.push_back({std::move(prompt), std::move(essays)});
  }
  return out;
}

}  // namespace mts
