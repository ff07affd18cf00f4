#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mts/aggregation.hpp"
#include "mts/domain.hpp"
#include "mts/evaluation.hpp"
#include "mts/guidance.hpp"
#include "mts/ingestion.hpp"
#include "mts/llm.hpp"
#include "mts/pipelines.hpp"

namespace py = pybind11;

namespace {

void bind_domain(py::module& m) {
  py::enum_<mts::Dataset>(m, "Dataset")
      .value("asap", mts::Dataset::Asap)
      .value("toefl11", mts::Dataset::Toefl11);

  py::class_<mts::ScoreScale>(m, "ScoreScale")
      .def_static("integer_range", &mts::ScoreScale::integer_range, py::arg("a"), py::arg("b"))
      .def_static("ordinal_labels", &mts::ScoreScale::ordinal_labels, py::arg("a"), py::arg("b"),
                  py::arg("labels"), py::arg("thresholds"))
      .def_static("toefl11", &mts::ScoreScale::toefl11)
      .def_readonly("min", &mts::ScoreScale::min)
      .def_readonly("max", &mts::ScoreScale::max)
      .def_readonly("labels", &mts::ScoreScale::labels)
      .def_readonly("thresholds", &mts::ScoreScale::thresholds);

  py::class_<mts::TraitGuidance>(m, "TraitGuidance")
      .def(py::init([](std::string name, std::string description, std::string criteria) {
             return mts::TraitGuidance{std::move(name), std::move(description),
                                       std::move(criteria)};
           }),
           py::arg("name"), py::arg("description"), py::arg("criteria"))
      .def_readonly("name", &mts::TraitGuidance::name)
      .def_readonly("description", &mts::TraitGuidance::description)
      .def_readonly("criteria", &mts::TraitGuidance::criteria);

  py::class_<mts::WritingPrompt>(m, "WritingPrompt")
      .def(py::init([](mts::Dataset dataset, std::string prompt_text, std::string rubric,
                       std::optional<std::string> excerpt, const mts::ScoreScale& scale,
                       std::string prompt_id) {
             mts::WritingPrompt prompt;
             prompt.prompt_id = std::move(prompt_id);
             prompt.dataset = dataset;
             prompt.genre = excerpt.has_value() ? mts::Genre::Res : mts::Genre::Arg;
             prompt.prompt_text = std::move(prompt_text);
             prompt.rubric_guidelines = std::move(rubric);
             prompt.excerpt = std::move(excerpt);
             prompt.scale = scale;
             return prompt;
           }),
           py::arg("dataset"), py::arg("prompt_text"), py::arg("rubric_guidelines") = "",
           py::arg("excerpt") = std::nullopt,
           py::arg("scale") = mts::ScoreScale::integer_range(0, 10), py::arg("prompt_id") = "p")
      .def_readonly("prompt_id", &mts::WritingPrompt::prompt_id)
      .def_readonly("prompt_text", &mts::WritingPrompt::prompt_text);

  m.def("validate_gold", &mts::validate_gold, py::arg("score"), py::arg("scale"),
        "True iff the score is valid under the scale.");
}

void bind_ingestion(py::module& m) {
  m.def("normalize_entities", &mts::normalize_entities, py::arg("text"),
        py::arg("keep_digits") = false,
        "Rewrite @TOKEN / @TOKEN12 anonymization markers to {TOKEN}.");
  m.def(
      "ztest_mean",
      [](double sample_mean, long n, double pop_mean, double pop_std, double alpha) {
        auto result = mts::ztest_mean(sample_mean, n, pop_mean, pop_std, alpha);
        return py::make_tuple(result.z, result.pass);
      },
      py::arg("sample_mean"), py::arg("n"), py::arg("pop_mean"), py::arg("pop_std"),
      py::arg("alpha") = 0.05, "Two-sided Z-test; returns (z, pass).");
  m.def("normal_two_sided_critical", &mts::normal_two_sided_critical, py::arg("alpha"));
}

mts::Essay make_essay(const std::string& text) {
  mts::Essay essay;
  essay.essay_id = "py";
  essay.prompt_id = "py";
  essay.text = text;
  return essay;
}

void bind_templates(py::module& m) {
  m.def(
      "build_decomposition_prompt",
      [](const mts::WritingPrompt& prompt, bool include_rubric) {
        return mts::build_decomposition_prompt_asap(prompt, include_rubric)[0].content;
      },
      py::arg("prompt"), py::arg("include_rubric") = true);
  m.def(
      "build_decomposition_prompt_toefl",
      [](const std::string& trait, const std::string& slice) {
        return mts::build_decomposition_prompt_toefl(trait, slice)[0].content;
      },
      py::arg("trait_name"), py::arg("rubric_slice"));
  m.def(
      "render_mts_system",
      [](const mts::TraitGuidance& trait) { return mts::render_mts_system(trait).content; },
      py::arg("trait"));
  m.def(
      "render_mts_turn1",
      [](const mts::WritingPrompt& prompt, const std::string& essay,
         const mts::TraitGuidance& trait) {
        return mts::render_mts_turn1(prompt, make_essay(essay), trait).content;
      },
      py::arg("prompt"), py::arg("essay_text"), py::arg("trait"));
  m.def(
      "render_mts_turn2",
      [](const mts::TraitGuidance& trait) { return mts::render_mts_turn2(trait).content; },
      py::arg("trait"));
  m.def(
      "render_vanilla",
      [](const mts::WritingPrompt& prompt, const std::string& essay,
         const mts::ScoreScale& scale) {
        auto messages = mts::render_vanilla(prompt, make_essay(essay), scale);
        return py::make_tuple(messages[0].content, messages[1].content);
      },
      py::arg("prompt"), py::arg("essay_text"), py::arg("scale"),
      "Returns (system_message, user_message).");
}

void bind_parsing(py::module& m) {
  m.def("parse_score_tag", &mts::parse_score_tag, py::arg("reply"), py::arg("lo") = 0.0,
        py::arg("hi") = 10.0, "First <score>...</score> span as a number in [lo,hi].");
  m.def("parse_vanilla_score", &mts::parse_vanilla_score, py::arg("reply"), py::arg("scale"));
  m.def("parse_step_scores", &mts::parse_step_scores, py::arg("reply"), py::arg("steps") = 4);
  m.def(
      "parse_guidance",
      [](const std::string& reply, const std::optional<std::vector<std::string>>& expected,
         int count) {
        mts::GuidanceSet set = mts::parse_guidance(reply, expected, count);
        py::list traits;
        for (const auto& trait : set.traits) {
          py::dict entry;
          entry["name"] = trait.name;
          entry["description"] = trait.description;
          entry["criteria"] = trait.criteria;
          traits.append(entry);
        }
        return traits;
      },
      py::arg("reply"), py::arg("expected_traits") = std::nullopt,
      py::arg("expected_count") = mts::kDefaultTraitCount,
      "Split a decomposition reply into trait blocks.");
  m.def(
      "request_key",
      [](const std::vector<std::pair<std::string, std::string>>& messages,
         const std::string& model_id, double temperature,
         std::optional<double> repetition_penalty, std::optional<long> seed) {
        std::vector<mts::ChatMessage> converted;
        for (const auto& [role, content] : messages) {
          converted.push_back({mts::role_from_string(role), content});
        }
        mts::SamplingConfig sampling;
        sampling.model_id = model_id;
        sampling.temperature = temperature;
        sampling.repetition_penalty = repetition_penalty;
        sampling.seed = seed;
        return mts::request_key(converted, sampling);
      },
      py::arg("messages"), py::arg("model_id"), py::arg("temperature") = 0.1,
      py::arg("repetition_penalty") = 1.1, py::arg("seed") = std::nullopt,
      "Deterministic replay-store key for a chat request.");
}

std::vector<mts::EssayScoringResult> rows_to_results(
    const std::vector<std::vector<double>>& rows) {
  std::vector<mts::EssayScoringResult> results;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mts::EssayScoringResult result;
    result.essay_id = "e" + std::to_string(i);
    result.prompt_id = "py";
    result.kind = mts::PipelineKind::Mts;
    mts::TraitScoreVector vector;
    vector.essay_id = result.essay_id;
    for (std::size_t t = 0; t < rows[i].size(); ++t) {
      vector.scores.push_back({"t" + std::to_string(t), rows[i][t]});
    }
    result.trait_scores = std::move(vector);
    results.push_back(std::move(result));
  }
  return results;
}

void bind_aggregation(py::module& m) {
  m.def("quartiles", &mts::quartiles, py::arg("values"),
        "(Q1, Q3) by linear interpolation at ranks 0.25/0.75 * (n-1).");
  m.def(
      "clip_outliers",
      [](const std::vector<double>& means) {
        auto result = mts::clip_outliers(means);
        return py::make_tuple(result.clipped, result.v_min, result.v_max);
      },
      py::arg("means"), "Clamp to the IQR fences; returns (clipped, v_min, v_max).");
  m.def("minmax_scale", &mts::minmax_scale, py::arg("values"), py::arg("scale"));
  m.def("fixed_scale", &mts::fixed_scale, py::arg("values"), py::arg("scale"));
  m.def("discretize", &mts::discretize, py::arg("scaled"), py::arg("scale"),
        py::arg("boundary_to_upper") = true);
  m.def(
      "aggregate_batch",
      [](const std::vector<std::vector<double>>& trait_rows, const mts::ScoreScale& scale,
         const std::string& method) {
        mts::BatchAggregate batch = mts::aggregate_batch(
            rows_to_results(trait_rows), scale, mts::scaling_method_from_string(method));
        py::list essays;
        for (const auto& essay : batch.essays) {
          py::dict entry;
          entry["trait_mean"] = essay.trait_mean;
          entry["clipped"] = essay.clipped;
          entry["scaled"] = essay.scaled;
          entry["final"] = essay.final;
          essays.append(entry);
        }
        py::dict stats;
        stats["q1"] = batch.stats.q1;
        stats["q3"] = batch.stats.q3;
        stats["v_min"] = batch.stats.v_min;
        stats["v_max"] = batch.stats.v_max;
        stats["y_min"] = batch.stats.y_min;
        stats["y_max"] = batch.stats.y_max;
        py::dict out;
        out["essays"] = essays;
        out["stats"] = stats;
        out["degenerate"] = batch.degenerate;
        return out;
      },
      py::arg("trait_rows"), py::arg("scale"), py::arg("method") = "minmax-clip",
      "Mean -> clip -> scale -> discretize over one prompt's batch.");
}

void bind_evaluation(py::module& m) {
  m.def(
      "qwk",
      [](const std::vector<int>& truth, const std::vector<int>& pred, int categories) {
        return mts::qwk(truth, pred, categories);
      },
      py::arg("truth"), py::arg("pred"), py::arg("categories"),
      "Quadratic weighted kappa over category indices.");
  m.def(
      "qwk_on_scale",
      [](const std::vector<mts::ScoreValue>& truth, const std::vector<mts::ScoreValue>& pred,
         const mts::ScoreScale& scale) { return mts::qwk(truth, pred, scale); },
      py::arg("truth"), py::arg("pred"), py::arg("scale"));
}

}  // namespace

PYBIND11_MODULE(_mtscore, m) {
  m.doc() = "Zero-shot multi-trait essay scoring: deterministic core operations";

  // Translators run newest-first: register the base before the derived kinds.
  py::register_exception<mts::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mts::ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<mts::ScoreParseError>(m, "ScoreParseError", PyExc_ValueError);
  py::register_exception<mts::GuidanceParseError>(m, "GuidanceParseError", PyExc_ValueError);

  bind_domain(m);
  bind_ingestion(m);
  bind_templates(m);
  bind_parsing(m);
  bind_aggregation(m);
  bind_evaluation(m);

  m.attr("__version__") = "0.1.0";
}
