#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reshmm/classify.hpp"
#include "reshmm/csv_io.hpp"
#include "reshmm/evaluation.hpp"
#include "reshmm/inference.hpp"
#include "reshmm/learning.hpp"
#include "reshmm/model_io.hpp"
#include "reshmm/synth.hpp"

namespace py = pybind11;
using namespace reshmm;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Segmental hidden Markov models with random effects on the "
            "per-segment regression coefficients: learning, segmentation, "
            "scoring, prediction and classification of waveforms.";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericalError>(m, "NumericalError");

  py::class_<WaveformSeries>(m, "WaveformSeries")
      .def(py::init([](std::string id, std::vector<double> samples) {
             WaveformSeries w{std::move(id), std::move(samples)};
             w.validate();
             return w;
           }),
           py::arg("id"), py::arg("samples"))
      .def_readwrite("id", &WaveformSeries::id)
      .def_readwrite("samples", &WaveformSeries::samples)
      .def_property_readonly("length", &WaveformSeries::length)
      .def("__len__", &WaveformSeries::length)
      .def("__repr__", [](const WaveformSeries& w) {
        return "WaveformSeries(id='" + w.id +
               "', T=" + std::to_string(w.length()) + ")";
      });

  py::class_<TrainingCorpus>(m, "TrainingCorpus")
      .def(py::init<>())
      .def(py::init([](std::vector<WaveformSeries> waveforms) {
             TrainingCorpus c{std::move(waveforms)};
             c.validate();
             return c;
           }),
           py::arg("waveforms"))
      .def_readwrite("waveforms", &TrainingCorpus::waveforms)
      .def("__len__",
           [](const TrainingCorpus& c) { return c.waveforms.size(); });

  py::class_<StateParams>(m, "StateParams")
      .def(py::init<>())
      .def_readwrite("beta", &StateParams::beta)
      .def_readwrite("lambda_", &StateParams::lambda)
      .def_readwrite("psi", &StateParams::psi);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("num_states", &ModelParams::num_states)
      .def_readwrite("d_max", &ModelParams::d_max)
      .def_readwrite("transitions", &ModelParams::transitions)
      .def_readwrite("states", &ModelParams::states)
      .def_readwrite("sigma2", &ModelParams::sigma2)
      .def("validate", &ModelParams::validate)
      .def("to_json", &model_to_json)
      .def_static("from_json", &model_from_json, py::arg("text"));

  py::class_<Segment>(m, "Segment")
      .def_readonly("state", &Segment::state)
      .def_readonly("start", &Segment::start)
      .def_readonly("duration", &Segment::duration)
      .def("__repr__", [](const Segment& s) {
        return "Segment(state=" + std::to_string(s.state) +
               ", start=" + std::to_string(s.start) +
               ", duration=" + std::to_string(s.duration) + ")";
      });

  py::class_<Segmentation>(m, "Segmentation")
      .def_readonly("segments", &Segmentation::segments)
      .def_readonly("log_joint", &Segmentation::log_joint);

  py::class_<RandomEffectPosterior>(m, "RandomEffectPosterior")
      .def_readonly("u_hat", &RandomEffectPosterior::u_hat)
      .def_readonly("u_cov", &RandomEffectPosterior::u_cov)
      .def("second_moment", &RandomEffectPosterior::second_moment);

  // segment-level operations
  m.def("duration_log_pmf", &duration_log_pmf, py::arg("d"), py::arg("lam"));
  m.def(
      "segment_loglik",
      [](const std::vector<double>& y, const StateParams& s, double sigma2) {
        return segment_loglik_fast(y, s, sigma2);
      },
      py::arg("y_seg"), py::arg("state"), py::arg("sigma2"));
  m.def(
      "posterior_random_effect",
      [](const std::vector<double>& y, const StateParams& s, double sigma2) {
        return posterior_random_effect(y, s, sigma2);
      },
      py::arg("y_seg"), py::arg("state"), py::arg("sigma2"));

  // inference
  m.def(
      "loglik",
      [](const WaveformSeries& y, const ModelParams& p) {
        return forward(y, p).loglik;
      },
      py::arg("waveform"), py::arg("model"));
  m.def("viterbi", &viterbi, py::arg("waveform"), py::arg("model"));
  m.def("prefix_loglik", &prefix_loglik, py::arg("waveform"), py::arg("model"),
        py::arg("t"));
  m.def(
      "predict",
      [](const WaveformSeries& y, const ModelParams& p) {
        std::vector<std::pair<double, double>> out;
        for (const auto& pr : predict_all(y, p))
          out.emplace_back(pr.forecast, pr.log_density);
        return out;
      },
      py::arg("waveform"), py::arg("model"),
      "Per-step (forecast, predictive log-density) pairs for t = 1..T.");

  // learning
  py::class_<FitConfig>(m, "FitConfig")
      .def(py::init<>())
      .def_readwrite("num_states", &FitConfig::num_states)
      .def_readwrite("d_max", &FitConfig::d_max)
      .def_readwrite("max_iter", &FitConfig::max_iter)
      .def_readwrite("rel_tol", &FitConfig::rel_tol)
      .def_readwrite("seed", &FitConfig::seed)
      .def_readwrite("random_effects", &FitConfig::random_effects);

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("params", &FitReport::params)
      .def_readonly("loglik_trace", &FitReport::loglik_trace)
      .def_readonly("iterations", &FitReport::iterations)
      .def_readonly("converged", &FitReport::converged)
      .def_readonly("warnings", &FitReport::warnings);

  m.def("fit", &fit, py::arg("corpus"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("initialize", &initialize, py::arg("corpus"), py::arg("num_states"),
        py::arg("d_max"), py::arg("seed") = 0);

  // evaluation
  py::class_<ScoreVector>(m, "ScoreVector")
      .def_readonly("id", &ScoreVector::id)
      .def_readonly("logp", &ScoreVector::logp)
      .def_readonly("score_shape", &ScoreVector::score_shape)
      .def_readonly("score_noise", &ScoreVector::score_noise)
      .def("supported", &ScoreVector::supported);

  m.def("score_waveform", &score_waveform, py::arg("waveform"),
        py::arg("model"));
  m.def(
      "segmentation_error",
      [](const WaveformSeries& y, const ModelParams& p) {
        return segmentation_error(y, p);
      },
      py::arg("waveform"), py::arg("model"));

  py::class_<PredictionReport>(m, "PredictionReport")
      .def_readonly("mean_log_density", &PredictionReport::mean_log_density)
      .def_readonly("mse", &PredictionReport::mse);
  m.def("prediction_report", &prediction_report, py::arg("waveform"),
        py::arg("model"));

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("mean_logp", &EvalReport::mean_logp)
      .def_readonly("mean_pred_log_density", &EvalReport::mean_pred_log_density)
      .def_readonly("pred_mse", &EvalReport::pred_mse)
      .def_readonly("seg_mse", &EvalReport::seg_mse);
  m.def("evaluate_corpus", &evaluate_corpus, py::arg("corpus"),
        py::arg("model"), py::call_guard<py::gil_scoped_release>());

  // classification
  py::class_<LabeledFeature>(m, "LabeledFeature")
      .def(py::init([](std::string id, int label, Eigen::VectorXd features) {
             return LabeledFeature{std::move(id), label, std::move(features)};
           }),
           py::arg("id"), py::arg("label"), py::arg("features"))
      .def_readwrite("id", &LabeledFeature::id)
      .def_readwrite("label", &LabeledFeature::label)
      .def_readwrite("features", &LabeledFeature::features);
  m.def("knn_classify", &knn_classify, py::arg("train"), py::arg("query"),
        py::arg("k"));
  m.def("baseline_distance", &baseline_distance, py::arg("a"), py::arg("b"));

  py::class_<CvConfig>(m, "CvConfig")
      .def(py::init<>())
      .def_readwrite("model", &CvConfig::model)
      .def_readwrite("k_values", &CvConfig::k_values)
      .def_readwrite("seed", &CvConfig::seed);
  py::class_<AccuracyRow>(m, "AccuracyRow")
      .def_readonly("feature_set", &AccuracyRow::feature_set)
      .def_readonly("k", &AccuracyRow::k)
      .def_readonly("fold", &AccuracyRow::fold)
      .def_readonly("accuracy", &AccuracyRow::accuracy);
  py::class_<AccuracySummary>(m, "AccuracySummary")
      .def_readonly("feature_set", &AccuracySummary::feature_set)
      .def_readonly("k", &AccuracySummary::k)
      .def_readonly("mean", &AccuracySummary::mean)
      .def_readonly("sd", &AccuracySummary::sd);
  py::class_<AccuracyTable>(m, "AccuracyTable")
      .def_readonly("rows", &AccuracyTable::rows)
      .def_readonly("summary", &AccuracyTable::summary)
      .def_readonly("best_feature_set", &AccuracyTable::best_feature_set)
      .def_readonly("best_k", &AccuracyTable::best_k);
  m.def("cv_protocol", &cv_protocol, py::arg("positives"), py::arg("negatives"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>());

  // synthesis
  py::class_<SegmentTruth>(m, "SegmentTruth")
      .def_readonly("segment", &SegmentTruth::segment)
      .def_readonly("u", &SegmentTruth::u)
      .def_readonly("truncated", &SegmentTruth::truncated);
  py::class_<WaveformTruth>(m, "WaveformTruth")
      .def_readonly("id", &WaveformTruth::id)
      .def_readonly("segments", &WaveformTruth::segments);
  py::class_<SampledCorpus>(m, "SampledCorpus")
      .def_readonly("corpus", &SampledCorpus::corpus)
      .def_readonly("truths", &SampledCorpus::truths);
  m.def(
      "sample_corpus",
      [](const ModelParams& params, int n, std::uint64_t seed, int t_cap) {
        return sample_corpus(GeneratorConfig{params, n, seed, t_cap});
      },
      py::arg("model"), py::arg("n"), py::arg("seed") = 0, py::arg("t_cap") = 0);
  m.def("preset_model", &preset_model, py::arg("name"));
  m.def("preset_names", &preset_names);

  // file formats
  m.def("save_model", &save_model, py::arg("path"), py::arg("model"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def("read_corpus_csv", &read_corpus_csv, py::arg("path"));
  m.def("write_corpus_csv", &write_corpus_csv, py::arg("path"),
        py::arg("corpus"));
}
