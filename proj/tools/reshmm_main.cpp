#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reshmm/classify.hpp"
#include "reshmm/csv_io.hpp"
#include "reshmm/evaluation.hpp"
#include "reshmm/learning.hpp"
#include "reshmm/model_io.hpp"
#include "reshmm/synth.hpp"

namespace {

struct Options {
  bool quiet = false;
  bool verbose = false;
};

void info(const Options& opt, const std::string& msg) {
  if (!opt.quiet) std::cerr << msg << '\n';
}

void sort_by_id(reshmm::TrainingCorpus& corpus) {
  std::stable_sort(corpus.waveforms.begin(), corpus.waveforms.end(),
                   [](const auto& a, const auto& b) { return a.id < b.id; });
}

std::string default_sidecar(const std::string& out, const std::string& suffix) {
  const size_t dot = out.find_last_of('.');
  const std::string stem = dot == std::string::npos ? out : out.substr(0, dot);
  return stem + suffix;
}

int run(int argc, char** argv) {
  CLI::App app{"Waveform segmentation, scoring, prediction and classification\n"
               "with segmental hidden Markov models with random effects"};
  app.require_subcommand(1);
  Options opt;
  app.add_flag("--quiet", opt.quiet, "Suppress informational output");
  app.add_flag("--verbose", opt.verbose, "Print per-iteration progress");

  // train
  std::string train_corpus, train_out;
  std::string train_log;
  reshmm::FitConfig fit_config;
  auto* train = app.add_subcommand("train", "Fit a model to a corpus CSV");
  train->add_option("corpus", train_corpus, "Training corpus CSV")->required();
  train->add_option("--states", fit_config.num_states, "Number of states")
      ->required();
  train->add_option("--dmax", fit_config.d_max,
                    "Duration bound (0: longest waveform)");
  train->add_option("--max-iter", fit_config.max_iter, "EM iteration cap");
  train->add_option("--tol", fit_config.rel_tol, "Relative improvement tolerance");
  train->add_option("--seed", fit_config.seed, "Seed");
  bool plain = false;
  train->add_flag("--no-random-effects", plain,
                  "Fit the plain segmental model (psi fixed to 0)");
  train->add_option("--out", train_out, "Output model JSON")->required();
  train->add_option("--log", train_log, "Fit log CSV (default: <out>_fit.csv)");

  // score
  std::string score_model, score_corpus, score_out;
  auto* score = app.add_subcommand("score", "Score waveforms under a model");
  score->add_option("model", score_model, "Model JSON")->required();
  score->add_option("corpus", score_corpus, "Corpus CSV")->required();
  score->add_option("--out", score_out, "Output scores CSV")->required();

  // segment
  std::string seg_model, seg_corpus, seg_out, seg_plot;
  auto* segment = app.add_subcommand("segment", "Viterbi-segment waveforms");
  segment->add_option("model", seg_model, "Model JSON")->required();
  segment->add_option("corpus", seg_corpus, "Corpus CSV")->required();
  segment->add_option("--out", seg_out, "Output segments JSON")->required();
  segment->add_option("--plot", seg_plot,
                      "Plot-ready CSV (default: <out>_plot.csv)");

  // predict
  std::string pred_model, pred_corpus, pred_out;
  auto* predict = app.add_subcommand("predict", "One-step-ahead prediction");
  predict->add_option("model", pred_model, "Model JSON")->required();
  predict->add_option("corpus", pred_corpus, "Corpus CSV")->required();
  predict->add_option("--out", pred_out, "Output predictions CSV")->required();

  // classify
  std::string cls_pos, cls_neg, cls_out, cls_summary;
  reshmm::CvConfig cv_config;
  auto* classify = app.add_subcommand(
      "classify", "Nested cross-validated k-NN over model scores");
  classify->add_option("positives", cls_pos, "Positive-class corpus CSV")
      ->required();
  classify->add_option("negatives", cls_neg, "Negative-class corpus CSV")
      ->required();
  classify->add_option("--states", cv_config.model.num_states, "Number of states")
      ->required();
  classify->add_option("--dmax", cv_config.model.d_max, "Duration bound");
  classify->add_option("--max-iter", cv_config.model.max_iter, "EM iteration cap");
  classify->add_option("--tol", cv_config.model.rel_tol, "EM tolerance");
  classify->add_option("--k", cv_config.k_values, "k values");
  classify->add_option("--seed", cv_config.seed, "Seed");
  classify->add_option("--out", cls_out, "Accuracy table CSV")->required();
  classify->add_option("--summary", cls_summary,
                       "Summary JSON (default: <out>_summary.json)");

  // generate
  std::string gen_model, gen_preset, gen_out, gen_truth;
  reshmm::GeneratorConfig gen_config;
  auto* generate = app.add_subcommand("generate", "Sample a synthetic corpus");
  auto* gm = generate->add_option("--model", gen_model, "Model JSON to sample from");
  generate->add_option("--preset", gen_preset, "Built-in preset (demo-a, demo-b)")
      ->excludes(gm);
  generate->add_option("--n", gen_config.n, "Corpus size")->required();
  generate->add_option("--seed", gen_config.seed, "Seed");
  generate->add_option("--tcap", gen_config.t_cap, "Length cap (0: none)");
  generate->add_option("--out", gen_out, "Output corpus CSV")->required();
  generate->add_option("--truth", gen_truth, "Ground-truth JSON sidecar");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    reshmm::TrainingCorpus corpus = reshmm::read_corpus_csv(train_corpus);
    sort_by_id(corpus);
    fit_config.random_effects = !plain;
    const reshmm::FitReport report = reshmm::fit(corpus, fit_config);
    for (const auto& w : report.warnings) info(opt, "warning: " + w);
    if (opt.verbose)
      for (size_t i = 0; i < report.loglik_trace.size(); ++i)
        std::cerr << "iter " << i << " loglik "
                  << reshmm::format_double(report.loglik_trace[i]) << '\n';
    reshmm::save_model(train_out, report.params);
    const std::string log_path =
        train_log.empty() ? default_sidecar(train_out, "_fit.csv") : train_log;
    reshmm::write_fit_log_csv(log_path, report.loglik_trace);
    info(opt, "fit " + std::string(report.converged ? "converged" : "stopped") +
                  " after " + std::to_string(report.iterations) +
                  " iterations; model written to " + train_out);
    return 0;
  }

  if (score->parsed()) {
    const reshmm::ModelParams params = reshmm::load_model(score_model);
    reshmm::TrainingCorpus corpus = reshmm::read_corpus_csv(score_corpus);
    sort_by_id(corpus);
    std::vector<reshmm::ScoreVector> scores;
    for (const auto& w : corpus.waveforms) {
      scores.push_back(reshmm::score_waveform(w, params));
      if (!scores.back().supported())
        info(opt, "warning: waveform '" + w.id + "' has no support (-inf logp)");
    }
    reshmm::write_scores_csv(score_out, scores);
    return 0;
  }

  if (segment->parsed()) {
    const reshmm::ModelParams params = reshmm::load_model(seg_model);
    reshmm::TrainingCorpus corpus = reshmm::read_corpus_csv(seg_corpus);
    sort_by_id(corpus);
    std::vector<reshmm::SegmentationRecord> records;
    for (const auto& w : corpus.waveforms) {
      reshmm::SegmentationRecord rec;
      rec.id = w.id;
      try {
        rec.segmentation = reshmm::viterbi(w, params);
        rec.seg_mse = reshmm::segmentation_error(w, rec.segmentation);
      } catch (const reshmm::NumericalError&) {
        rec.supported = false;
        info(opt, "warning: waveform '" + w.id + "' has no valid path");
      }
      records.push_back(std::move(rec));
    }
    reshmm::write_text_file(seg_out, reshmm::segments_to_json(records));
    const std::string plot_path =
        seg_plot.empty() ? default_sidecar(seg_out, "_plot.csv") : seg_plot;
    reshmm::write_segment_plot_csv(plot_path, corpus, records);
    return 0;
  }

  if (predict->parsed()) {
    const reshmm::ModelParams params = reshmm::load_model(pred_model);
    reshmm::TrainingCorpus corpus = reshmm::read_corpus_csv(pred_corpus);
    sort_by_id(corpus);
    reshmm::PredictionFile file;
    for (const auto& w : corpus.waveforms) {
      const auto preds = reshmm::predict_all(w, params);
      double lp = 0.0, sse = 0.0;
      for (int t = 1; t <= w.length(); ++t) {
        const auto& p = preds[t - 1];
        file.rows.push_back(reshmm::PredictionRow{
            w.id, t, w.samples[t - 1], p.forecast, p.log_density});
        lp += p.log_density;
        const double r = w.samples[t - 1] - p.forecast;
        sse += r * r;
      }
      reshmm::PredictionReport rep;
      rep.mean_log_density = lp / w.length();
      rep.mse = sse / w.length();
      file.summaries.emplace_back(w.id, rep);
    }
    reshmm::write_predictions_csv(pred_out, file);
    return 0;
  }

  if (classify->parsed()) {
    reshmm::TrainingCorpus pos = reshmm::read_corpus_csv(cls_pos);
    reshmm::TrainingCorpus neg = reshmm::read_corpus_csv(cls_neg);
    sort_by_id(pos);
    sort_by_id(neg);
    const reshmm::AccuracyTable table = reshmm::cv_protocol(pos, neg, cv_config);
    reshmm::write_accuracy_csv(cls_out, table);
    const std::string summary_path =
        cls_summary.empty() ? default_sidecar(cls_out, "_summary.json")
                            : cls_summary;
    reshmm::write_text_file(summary_path, reshmm::accuracy_summary_json(table));
    info(opt, "best: feature_set=" + table.best_feature_set +
                  " k=" + std::to_string(table.best_k));
    return 0;
  }

  if (generate->parsed()) {
    if (gen_model.empty() && gen_preset.empty())
      throw reshmm::ConfigError("generate needs --model or --preset");
    gen_config.params = gen_model.empty() ? reshmm::preset_model(gen_preset)
                                          : reshmm::load_model(gen_model);
    const reshmm::SampledCorpus sampled = reshmm::sample_corpus(gen_config);
    reshmm::write_corpus_csv(gen_out, sampled.corpus);
    if (!gen_truth.empty())
      reshmm::write_text_file(gen_truth, reshmm::truth_to_json(sampled.truths));
    info(opt, "wrote " + std::to_string(gen_config.n) + " waveforms to " + gen_out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const reshmm::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const reshmm::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const reshmm::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
