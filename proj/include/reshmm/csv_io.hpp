#pragma once

#include <string>
#include <vector>

#include "reshmm/evaluation.hpp"
#include "reshmm/classify.hpp"
#include "reshmm/synth.hpp"
#include "reshmm/types.hpp"

namespace reshmm {

// Shortest exact decimal form; parses back to the identical double.
// Infinities serialize as "inf"/"-inf", NaN as "nan".
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);

// Long-format corpus CSV: header `waveform_id,t,y`, rows grouped by id with
// t contiguous from 1. Malformed rows raise DataError naming the line.
TrainingCorpus read_corpus_csv(const std::string& path);
void write_corpus_csv(const std::string& path, const TrainingCorpus& corpus);

// `id,logp,score_shape,score_noise`; -inf logp marks unsupported waveforms.
void write_scores_csv(const std::string& path,
                      const std::vector<ScoreVector>& scores);
std::vector<ScoreVector> read_scores_csv(const std::string& path);

// `iter,loglik`
void write_fit_log_csv(const std::string& path,
                       const std::vector<double>& loglik_trace);
std::vector<double> read_fit_log_csv(const std::string& path);

// `id,t,y,forecast,pred_logp`, one block per waveform followed by a summary
// row with t = "mean" carrying the per-waveform MSE and mean log-density.
struct PredictionRow {
  std::string id;
  int t = 0;
  double y = 0.0;
  double forecast = 0.0;
  double pred_logp = 0.0;
};
struct PredictionFile {
  std::vector<PredictionRow> rows;
  std::vector<std::pair<std::string, PredictionReport>> summaries;
};
void write_predictions_csv(const std::string& path, const PredictionFile& file);
PredictionFile read_predictions_csv(const std::string& path);

// `feature_set,k,fold,accuracy`
void write_accuracy_csv(const std::string& path, const AccuracyTable& table);
std::vector<AccuracyRow> read_accuracy_csv(const std::string& path);
std::string accuracy_summary_json(const AccuracyTable& table);

// Viterbi output: JSON array of {id, supported, segments, log_joint, seg_mse}
// plus a plot-ready CSV `id,t,y,state,fitted`.
struct SegmentationRecord {
  std::string id;
  bool supported = true;
  Segmentation segmentation;
  double seg_mse = 0.0;
};
std::string segments_to_json(const std::vector<SegmentationRecord>& records);
std::vector<SegmentationRecord> segments_from_json(const std::string& text);
void write_segment_plot_csv(const std::string& path,
                            const TrainingCorpus& corpus,
                            const std::vector<SegmentationRecord>& records);

// Ground-truth sidecar for generated corpora:
// [{id, segments:[{state,start,duration,truncated}], u:[{state,u0,u1}]}]
std::string truth_to_json(const std::vector<WaveformTruth>& truths);
std::vector<WaveformTruth> truth_from_json(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace reshmm
