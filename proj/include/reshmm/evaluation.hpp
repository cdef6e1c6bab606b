#pragma once

#include "reshmm/types.hpp"

namespace reshmm {

// Per-waveform evaluation features. score_shape collects the expected
// transition, duration, and effect-prior terms of the complete-data
// log-likelihood; score_noise the expected conditional observation term.
// Expectations are exact under the segment posterior.
struct ScoreVector {
  std::string id;
  double logp = kNegInf;
  double score_shape = kNegInf;
  double score_noise = kNegInf;

  bool supported() const { return std::isfinite(logp); }
};

ScoreVector score_waveform(const WaveformSeries& y, const ModelParams& params);

// Viterbi-segment the waveform, refit each segment by plain OLS (duration-1
// segments pin the slope to 0), and return the mean squared residual over
// all T samples.
double segmentation_error(const WaveformSeries& y, const ModelParams& params);
double segmentation_error(const WaveformSeries& y, const Segmentation& seg);

// Per-segment OLS refit values, aligned with the waveform samples.
std::vector<double> segmentation_fitted(const WaveformSeries& y,
                                        const Segmentation& seg);

struct PredictionReport {
  double mean_log_density = kNegInf;
  double mse = 0.0;
};

// One-step-ahead predictive log-density and squared forecast error,
// averaged over t = 1..T.
PredictionReport prediction_report(const WaveformSeries& y,
                                   const ModelParams& params);

struct EvalReport {
  double mean_logp = 0.0;
  double mean_pred_log_density = 0.0;
  double pred_mse = 0.0;
  double seg_mse = 0.0;
};

EvalReport evaluate_corpus(const TrainingCorpus& corpus,
                           const ModelParams& params);

}  // namespace reshmm
