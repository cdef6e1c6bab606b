#include "reshmm/evaluation.hpp"

#include <cmath>

#include "reshmm/inference.hpp"
#include "reshmm/parallel.hpp"
#include "reshmm/segment_model.hpp"

namespace reshmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace

ScoreVector score_waveform(const WaveformSeries& y, const ModelParams& params) {
  ScoreVector score;
  score.id = y.id;
  const SegmentPosterior post = segment_posteriors(y, params);
  score.logp = post.loglik;
  if (post.loglik == kNegInf) {
    score.score_shape = kNegInf;
    score.score_noise = kNegInf;
    return score;
  }

  const int M = params.num_states;
  std::vector<PsiInverse> psi_inv;
  psi_inv.reserve(M);
  for (const auto& st : params.states)
    psi_inv.push_back(invert_psi(st.psi, /*zero_shortcut=*/false));

  // Transition and initial terms.
  double shape = 0.0;
  for (int r = 0; r <= M; ++r) {
    for (int k = 0; k < M; ++k) {
      const double c = post.expected_transitions(r, k);
      if (c == 0.0) continue;
      shape += c * params.log_transition(r, k);
    }
  }
  // Duration and effect-prior terms, and the conditional observation term.
  double noise = 0.0;
  const double log_s2 = std::log(params.sigma2);
  for (const auto& e : post.entries) {
    const double w = std::exp(e.log_weight);
    shape += w * e.duration_log_prob;
    const auto& pinv = psi_inv[e.state];
    shape += w * (-kLog2Pi - 0.5 * pinv.log_det -
                  0.5 * (pinv.inv * e.expectation.post.second_moment()).trace());
    noise += w * (-0.5 * e.duration * (kLog2Pi + log_s2) -
                  (e.expectation.cond_rss + e.expectation.cond_trace) /
                      (2.0 * params.sigma2));
  }
  score.score_shape = shape;
  score.score_noise = noise;
  return score;
}

std::vector<double> segmentation_fitted(const WaveformSeries& y,
                                        const Segmentation& seg) {
  std::vector<double> fitted(y.length(),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& s : seg.segments) {
    const int lo = s.start - 1;
    if (s.duration == 1) {
      fitted[lo] = y.samples[lo];  // slope pinned to 0
      continue;
    }
    SegmentStats stats;
    for (int i = 0; i < s.duration; ++i) stats.append_back(y.samples[lo + i]);
    const Eigen::Matrix2d xtx = design_moments(s.duration).xtx();
    const double det = xtx(0, 0) * xtx(1, 1) - xtx(0, 1) * xtx(1, 0);
    Eigen::Matrix2d inv;
    inv << xtx(1, 1), -xtx(0, 1), -xtx(1, 0), xtx(0, 0);
    const Eigen::Vector2d coef = (inv / det) * Eigen::Vector2d(stats.sy, stats.sty);
    for (int i = 0; i < s.duration; ++i) fitted[lo + i] = coef(0) + coef(1) * i;
  }
  return fitted;
}

double segmentation_error(const WaveformSeries& y, const Segmentation& seg) {
  const std::vector<double> fitted = segmentation_fitted(y, seg);
  double sse = 0.0;
  for (int i = 0; i < y.length(); ++i) {
    const double r = y.samples[i] - fitted[i];
    sse += r * r;
  }
  return sse / y.length();
}

double segmentation_error(const WaveformSeries& y, const ModelParams& params) {
  return segmentation_error(y, viterbi(y, params));
}

PredictionReport prediction_report(const WaveformSeries& y,
                                   const ModelParams& params) {
  if (y.length() < 2) throw ConfigError("prediction needs at least 2 samples");
  const std::vector<Prediction> preds = predict_all(y, params);
  PredictionReport rep;
  double lp = 0.0;
  double sse = 0.0;
  for (int t = 1; t <= y.length(); ++t) {
    const auto& p = preds[t - 1];
    lp += p.log_density;
    const double r = y.samples[t - 1] - p.forecast;
    sse += r * r;
  }
  rep.mean_log_density = lp / y.length();
  rep.mse = sse / y.length();
  return rep;
}

EvalReport evaluate_corpus(const TrainingCorpus& corpus,
                           const ModelParams& params) {
  corpus.validate();
  const int n = static_cast<int>(corpus.waveforms.size());
  std::vector<double> logp(n), pred_lp(n), pred_mse(n), seg_mse(n);
  parallel_for(n, [&](int i) {
    const auto& w = corpus.waveforms[i];
    logp[i] = forward(w, params).loglik;
    const PredictionReport pr = prediction_report(w, params);
    pred_lp[i] = pr.mean_log_density;
    pred_mse[i] = pr.mse;
    seg_mse[i] = segmentation_error(w, params);
  });
  EvalReport rep;
  for (int i = 0; i < n; ++i) {
    rep.mean_logp += logp[i];
    rep.mean_pred_log_density += pred_lp[i];
    rep.pred_mse += pred_mse[i];
    rep.seg_mse += seg_mse[i];
  }
  rep.mean_logp /= n;
  rep.mean_pred_log_density /= n;
  rep.pred_mse /= n;
  rep.seg_mse /= n;
  return rep;
}

}  // namespace reshmm
