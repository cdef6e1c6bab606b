#pragma once

#include "reshmm/segment_model.hpp"
#include "reshmm/types.hpp"

namespace reshmm {

// Explicit-duration forward-backward tables, all in natural-log domain.
//
//   log_alpha(t-1, k)     t = 1..T   log P(y_1:t, segment of state k ends at t)
//   log_alpha_star(t, k)  t = 0..T   log P(y_1:t, segment of state k starts at t+1)
//   log_beta(t, k)        t = 0..T   log P(y_t+1:T | segment of state k ends at t)
//   log_beta_star(t, k)   t = 0..T-1 log P(y_t+1:T | segment of state k starts at t+1)
//
// States k are 0-based columns. loglik = logsumexp_k log_alpha(T-1, k);
// it is exactly -inf when no segmentation has support.
struct ForwardBackwardTables {
  int T = 0;
  int M = 0;
  Eigen::MatrixXd log_alpha;
  Eigen::MatrixXd log_alpha_star;
  Eigen::MatrixXd log_beta;
  Eigen::MatrixXd log_beta_star;
  double loglik = kNegInf;
  bool has_backward = false;
};

// Forward pass only (alpha tables + loglik).
ForwardBackwardTables forward(const WaveformSeries& y, const ModelParams& params);

// Fill the backward tables into an existing forward result.
void backward(const WaveformSeries& y, const ModelParams& params,
              ForwardBackwardTables& tables);

ForwardBackwardTables forward_backward(const WaveformSeries& y,
                                       const ModelParams& params);

// Most likely complete segmentation, random effects marginalized out.
// Ties broken deterministically: smaller duration of the final segment,
// then smaller state index. Throws NumericalError when nothing has support.
Segmentation viterbi(const WaveformSeries& y, const ModelParams& params);

// Posterior over exact segment placements, plus the aggregates the M step
// needs. Only supported entries (finite log weight) are materialized.
struct SegmentPosterior {
  struct Entry {
    int state = 0;     // 0-based
    int start = 0;     // 1-based time index of the first sample
    int duration = 0;
    double log_weight = kNegInf;  // log posterior of exactly this placement
    SegmentStats stats;           // window sums, for the M-step aggregates
    SegmentExpectation expectation;
    double duration_log_prob = 0.0;  // log P(d | lambda_state)
  };

  std::vector<Entry> entries;
  // (M+1) x M expected counts; row 0 holds the initial-state indicators.
  Eigen::MatrixXd expected_transitions;
  double loglik = kNegInf;
};

SegmentPosterior segment_posteriors(const WaveformSeries& y,
                                    const ModelParams& params);

// log p(y_1:t) where the segment covering t may be incomplete: the sum over
// (state, segment start s, total duration d <= d_max with s+d-1 >= t) of the
// prefix forward mass, the duration tail, and the leading-coordinate marginal
// of the segment density. t = 0 returns 0.
double prefix_loglik(const WaveformSeries& y, const ModelParams& params, int t);

struct Prediction {
  double forecast = std::numeric_limits<double>::quiet_NaN();
  double log_density = kNegInf;  // log p(y_t | y_1:t-1)
};

// One-step-ahead prediction of y_t from y_1:t-1: the predictive log-density
// is the prefix-likelihood ratio, and the point forecast is the posterior
// mixture over active segment hypotheses of the conditioned segment mean.
Prediction predict_next(const WaveformSeries& y, const ModelParams& params, int t);

// All of t = 1..T with the forward tables computed once.
std::vector<Prediction> predict_all(const WaveformSeries& y,
                                    const ModelParams& params);

// log of sum of exp; returns -inf on an empty or all -inf input.
double logsumexp(std::span<const double> values);

}  // namespace reshmm
