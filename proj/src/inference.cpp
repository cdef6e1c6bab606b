#include "reshmm/inference.hpp"

#include <algorithm>
#include <cmath>

namespace reshmm {

double logsumexp(std::span<const double> values) {
  double m = kNegInf;
  for (double v : values) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

namespace {

// Per-state duration log pmf for d = 1..d_max plus log tail sums
// log sum_{d >= m} P(d); the pmf is not renormalized after truncation.
struct DurationTable {
  Eigen::MatrixXd log_pmf;   // M x (d_max + 1), column d
  Eigen::MatrixXd log_tail;  // M x (d_max + 2), column m; m = d_max+1 is -inf

  DurationTable(const ModelParams& p) {
    const int M = p.num_states;
    const int D = p.d_max;
    log_pmf.setConstant(M, D + 1, kNegInf);
    log_tail.setConstant(M, D + 2, kNegInf);
    for (int k = 0; k < M; ++k) {
      double tail = 0.0;
      for (int d = D; d >= 1; --d) {
        log_pmf(k, d) = duration_log_pmf(d, p.states[k].lambda);
        tail += std::exp(log_pmf(k, d));
        log_tail(k, d) = tail > 0.0 ? std::log(tail) : kNegInf;
      }
    }
  }
};

struct Context {
  const WaveformSeries& y;
  const ModelParams& p;
  std::vector<SegmentEvaluator> evals;
  DurationTable dur;

  Context(const WaveformSeries& y_in, const ModelParams& p_in)
      : y(y_in), p(p_in), dur(p_in) {
    p.validate();
    y.validate();
    if (!(p.sigma2 > 0.0))
      throw ConfigError("inference requires sigma2 > 0");
    evals.reserve(p.num_states);
    for (const auto& s : p.states) evals.emplace_back(s, p.sigma2);
  }
};

void run_forward(const Context& ctx, ForwardBackwardTables& tb) {
  const int T = ctx.y.length();
  const int M = ctx.p.num_states;
  const auto& y = ctx.y.samples;

  tb.T = T;
  tb.M = M;
  tb.log_alpha.setConstant(T, M, kNegInf);
  tb.log_alpha_star.setConstant(T + 1, M, kNegInf);

  for (int k = 0; k < M; ++k)
    tb.log_alpha_star(0, k) = ctx.p.log_transition(0, k);

  std::vector<std::vector<double>> terms(M);
  for (int t = 1; t <= T; ++t) {
    for (auto& v : terms) v.clear();
    SegmentStats stats;
    const int dcap = std::min(t, ctx.p.d_max);
    for (int d = 1; d <= dcap; ++d) {
      stats.prepend_front(y[t - d]);  // sample at time t-d+1
      for (int k = 0; k < M; ++k) {
        const double as = tb.log_alpha_star(t - d, k);
        if (as == kNegInf) continue;
        terms[k].push_back(as + ctx.dur.log_pmf(k, d) +
                           ctx.evals[k].loglik(stats));
      }
    }
    for (int k = 0; k < M; ++k) tb.log_alpha(t - 1, k) = logsumexp(terms[k]);

    for (int k = 0; k < M; ++k) {
      double m = kNegInf;
      for (int l = 0; l < M; ++l) {
        const double a = ctx.p.log_transition(l + 1, k);
        if (a == kNegInf) continue;
        m = std::max(m, tb.log_alpha(t - 1, l) + a);
      }
      if (m == kNegInf) {
        tb.log_alpha_star(t, k) = kNegInf;
        continue;
      }
      double s = 0.0;
      for (int l = 0; l < M; ++l) {
        const double a = ctx.p.log_transition(l + 1, k);
        if (a == kNegInf) continue;
        const double v = tb.log_alpha(t - 1, l) + a;
        if (v != kNegInf) s += std::exp(v - m);
      }
      tb.log_alpha_star(t, k) = m + std::log(s);
    }
  }
  std::vector<double> final_alpha(M);
  for (int k = 0; k < M; ++k) final_alpha[k] = tb.log_alpha(T - 1, k);
  tb.loglik = logsumexp(final_alpha);
}

void run_backward(const Context& ctx, ForwardBackwardTables& tb) {
  const int T = ctx.y.length();
  const int M = ctx.p.num_states;
  const auto& y = ctx.y.samples;

  tb.log_beta.setConstant(T + 1, M, kNegInf);
  tb.log_beta_star.setConstant(T, M, kNegInf);
  tb.log_beta.row(T).setZero();  // any state may be last

  std::vector<std::vector<double>> terms(M);
  for (int t = T - 1; t >= 0; --t) {
    for (auto& v : terms) v.clear();
    SegmentStats stats;
    const int dcap = std::min(T - t, ctx.p.d_max);
    for (int d = 1; d <= dcap; ++d) {
      stats.append_back(y[t + d - 1]);  // sample at time t+d
      for (int k = 0; k < M; ++k) {
        const double b = tb.log_beta(t + d, k);
        if (b == kNegInf) continue;
        terms[k].push_back(ctx.dur.log_pmf(k, d) + ctx.evals[k].loglik(stats) + b);
      }
    }
    for (int k = 0; k < M; ++k) tb.log_beta_star(t, k) = logsumexp(terms[k]);

    for (int k = 0; k < M; ++k) {
      std::vector<double> out;
      out.reserve(M);
      for (int l = 0; l < M; ++l) {
        const double a = ctx.p.log_transition(k + 1, l);
        if (a == kNegInf) continue;
        const double v = a + tb.log_beta_star(t, l);
        if (v != kNegInf) out.push_back(v);
      }
      tb.log_beta(t, k) = logsumexp(out);
    }
  }
  tb.has_backward = true;
}

}  // namespace

ForwardBackwardTables forward(const WaveformSeries& y, const ModelParams& params) {
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);
  return tb;
}

void backward(const WaveformSeries& y, const ModelParams& params,
              ForwardBackwardTables& tables) {
  Context ctx(y, params);
  run_backward(ctx, tables);
}

ForwardBackwardTables forward_backward(const WaveformSeries& y,
                                       const ModelParams& params) {
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);
  run_backward(ctx, tb);
  return tb;
}

Segmentation viterbi(const WaveformSeries& y, const ModelParams& params) {
  Context ctx(y, params);
  const int T = y.length();
  const int M = params.num_states;
  const auto& samples = y.samples;

  Eigen::MatrixXd v(T, M);          // best log joint of a segment ending at t
  Eigen::MatrixXd v_star(T + 1, M); // best log joint of a segment starting at t+1
  Eigen::MatrixXi best_d(T, M);
  Eigen::MatrixXi best_prev(T + 1, M);
  v.setConstant(kNegInf);
  v_star.setConstant(kNegInf);
  best_d.setConstant(0);
  best_prev.setConstant(-1);

  for (int k = 0; k < M; ++k) v_star(0, k) = params.log_transition(0, k);

  for (int t = 1; t <= T; ++t) {
    SegmentStats stats;
    const int dcap = std::min(t, params.d_max);
    for (int d = 1; d <= dcap; ++d) {
      stats.prepend_front(samples[t - d]);
      for (int k = 0; k < M; ++k) {
        const double vs = v_star(t - d, k);
        if (vs == kNegInf) continue;
        const double cand =
            vs + ctx.dur.log_pmf(k, d) + ctx.evals[k].loglik(stats);
        if (cand > v(t - 1, k)) {  // ties keep the smaller duration
          v(t - 1, k) = cand;
          best_d(t - 1, k) = d;
        }
      }
    }
    for (int k = 0; k < M; ++k) {
      for (int l = 0; l < M; ++l) {
        const double a = params.log_transition(l + 1, k);
        if (a == kNegInf) continue;
        const double cand = v(t - 1, l) + a;
        if (cand > v_star(t, k)) {  // ties keep the smaller state
          v_star(t, k) = cand;
          best_prev(t, k) = l;
        }
      }
    }
  }

  // Final state: ties prefer the smaller final duration, then smaller index.
  int k_best = -1, d_best = 0;
  double score = kNegInf;
  for (int k = 0; k < M; ++k) {
    const double s = v(T - 1, k);
    if (s == kNegInf) continue;
    const int d = best_d(T - 1, k);
    if (s > score || (s == score && (d < d_best || (d == d_best && k < k_best)))) {
      score = s;
      k_best = k;
      d_best = d;
    }
  }
  if (k_best < 0)
    throw NumericalError("no segmentation of waveform '" + y.id +
                         "' has support under the model");

  Segmentation seg;
  seg.log_joint = score;
  int t = T, k = k_best;
  while (t > 0) {
    const int d = best_d(t - 1, k);
    seg.segments.push_back(Segment{k + 1, t - d + 1, d});
    const int boundary = t - d;
    if (boundary == 0) break;
    k = best_prev(boundary, k);
    t = boundary;
  }
  std::reverse(seg.segments.begin(), seg.segments.end());
  return seg;
}

SegmentPosterior segment_posteriors(const WaveformSeries& y,
                                    const ModelParams& params) {
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);

  const int T = y.length();
  const int M = params.num_states;
  SegmentPosterior post;
  post.loglik = tb.loglik;
  post.expected_transitions.setZero(M + 1, M);
  if (tb.loglik == kNegInf) return post;

  run_backward(ctx, tb);

  // Exact segment placements.
  for (int s = 1; s <= T; ++s) {
    SegmentStats stats;
    const int dcap = std::min(T - s + 1, params.d_max);
    for (int d = 1; d <= dcap; ++d) {
      stats.append_back(y.samples[s + d - 2]);
      for (int k = 0; k < M; ++k) {
        const double as = tb.log_alpha_star(s - 1, k);
        const double b = tb.log_beta(s - 1 + d, k);
        if (as == kNegInf || b == kNegInf) continue;
        const double dur_lp = ctx.dur.log_pmf(k, d);
        const double lw =
            as + dur_lp + ctx.evals[k].loglik(stats) + b - tb.loglik;
        if (lw == kNegInf) continue;
        SegmentPosterior::Entry e;
        e.state = k;
        e.start = s;
        e.duration = d;
        e.log_weight = lw;
        e.duration_log_prob = dur_lp;
        e.stats = stats;
        e.expectation = ctx.evals[k].expectation(stats);
        post.entries.push_back(std::move(e));
      }
    }
  }

  // Initial-state indicators and expected transition counts.
  for (int k = 0; k < M; ++k) {
    const double v = params.log_transition(0, k) + tb.log_beta_star(0, k) - tb.loglik;
    if (v != kNegInf) post.expected_transitions(0, k) = std::exp(v);
  }
  for (int t = 1; t <= T - 1; ++t) {
    for (int l = 0; l < M; ++l) {
      const double a = tb.log_alpha(t - 1, l);
      if (a == kNegInf) continue;
      for (int k = 0; k < M; ++k) {
        const double tr = params.log_transition(l + 1, k);
        if (tr == kNegInf) continue;
        const double bs = tb.log_beta_star(t, k);
        if (bs == kNegInf) continue;
        post.expected_transitions(l + 1, k) += std::exp(a + tr + bs - tb.loglik);
      }
    }
  }
  return post;
}

namespace {

double prefix_from_tables(const Context& ctx, const ForwardBackwardTables& tb,
                          int t) {
  if (t == 0) return 0.0;
  const int M = ctx.p.num_states;
  std::vector<double> terms;
  terms.reserve(static_cast<size_t>(M) * ctx.p.d_max);
  SegmentStats stats;
  const int mcap = std::min(t, ctx.p.d_max);
  for (int m = 1; m <= mcap; ++m) {
    stats.prepend_front(ctx.y.samples[t - m]);
    for (int k = 0; k < M; ++k) {
      const double as = tb.log_alpha_star(t - m, k);
      if (as == kNegInf) continue;
      const double tail = ctx.dur.log_tail(k, m);
      if (tail == kNegInf) continue;
      terms.push_back(as + tail + ctx.evals[k].loglik(stats));
    }
  }
  return logsumexp(terms);
}

// Posterior-weighted mixture forecast of y_t from y_1:t-1. Hypotheses are
// the (state, samples-already-seen) pairs whose segment covers t; for each,
// the conditioned segment mean at the next local time is x'(beta + u_hat).
double forecast_at(const Context& ctx, const ForwardBackwardTables& tb, int t) {
  const int M = ctx.p.num_states;
  std::vector<double> log_w;
  std::vector<double> value;
  SegmentStats stats;
  const int mcap = std::min(t - 1, ctx.p.d_max - 1);
  for (int m = 0; m <= mcap; ++m) {
    if (m >= 1) stats.prepend_front(ctx.y.samples[t - 1 - m]);
    for (int k = 0; k < M; ++k) {
      const double as = tb.log_alpha_star(t - 1 - m, k);
      if (as == kNegInf) continue;
      const double tail = ctx.dur.log_tail(k, m + 1);
      if (tail == kNegInf) continue;
      double lw = as + tail;
      Eigen::Vector2d coef = ctx.p.states[k].beta;
      if (m >= 1) {
        lw += ctx.evals[k].loglik(stats);
        coef += ctx.evals[k].expectation(stats).post.u_hat;
      }
      if (lw == kNegInf) continue;
      log_w.push_back(lw);
      value.push_back(coef(0) + coef(1) * m);
    }
  }
  const double log_z = logsumexp(log_w);
  if (log_z == kNegInf) return std::numeric_limits<double>::quiet_NaN();
  double f = 0.0;
  for (size_t i = 0; i < log_w.size(); ++i)
    f += std::exp(log_w[i] - log_z) * value[i];
  return f;
}

}  // namespace

double prefix_loglik(const WaveformSeries& y, const ModelParams& params, int t) {
  if (t < 0 || t > y.length())
    throw ConfigError("prefix time index out of range");
  if (t == 0) return 0.0;
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);
  return prefix_from_tables(ctx, tb, t);
}

Prediction predict_next(const WaveformSeries& y, const ModelParams& params, int t) {
  if (t < 1 || t > y.length())
    throw ConfigError("prediction time index out of range");
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);
  Prediction pred;
  const double before = prefix_from_tables(ctx, tb, t - 1);
  const double after = prefix_from_tables(ctx, tb, t);
  pred.log_density = (before == kNegInf) ? kNegInf : after - before;
  pred.forecast = forecast_at(ctx, tb, t);
  return pred;
}

std::vector<Prediction> predict_all(const WaveformSeries& y,
                                    const ModelParams& params) {
  Context ctx(y, params);
  ForwardBackwardTables tb;
  run_forward(ctx, tb);
  const int T = y.length();
  std::vector<double> prefix(T + 1);
  for (int t = 0; t <= T; ++t) prefix[t] = prefix_from_tables(ctx, tb, t);
  std::vector<Prediction> out(T);
  for (int t = 1; t <= T; ++t) {
    out[t - 1].log_density =
        (prefix[t - 1] == kNegInf) ? kNegInf : prefix[t] - prefix[t - 1];
    out[t - 1].forecast = forecast_at(ctx, tb, t);
  }
  return out;
}

}  // namespace reshmm
