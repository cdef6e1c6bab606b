#include "reshmm/learning.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "reshmm/parallel.hpp"

namespace reshmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLambdaFloor = 1e-6;
constexpr double kSigma2Floor = 1e-10;

Eigen::Matrix2d psd_floor(const Eigen::Matrix2d& m) {
  Eigen::Matrix2d sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void EStepStats::resize(int M) {
  num_states = M;
  total_loglik = 0.0;
  per_waveform_loglik.clear();
  trans_counts.setZero(M + 1, M);
  w_sum.assign(M, 0.0);
  wd1_sum.assign(M, 0.0);
  wd_sum.assign(M, 0.0);
  wlgd_sum.assign(M, 0.0);
  sxx.assign(M, Eigen::Matrix2d::Zero());
  sxv.assign(M, Eigen::Vector2d::Zero());
  svv.assign(M, 0.0);
  strace.assign(M, 0.0);
  suu.assign(M, Eigen::Matrix2d::Zero());
}

void EStepStats::accumulate(const SegmentPosterior& post, const ModelParams&) {
  trans_counts += post.expected_transitions;
  for (const auto& e : post.entries) {
    const double w = std::exp(e.log_weight);
    const int k = e.state;
    const double d = e.duration;
    w_sum[k] += w;
    wd1_sum[k] += w * (d - 1.0);
    wd_sum[k] += w * d;
    wlgd_sum[k] += w * std::lgamma(d);

    const Eigen::Matrix2d xtx = design_moments(e.duration).xtx();
    const Eigen::Vector2d xty(e.stats.sy, e.stats.sty);
    const Eigen::Vector2d& uh = e.expectation.post.u_hat;
    sxx[k] += w * xtx;
    sxv[k] += w * (xty - xtx * uh);
    svv[k] += w * (e.stats.syy - 2.0 * uh.dot(xty) + uh.dot(xtx * uh));
    strace[k] += w * e.expectation.cond_trace;
    suu[k] += w * e.expectation.post.second_moment();
  }
}

void EStepStats::add(const EStepStats& other) {
  total_loglik += other.total_loglik;
  per_waveform_loglik.insert(per_waveform_loglik.end(),
                             other.per_waveform_loglik.begin(),
                             other.per_waveform_loglik.end());
  trans_counts += other.trans_counts;
  for (int k = 0; k < num_states; ++k) {
    w_sum[k] += other.w_sum[k];
    wd1_sum[k] += other.wd1_sum[k];
    wd_sum[k] += other.wd_sum[k];
    wlgd_sum[k] += other.wlgd_sum[k];
    sxx[k] += other.sxx[k];
    sxv[k] += other.sxv[k];
    svv[k] += other.svv[k];
    strace[k] += other.strace[k];
    suu[k] += other.suu[k];
  }
}

EStepStats e_step(const TrainingCorpus& corpus, const ModelParams& params) {
  corpus.validate();
  params.validate();
  const int n = static_cast<int>(corpus.waveforms.size());

  std::vector<EStepStats> partial(n);
  parallel_for(n, [&](int i) {
    const SegmentPosterior post = segment_posteriors(corpus.waveforms[i], params);
    partial[i].resize(params.num_states);
    partial[i].total_loglik = post.loglik;
    partial[i].per_waveform_loglik.push_back(post.loglik);
    if (post.loglik != kNegInf) partial[i].accumulate(post, params);
  });

  // Reduce in id order so the aggregate is invariant to corpus permutation.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return corpus.waveforms[a].id < corpus.waveforms[b].id;
  });

  EStepStats stats;
  stats.resize(params.num_states);
  std::vector<double> loglik_by_input(n);
  for (int i : order) {
    if (partial[i].total_loglik == kNegInf)
      throw NumericalError("waveform '" + corpus.waveforms[i].id +
                           "' has no support under the model (-inf loglik); "
                           "increase d_max or reduce the number of states");
    stats.add(partial[i]);
    loglik_by_input[i] = partial[i].total_loglik;
  }
  stats.per_waveform_loglik = std::move(loglik_by_input);
  return stats;
}

MStepResult m_step(const EStepStats& stats, const ModelParams& previous) {
  const int M = previous.num_states;
  MStepResult out;
  out.params = previous;

  // Transition rows: normalized expected counts, zero structure untouched;
  // rows with no mass keep their previous values.
  for (int r = 0; r <= M; ++r) {
    const double row_sum = stats.trans_counts.row(r).sum();
    if (row_sum > 0.0)
      out.params.transitions.row(r) = stats.trans_counts.row(r) / row_sum;
  }

  double sigma_num = 0.0;
  double sigma_den = 0.0;
  for (int k = 0; k < M; ++k) {
    auto& st = out.params.states[k];
    const double w = stats.w_sum[k];
    if (w < 1e-12) {
      out.warnings.push_back("state " + std::to_string(k + 1) +
                             " received no responsibility; parameters frozen");
      continue;
    }
    st.lambda = std::max(stats.wd1_sum[k] / w, kLambdaFloor);
    st.psi = psd_floor(stats.suu[k] / w);

    const Eigen::Matrix2d& sxx = stats.sxx[k];
    const double det = sxx(0, 0) * sxx(1, 1) - sxx(0, 1) * sxx(1, 0);
    const double mean_diag = 0.5 * (sxx(0, 0) + sxx(1, 1));
    if (det > 1e-12 * mean_diag * mean_diag) {
      Eigen::Matrix2d inv;
      inv << sxx(1, 1), -sxx(0, 1), -sxx(1, 0), sxx(0, 0);
      st.beta = (inv / det) * stats.sxv[k];
    } else {
      out.warnings.push_back("state " + std::to_string(k + 1) +
                             " has a singular design moment; beta frozen");
    }
    sigma_num += stats.svv[k] - 2.0 * st.beta.dot(stats.sxv[k]) +
                 st.beta.dot(sxx * st.beta) + stats.strace[k];
    sigma_den += stats.wd_sum[k];
  }
  if (sigma_den > 0.0)
    out.params.sigma2 = std::max(sigma_num / sigma_den, kSigma2Floor);
  return out;
}

double q_function(const EStepStats& stats, const ModelParams& params) {
  const int M = params.num_states;
  double q = 0.0;
  for (int r = 0; r <= M; ++r) {
    for (int k = 0; k < M; ++k) {
      const double c = stats.trans_counts(r, k);
      if (c == 0.0) continue;
      q += c * params.log_transition(r, k);
    }
  }
  const double log_s2 = std::log(params.sigma2);
  for (int k = 0; k < M; ++k) {
    const auto& st = params.states[k];
    const double w = stats.w_sum[k];
    q += -st.lambda * w + stats.wd1_sum[k] * std::log(st.lambda) - stats.wlgd_sum[k];
    q += -0.5 * stats.wd_sum[k] * (kLog2Pi + log_s2) -
         (stats.svv[k] - 2.0 * st.beta.dot(stats.sxv[k]) +
          st.beta.dot(stats.sxx[k] * st.beta) + stats.strace[k]) /
             (2.0 * params.sigma2);
    const PsiInverse pinv = invert_psi(st.psi, /*zero_shortcut=*/false);
    q += -w * kLog2Pi - 0.5 * w * pinv.log_det -
         0.5 * (pinv.inv * stats.suu[k]).trace();
  }
  return q;
}

ModelParams initialize(const TrainingCorpus& corpus, int num_states, int d_max,
                       std::uint64_t /*seed*/) {
  corpus.validate();
  if (num_states < 1) throw ConfigError("number of states must be at least 1");
  if (d_max < 1) throw ConfigError("d_max must be at least 1");
  const int M = num_states;
  const int n = static_cast<int>(corpus.waveforms.size());

  // Uniform M-way span split of each waveform; span k covers sample indices
  // [floor(kT/M), floor((k+1)T/M)). Short waveforms leave some spans empty.
  struct SpanAgg {
    Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
    Eigen::Vector2d xty = Eigen::Vector2d::Zero();
    double yy = 0.0;
    double count = 0.0;
    double len_sum = 0.0;
    int len_n = 0;
    std::vector<Eigen::Vector2d> per_waveform_coef;
  };
  std::vector<SpanAgg> spans(M);

  // Iterate in id order so initialization is permutation invariant.
  std::vector<const WaveformSeries*> ordered;
  ordered.reserve(corpus.waveforms.size());
  for (const auto& w : corpus.waveforms) ordered.push_back(&w);
  std::sort(ordered.begin(), ordered.end(),
            [](const WaveformSeries* a, const WaveformSeries* b) {
              return a->id < b->id;
            });

  for (const WaveformSeries* wp : ordered) {
    const auto& w = *wp;
    const int T = w.length();
    for (int k = 0; k < M; ++k) {
      const int lo = static_cast<int>(static_cast<long long>(k) * T / M);
      const int hi = static_cast<int>(static_cast<long long>(k + 1) * T / M);
      const int len = hi - lo;
      if (len <= 0) continue;
      SegmentStats stats;
      for (int i = lo; i < hi; ++i) stats.append_back(w.samples[i]);
      auto& agg = spans[k];
      const DesignMoments dm = design_moments(len);
      agg.xtx += dm.xtx();
      agg.xty += Eigen::Vector2d(stats.sy, stats.sty);
      agg.yy += stats.syy;
      agg.count += len;
      agg.len_sum += len;
      agg.len_n += 1;

      Eigen::Vector2d coef(stats.sy / len, 0.0);
      if (len >= 2) {
        const Eigen::Matrix2d x = dm.xtx();
        const double det = x(0, 0) * x(1, 1) - x(0, 1) * x(1, 0);
        if (det > 0.0) {
          Eigen::Matrix2d inv;
          inv << x(1, 1), -x(0, 1), -x(1, 0), x(0, 0);
          coef = (inv / det) * Eigen::Vector2d(stats.sy, stats.sty);
        }
      }
      agg.per_waveform_coef.push_back(coef);
    }
  }

  ModelParams params;
  params.num_states = M;
  params.d_max = d_max;
  params.states.resize(M);
  params.transitions.setZero(M + 1, M);
  params.transitions.row(0).setConstant(1.0 / M);
  for (int k = 1; k < M; ++k)
    for (int c = k; c < M; ++c) params.transitions(k, c) = 1.0 / (M - k);

  double rss = 0.0;
  double count = 0.0;
  for (int k = 0; k < M; ++k) {
    const auto& agg = spans[k];
    if (agg.len_n == 0)
      throw ConfigError("span " + std::to_string(k + 1) +
                        " is empty for every waveform; reduce the number of states");
    auto& st = params.states[k];

    const double det = agg.xtx(0, 0) * agg.xtx(1, 1) - agg.xtx(0, 1) * agg.xtx(1, 0);
    if (det > 1e-12 * agg.xtx(0, 0) * agg.xtx(0, 0)) {
      Eigen::Matrix2d inv;
      inv << agg.xtx(1, 1), -agg.xtx(0, 1), -agg.xtx(1, 0), agg.xtx(0, 0);
      st.beta = (inv / det) * agg.xty;
    } else {
      st.beta = Eigen::Vector2d(agg.xty(0) / agg.count, 0.0);
    }
    rss += std::max(agg.yy - 2.0 * st.beta.dot(agg.xty) +
                        st.beta.dot(agg.xtx * st.beta),
                    0.0);
    count += agg.count;

    st.lambda = std::max(agg.len_sum / agg.len_n - 1.0, kLambdaFloor);

    // Cross-waveform covariance of the per-waveform span fits.
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& c : agg.per_waveform_coef) mean += c;
    mean /= static_cast<double>(agg.per_waveform_coef.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& c : agg.per_waveform_coef)
      cov += (c - mean) * (c - mean).transpose();
    cov /= static_cast<double>(agg.per_waveform_coef.size());
    cov = psd_floor(cov);
    const double scale = std::max({std::abs(st.beta(0)), std::abs(st.beta(1)), 1.0});
    const double diag_floor = 1e-6 * scale * scale;
    cov(0, 0) = std::max(cov(0, 0), diag_floor);
    cov(1, 1) = std::max(cov(1, 1), diag_floor);
    st.psi = psd_floor(cov);
  }
  params.sigma2 = std::max(rss / count, kSigma2Floor);
  (void)n;
  params.validate();
  return params;
}

FitReport fit(const TrainingCorpus& corpus, const FitConfig& config) {
  corpus.validate();
  if (config.num_states < 1)
    throw ConfigError("number of states must be at least 1");
  if (config.max_iter < 0) throw ConfigError("max_iter must be nonnegative");

  int d_max = config.d_max;
  if (d_max == 0)
    for (const auto& w : corpus.waveforms) d_max = std::max(d_max, w.length());
  if (d_max < 1) throw ConfigError("d_max must be at least 1");

  FitReport report;
  report.params = initialize(corpus, config.num_states, d_max, config.seed);
  if (!config.random_effects)
    for (auto& st : report.params.states) st.psi.setZero();

  EStepStats stats = e_step(corpus, report.params);
  report.loglik_trace.push_back(stats.total_loglik);

  while (report.iterations < config.max_iter) {
    MStepResult ms = m_step(stats, report.params);
    report.params = std::move(ms.params);
    report.warnings.insert(report.warnings.end(), ms.warnings.begin(),
                           ms.warnings.end());
    ++report.iterations;

    stats = e_step(corpus, report.params);
    report.loglik_trace.push_back(stats.total_loglik);

    const double prev = report.loglik_trace[report.loglik_trace.size() - 2];
    const double cur = report.loglik_trace.back();
    const double scale = std::max(1.0, std::abs(prev));
    if (cur < prev - 1e-6 * scale) {
      report.warnings.push_back("log-likelihood decreased at iteration " +
                                std::to_string(report.iterations));
      assert(false && "EM log-likelihood decreased beyond slack");
    }
    if (cur - prev < config.rel_tol * scale) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace reshmm
