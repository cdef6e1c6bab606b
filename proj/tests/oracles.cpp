#include "oracles.hpp"

#include <cmath>

#include "reshmm/segment_model.hpp"

namespace oracle {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd design(int d) {
  Eigen::MatrixXd x(d, 2);
  for (int i = 0; i < d; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
  }
  return x;
}

Eigen::VectorXd to_vec(std::span<const double> y) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
  for (size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

}  // namespace

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
  const Eigen::Index d = x.size();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const Eigen::VectorXd r = x - mean;
  const double quad = r.dot(lu.solve(r));
  const double log_det = std::log(std::abs(lu.determinant()));
  return -0.5 * d * kLog2Pi - 0.5 * log_det - 0.5 * quad;
}

double segment_marginal_dense(std::span<const double> y_seg,
                              const reshmm::StateParams& state, double sigma2) {
  const int d = static_cast<int>(y_seg.size());
  const Eigen::MatrixXd x = design(d);
  Eigen::MatrixXd cov = x * state.psi * x.transpose();
  cov.diagonal().array() += sigma2;
  return mvn_logpdf(to_vec(y_seg), x * state.beta, cov);
}

UMoments u_moments_dense(std::span<const double> y_seg,
                         const reshmm::StateParams& state, double sigma2) {
  const int d = static_cast<int>(y_seg.size());
  const Eigen::MatrixXd x = design(d);
  Eigen::MatrixXd cov_yy = x * state.psi * x.transpose();
  cov_yy.diagonal().array() += sigma2;
  const Eigen::MatrixXd cov_yu = x * state.psi;  // d x 2

  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov_yy);
  const Eigen::VectorXd r = to_vec(y_seg) - x * state.beta;
  UMoments m;
  m.u_hat = cov_yu.transpose() * lu.solve(r);
  m.u_cov = state.psi - cov_yu.transpose() * lu.solve(cov_yu);
  m.u_cov = 0.5 * (m.u_cov + m.u_cov.transpose());
  return m;
}

namespace {

void recurse(const reshmm::WaveformSeries& y, const reshmm::ModelParams& p,
             int pos, int last_state, double log_joint,
             std::vector<reshmm::Segment>& stack, std::vector<Hypothesis>& out) {
  const int T = y.length();
  if (pos == T) {
    out.push_back(Hypothesis{stack, log_joint});
    return;
  }
  const int row = last_state < 0 ? 0 : last_state + 1;
  const int first_k = last_state < 0 ? 0 : last_state + 1;
  for (int k = first_k; k < p.num_states; ++k) {
    const double a = p.log_transition(row, k);
    if (a == reshmm::kNegInf) continue;
    const int dcap = std::min(T - pos, p.d_max);
    for (int d = 1; d <= dcap; ++d) {
      const double dur = reshmm::duration_log_pmf(d, p.states[k].lambda);
      const double lik = segment_marginal_dense(
          std::span<const double>(y.samples.data() + pos, d), p.states[k],
          p.sigma2);
      stack.push_back(reshmm::Segment{k + 1, pos + 1, d});
      recurse(y, p, pos + d, k, log_joint + a + dur + lik, stack, out);
      stack.pop_back();
    }
  }
}

}  // namespace

std::vector<Hypothesis> enumerate_segmentations(const reshmm::WaveformSeries& y,
                                                const reshmm::ModelParams& params) {
  std::vector<Hypothesis> out;
  std::vector<reshmm::Segment> stack;
  recurse(y, params, 0, -1, 0.0, stack, out);
  return out;
}

double total_loglik(const std::vector<Hypothesis>& hyps) {
  double m = reshmm::kNegInf;
  for (const auto& h : hyps) m = std::max(m, h.log_joint);
  if (m == reshmm::kNegInf) return reshmm::kNegInf;
  double s = 0.0;
  for (const auto& h : hyps) s += std::exp(h.log_joint - m);
  return m + std::log(s);
}

const Hypothesis& best_hypothesis(const std::vector<Hypothesis>& hyps) {
  const Hypothesis* best = nullptr;
  for (const auto& h : hyps) {
    if (best == nullptr) {
      best = &h;
      continue;
    }
    if (h.log_joint > best->log_joint) {
      best = &h;
    } else if (h.log_joint == best->log_joint) {
      const auto& hf = h.segments.back();
      const auto& bf = best->segments.back();
      if (hf.duration < bf.duration ||
          (hf.duration == bf.duration && hf.state < bf.state))
        best = &h;
    }
  }
  return *best;
}

std::map<std::tuple<int, int, int>, double> segment_weights(
    const std::vector<Hypothesis>& hyps) {
  const double total = total_loglik(hyps);
  std::map<std::tuple<int, int, int>, double> weights;
  for (const auto& h : hyps) {
    const double w = std::exp(h.log_joint - total);
    for (const auto& s : h.segments)
      weights[{s.state, s.start, s.duration}] += w;
  }
  return weights;
}

Eigen::MatrixXd transition_counts(const std::vector<Hypothesis>& hyps, int M) {
  const double total = total_loglik(hyps);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(M + 1, M);
  for (const auto& h : hyps) {
    const double w = std::exp(h.log_joint - total);
    int prev = -1;
    for (const auto& s : h.segments) {
      counts(prev + 1, s.state - 1) += w;
      prev = s.state - 1;
    }
  }
  return counts;
}

Scores expected_scores(const reshmm::WaveformSeries& y,
                       const reshmm::ModelParams& params,
                       const std::vector<Hypothesis>& hyps) {
  const double total = total_loglik(hyps);
  Scores sc;
  for (const auto& h : hyps) {
    const double w = std::exp(h.log_joint - total);
    int prev = -1;
    for (const auto& s : h.segments) {
      const int k = s.state - 1;
      const auto& st = params.states[k];
      sc.shape += w * params.log_transition(prev + 1, k);
      sc.shape += w * reshmm::duration_log_pmf(s.duration, st.lambda);
      const std::span<const double> seg(y.samples.data() + s.start - 1,
                                        static_cast<size_t>(s.duration));
      const UMoments m = u_moments_dense(seg, st, params.sigma2);
      const Eigen::Matrix2d second = m.u_cov + m.u_hat * m.u_hat.transpose();
      const Eigen::Matrix2d psi_inv = st.psi.inverse();
      sc.shape += w * (-kLog2Pi - 0.5 * std::log(st.psi.determinant()) -
                       0.5 * (psi_inv * second).trace());

      const Eigen::MatrixXd x = design(s.duration);
      const Eigen::VectorXd resid = to_vec(seg) - x * (st.beta + m.u_hat);
      const double trace = (x * m.u_cov * x.transpose()).trace();
      sc.noise += w * (-0.5 * s.duration * (kLog2Pi + std::log(params.sigma2)) -
                       (resid.squaredNorm() + trace) / (2.0 * params.sigma2));
      prev = k;
    }
  }
  return sc;
}

EStats expected_statistics(const reshmm::WaveformSeries& y,
                           const reshmm::ModelParams& params,
                           const std::vector<Hypothesis>& hyps) {
  const int M = params.num_states;
  EStats es;
  es.w_sum.assign(M, 0.0);
  es.wd1_sum.assign(M, 0.0);
  es.wd_sum.assign(M, 0.0);
  es.sxx.assign(M, Eigen::Matrix2d::Zero());
  es.suu.assign(M, Eigen::Matrix2d::Zero());
  es.sxv.assign(M, Eigen::Vector2d::Zero());
  es.svv.assign(M, 0.0);
  es.strace.assign(M, 0.0);
  es.trans_counts = transition_counts(hyps, M);

  const double total = total_loglik(hyps);
  for (const auto& h : hyps) {
    const double w = std::exp(h.log_joint - total);
    for (const auto& s : h.segments) {
      const int k = s.state - 1;
      const auto& st = params.states[k];
      const std::span<const double> seg(y.samples.data() + s.start - 1,
                                        static_cast<size_t>(s.duration));
      const UMoments m = u_moments_dense(seg, st, params.sigma2);
      const Eigen::MatrixXd x = design(s.duration);
      const Eigen::VectorXd yv = to_vec(seg);
      const Eigen::VectorXd v = yv - x * m.u_hat;

      es.w_sum[k] += w;
      es.wd1_sum[k] += w * (s.duration - 1.0);
      es.wd_sum[k] += w * s.duration;
      es.sxx[k] += w * (x.transpose() * x);
      es.sxv[k] += w * (x.transpose() * v);
      es.svv[k] += w * v.squaredNorm();
      es.strace[k] += w * (x * m.u_cov * x.transpose()).trace();
      es.suu[k] += w * (m.u_cov + m.u_hat * m.u_hat.transpose());
    }
  }
  return es;
}

namespace {

void prefix_recurse(const reshmm::WaveformSeries& y,
                    const reshmm::ModelParams& p, int pos, int last_state,
                    double log_joint, int t, std::vector<double>& terms) {
  const int row = last_state < 0 ? 0 : last_state + 1;
  const int first_k = last_state < 0 ? 0 : last_state + 1;
  for (int k = first_k; k < p.num_states; ++k) {
    const double a = p.log_transition(row, k);
    if (a == reshmm::kNegInf) continue;
    for (int d = 1; d <= p.d_max; ++d) {
      const double dur = reshmm::duration_log_pmf(d, p.states[k].lambda);
      if (pos + d < t) {
        // complete interior segment
        const double lik = segment_marginal_dense(
            std::span<const double>(y.samples.data() + pos, d), p.states[k],
            p.sigma2);
        prefix_recurse(y, p, pos + d, k, log_joint + a + dur + lik, t, terms);
      } else {
        // covering segment; only the first t-pos samples are observed
        const int m = t - pos;
        const double lik = segment_marginal_dense(
            std::span<const double>(y.samples.data() + pos, m), p.states[k],
            p.sigma2);
        terms.push_back(log_joint + a + dur + lik);
      }
    }
  }
}

}  // namespace

double prefix_loglik(const reshmm::WaveformSeries& y,
                     const reshmm::ModelParams& params, int t) {
  if (t == 0) return 0.0;
  std::vector<double> terms;
  prefix_recurse(y, params, 0, -1, 0.0, t, terms);
  double m = reshmm::kNegInf;
  for (double v : terms) m = std::max(m, v);
  if (m == reshmm::kNegInf) return reshmm::kNegInf;
  double s = 0.0;
  for (double v : terms) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace oracle
