#include "reshmm/segment_model.hpp"

#include <algorithm>
#include <cmath>

namespace reshmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double det2(const Eigen::Matrix2d& a) {
  return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
}

Eigen::Matrix2d inv2(const Eigen::Matrix2d& a, double det) {
  Eigen::Matrix2d r;
  r << a(1, 1), -a(0, 1), -a(1, 0), a(0, 0);
  return r / det;
}

// Residual statistics at the model coefficients: X'r and r'r for
// r = y - X beta, from the raw window sums.
struct ResidualStats {
  Eigen::Matrix2d xtx;
  Eigen::Vector2d xtr;
  double rtr = 0.0;
};

ResidualStats residual_stats(const SegmentStats& stats, const Eigen::Vector2d& beta) {
  const DesignMoments m = design_moments(stats.d);
  ResidualStats rs;
  rs.xtx = m.xtx();
  const Eigen::Vector2d xty(stats.sy, stats.sty);
  rs.xtr = xty - rs.xtx * beta;
  rs.rtr = std::max(stats.syy - 2.0 * (beta(0) * stats.sy + beta(1) * stats.sty) +
                        beta(0) * beta(0) * m.n + 2.0 * beta(0) * beta(1) * m.st +
                        beta(1) * beta(1) * m.stt,
                    0.0);
  return rs;
}

}  // namespace

void WaveformSeries::validate() const {
  if (samples.empty())
    throw DataError("waveform '" + id + "' is empty");
  for (double v : samples)
    if (!std::isfinite(v))
      throw DataError("waveform '" + id + "' contains a non-finite sample");
}

void TrainingCorpus::validate() const {
  if (waveforms.empty()) throw DataError("corpus is empty");
  std::vector<std::string> ids;
  ids.reserve(waveforms.size());
  for (const auto& w : waveforms) {
    w.validate();
    ids.push_back(w.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw DataError("corpus contains duplicate waveform ids");
}

void ModelParams::validate() const {
  const int M = num_states;
  if (M < 1) throw ConfigError("model must have at least one state");
  if (d_max < 1) throw ConfigError("d_max must be at least 1");
  if (static_cast<int>(states.size()) != M)
    throw ConfigError("state parameter count does not match num_states");
  if (transitions.rows() != M + 1 || transitions.cols() != M)
    throw ConfigError("transition matrix must be (M+1) x M");
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw ConfigError("sigma2 must be finite and nonnegative");

  for (int r = 0; r <= M; ++r)
    for (int c = 0; c < M; ++c)
      if (!(transitions(r, c) >= 0.0))
        throw ConfigError("transition matrix has a negative entry");

  if (std::abs(transitions.row(0).sum() - 1.0) > 1e-9)
    throw ConfigError("initial-state distribution does not sum to 1");
  for (int k = 1; k <= M; ++k) {
    double forward_mass = 0.0;
    for (int c = 0; c < M; ++c) {
      if (c + 1 <= k && transitions(k, c) != 0.0)
        throw ConfigError("transition matrix violates the left-to-right structure");
      forward_mass += transitions(k, c);
    }
    if (k < M && std::abs(forward_mass - 1.0) > 1e-9)
      throw ConfigError("transition row does not sum to 1");
    if (k == M && forward_mass != 0.0)
      throw ConfigError("last transition row must be zero");
  }

  for (const auto& s : states) {
    if (!(s.lambda > 0.0)) throw ConfigError("lambda must be positive");
    if (!s.beta.allFinite() || !s.psi.allFinite())
      throw ConfigError("state parameters must be finite");
    if (std::abs(s.psi(0, 1) - s.psi(1, 0)) >
        1e-9 * (1.0 + s.psi.cwiseAbs().maxCoeff()))
      throw ConfigError("psi must be symmetric");
    const double tr = s.psi(0, 0) + s.psi(1, 1);
    const double det = det2(s.psi);
    const double scale = std::max(1.0, tr);
    if (s.psi(0, 0) < -1e-12 * scale || s.psi(1, 1) < -1e-12 * scale ||
        det < -1e-10 * scale * scale)
      throw ConfigError("psi must be positive semi-definite");
  }
}

double duration_log_pmf(int d, double lambda) {
  if (d < 1) throw ConfigError("duration must be at least 1");
  if (!(lambda > 0.0)) throw ConfigError("duration rate must be positive");
  return -lambda + (d - 1) * std::log(lambda) - std::lgamma(static_cast<double>(d));
}

DesignMoments design_moments(int d) {
  const double n = d;
  return DesignMoments{n, n * (n - 1.0) / 2.0,
                       (n - 1.0) * n * (2.0 * n - 1.0) / 6.0};
}

Eigen::MatrixXd SegmentDesign::matrix() const {
  Eigen::MatrixXd x(duration, 2);
  for (int i = 0; i < duration; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = static_cast<double>(i);
  }
  return x;
}

SegmentStats SegmentStats::of(std::span<const double> y_seg) {
  SegmentStats s;
  for (double v : y_seg) s.append_back(v);
  return s;
}

PsiInverse invert_psi(const Eigen::Matrix2d& psi_in, bool zero_shortcut) {
  Eigen::Matrix2d psi = 0.5 * (psi_in + psi_in.transpose());
  PsiInverse out;
  if (zero_shortcut && psi(0, 0) == 0.0 && psi(1, 1) == 0.0 && psi(0, 1) == 0.0) {
    out.zero = true;
    out.log_det = kNegInf;
    return out;
  }
  const double tr = psi(0, 0) + psi(1, 1);
  const double mean_eig = tr / 2.0;
  double det = det2(psi);
  if (det <= 1e-12 * mean_eig * mean_eig) {
    const double eps = tr > 0.0 ? 1e-9 * mean_eig : 1e-12;
    psi(0, 0) += eps;
    psi(1, 1) += eps;
    det = det2(psi);
    if (!(det > 0.0))
      throw NumericalError("psi is not positive semi-definite after jitter");
  }
  out.inv = inv2(psi, det);
  out.log_det = std::log(det);
  return out;
}

SegmentEvaluator::SegmentEvaluator(const StateParams& state, double sigma2)
    : beta_(state.beta),
      psi_inv_(invert_psi(state.psi)),
      sigma2_(sigma2),
      log_sigma2_(std::log(sigma2)) {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
}

double SegmentEvaluator::loglik(const SegmentStats& stats) const {
  const ResidualStats rs = residual_stats(stats, beta_);
  const double d = stats.d;
  if (psi_inv_.zero)
    return -0.5 * d * (kLog2Pi + log_sigma2_) - rs.rtr / (2.0 * sigma2_);

  // Joint density at the posterior mean over the posterior density there:
  // log p(y, u_hat) - log p(u_hat | y), all 2x2 algebra.
  const Eigen::Matrix2d s = rs.xtx + sigma2_ * psi_inv_.inv;
  const double sdet = det2(s);
  if (!(sdet > 0.0) || !std::isfinite(sdet))
    throw NumericalError("segment likelihood: posterior precision is singular");
  const Eigen::Vector2d u_hat = inv2(s, sdet) * rs.xtr;

  const double cond_rss = std::max(
      rs.rtr - 2.0 * u_hat.dot(rs.xtr) + u_hat.dot(rs.xtx * u_hat), 0.0);
  const double prior_quad = u_hat.dot(psi_inv_.inv * u_hat);
  return -0.5 * d * (kLog2Pi + log_sigma2_) - cond_rss / (2.0 * sigma2_) -
         0.5 * psi_inv_.log_det - 0.5 * prior_quad +
         0.5 * (2.0 * log_sigma2_ - std::log(sdet));
}

SegmentExpectation SegmentEvaluator::expectation(const SegmentStats& stats) const {
  SegmentExpectation out;
  const ResidualStats rs = residual_stats(stats, beta_);
  if (psi_inv_.zero) {
    out.cond_rss = rs.rtr;
    return out;
  }
  const Eigen::Matrix2d s = rs.xtx + sigma2_ * psi_inv_.inv;
  const double sdet = det2(s);
  if (!(sdet > 0.0) || !std::isfinite(sdet))
    throw NumericalError("segment expectation: posterior precision is singular");
  const Eigen::Matrix2d s_inv = inv2(s, sdet);
  out.post.u_hat = s_inv * rs.xtr;
  out.post.u_cov = sigma2_ * 0.5 * (s_inv + s_inv.transpose());
  if (!out.post.u_hat.allFinite() || !out.post.u_cov.allFinite())
    throw NumericalError("random-effect posterior is not finite");
  out.cond_rss = std::max(rs.rtr - 2.0 * out.post.u_hat.dot(rs.xtr) +
                              out.post.u_hat.dot(rs.xtx * out.post.u_hat),
                          0.0);
  out.cond_trace = (rs.xtx * out.post.u_cov).trace();
  return out;
}

RandomEffectPosterior posterior_from_stats(const SegmentStats& stats,
                                           const StateParams& state,
                                           double sigma2) {
  return SegmentEvaluator(state, sigma2).expectation(stats).post;
}

RandomEffectPosterior posterior_random_effect(std::span<const double> y_seg,
                                              const StateParams& state,
                                              double sigma2) {
  return posterior_from_stats(SegmentStats::of(y_seg), state, sigma2);
}

double segment_loglik_from_stats(const SegmentStats& stats,
                                 const StateParams& state, double sigma2) {
  return SegmentEvaluator(state, sigma2).loglik(stats);
}

double segment_loglik_fast(std::span<const double> y_seg,
                           const StateParams& state, double sigma2) {
  return segment_loglik_from_stats(SegmentStats::of(y_seg), state, sigma2);
}

SegmentExpectation segment_expectation(const SegmentStats& stats,
                                       const StateParams& state,
                                       double sigma2) {
  return SegmentEvaluator(state, sigma2).expectation(stats);
}

double segment_loglik_naive(std::span<const double> y_seg,
                            const StateParams& state, double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  const int d = static_cast<int>(y_seg.size());
  if (d < 1) throw ConfigError("segment must be non-empty");

  const Eigen::MatrixXd x = SegmentDesign{d}.matrix();
  Eigen::MatrixXd cov = x * state.psi * x.transpose();
  cov.diagonal().array() += sigma2;

  Eigen::VectorXd r(d);
  for (int i = 0; i < d; ++i)
    r(i) = y_seg[i] - state.beta(0) - state.beta(1) * i;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov.diagonal().array() += 1e-10;
    llt.compute(cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("segment covariance is not positive definite");
  }
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * d * kLog2Pi - log_det - 0.5 * r.dot(llt.solve(r));
}

}  // namespace reshmm
