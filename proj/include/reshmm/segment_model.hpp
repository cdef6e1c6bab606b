#pragma once

#include <span>

#include "reshmm/types.hpp"

namespace reshmm {

// log P(d | lambda) of the duration distribution, a Poisson shifted to
// d = 1, 2, ... so that no state is silent. Throws ConfigError outside the
// domain d >= 1, lambda > 0.
double duration_log_pmf(int d, double lambda);

// Design matrix for a segment of duration d: a column of ones and a column
// of segment-local times 0..d-1, so the intercept is the starting level of
// the segment and segments are translation invariant in time.
struct SegmentDesign {
  int duration = 0;

  Eigen::MatrixXd matrix() const;  // d x 2
};

// Column moments of the design matrix, closed form in d.
struct DesignMoments {
  double n = 0.0;    // sum of ones = d
  double st = 0.0;   // sum of local times
  double stt = 0.0;  // sum of squared local times

  Eigen::Matrix2d xtx() const {
    Eigen::Matrix2d m;
    m << n, st, st, stt;
    return m;
  }
};

DesignMoments design_moments(int d);

// Running sufficient statistics of a segment window: everything the O(d)
// likelihood path needs, accumulated in one pass and extendable in O(1)
// at either end.
struct SegmentStats {
  int d = 0;
  double sy = 0.0;   // sum y
  double sty = 0.0;  // sum (local time) * y
  double syy = 0.0;  // sum y^2

  // Extend the window forward; the new sample gets local time d.
  void append_back(double y) {
    sy += y;
    sty += static_cast<double>(d) * y;
    syy += y * y;
    ++d;
  }

  // Extend the window backward; the new sample gets local time 0 and all
  // existing local times shift by one.
  void prepend_front(double y) {
    sty += sy;
    sy += y;
    syy += y * y;
    ++d;
  }

  static SegmentStats of(std::span<const double> y_seg);
};

// Inverse of psi under the singular-covariance policy: a PSD 2x2 with a
// conditioning ratio beyond ~1e12 gets diagonal jitter 1e-9 * trace/2
// (1e-12 when the trace is zero) before the closed-form inversion. A psi of
// exactly zero short-circuits: the effect is degenerate at 0 and likelihoods
// reduce to the iid-residual form. `zero_shortcut = false` forces the
// jittered inverse even there (used by density expectations that need a
// proper prior term).
struct PsiInverse {
  Eigen::Matrix2d inv = Eigen::Matrix2d::Zero();
  double log_det = 0.0;  // log determinant of the (possibly jittered) psi
  bool zero = false;     // psi was exactly zero: the effect degenerates to 0
};

PsiInverse invert_psi(const Eigen::Matrix2d& psi, bool zero_shortcut = true);

// Posterior mean/covariance of the random effect given one segment.
RandomEffectPosterior posterior_from_stats(const SegmentStats& stats,
                                           const StateParams& state,
                                           double sigma2);
RandomEffectPosterior posterior_random_effect(std::span<const double> y_seg,
                                              const StateParams& state,
                                              double sigma2);

// Marginal segment log-density with the random effect integrated out,
// N_d(X beta, X psi X' + sigma2 I), evaluated from the explicit d x d
// covariance. O(d^3); this is the reference path.
double segment_loglik_naive(std::span<const double> y_seg,
                            const StateParams& state, double sigma2);

// Same density via the joint/posterior ratio evaluated at the posterior
// mean, which needs only the 2x2 statistics above. O(d).
double segment_loglik_fast(std::span<const double> y_seg,
                           const StateParams& state, double sigma2);
double segment_loglik_from_stats(const SegmentStats& stats,
                                 const StateParams& state, double sigma2);

// Posterior quantities consumed by EM and by the score decomposition:
// the residual norm at the model coefficients with the effect at its
// posterior mean, and the trace correction from the posterior covariance.
struct SegmentExpectation {
  RandomEffectPosterior post;
  double cond_rss = 0.0;    // ||y - X beta - X u_hat||^2
  double cond_trace = 0.0;  // tr(X u_cov X')
};

SegmentExpectation segment_expectation(const SegmentStats& stats,
                                       const StateParams& state,
                                       double sigma2);

// Per-state evaluator with psi inverted once; the inference recursions call
// this O(M T d_max) times per waveform.
class SegmentEvaluator {
public:
  SegmentEvaluator(const StateParams& state, double sigma2);

  double loglik(const SegmentStats& stats) const;
  SegmentExpectation expectation(const SegmentStats& stats) const;

  const PsiInverse& psi_inverse() const { return psi_inv_; }

private:
  Eigen::Vector2d beta_;
  PsiInverse psi_inv_;
  double sigma2_;
  double log_sigma2_;
};

}  // namespace reshmm
