#pragma once

#include "reshmm/inference.hpp"
#include "reshmm/types.hpp"

namespace reshmm {

struct FitConfig {
  int num_states = 1;
  int d_max = 0;  // 0: use the length of the longest training waveform
  int max_iter = 200;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  bool random_effects = true;  // false fits the plain segmental model (psi = 0)
};

// Expected complete-data statistics aggregated over a corpus. Everything the
// M step and the Q function need; sums are per state unless noted.
struct EStepStats {
  int num_states = 0;
  double total_loglik = 0.0;
  std::vector<double> per_waveform_loglik;

  Eigen::MatrixXd trans_counts;  // (M+1) x M, row 0 = initial indicators

  std::vector<double> w_sum;      // expected number of visits
  std::vector<double> wd1_sum;    // sum w * (d - 1)
  std::vector<double> wd_sum;     // sum w * d (expected occupancy)
  std::vector<double> wlgd_sum;   // sum w * lgamma(d), the duration constant
  std::vector<Eigen::Matrix2d> sxx;   // sum w * X'X
  std::vector<Eigen::Vector2d> sxv;   // sum w * X'(y - X u_hat)
  std::vector<double> svv;            // sum w * ||y - X u_hat||^2
  std::vector<double> strace;         // sum w * tr(X u_cov X')
  std::vector<Eigen::Matrix2d> suu;   // sum w * E[u u']

  void resize(int M);
  void accumulate(const SegmentPosterior& post, const ModelParams& params);
  void add(const EStepStats& other);
};

EStepStats e_step(const TrainingCorpus& corpus, const ModelParams& params);

struct MStepResult {
  ModelParams params;
  std::vector<std::string> warnings;  // e.g. state starvation
};

MStepResult m_step(const EStepStats& stats, const ModelParams& previous);

// Expected complete-data log-likelihood of `params` under frozen E-step
// statistics. The M step maximizes this; exposed for optimality checks.
double q_function(const EStepStats& stats, const ModelParams& params);

struct FitReport {
  ModelParams params;
  std::vector<double> loglik_trace;  // one entry per E step
  int iterations = 0;                // number of M steps applied
  bool converged = false;
  std::vector<std::string> warnings;
};

// Moment-based initialization: uniform M-way span split of each waveform,
// pooled OLS lines per span, cross-waveform coefficient covariance for psi.
// Deterministic for a given corpus; `seed` is accepted for interface
// stability but the construction draws nothing.
ModelParams initialize(const TrainingCorpus& corpus, int num_states, int d_max,
                       std::uint64_t seed);

FitReport fit(const TrainingCorpus& corpus, const FitConfig& config);

}  // namespace reshmm
