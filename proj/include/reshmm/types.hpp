#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace reshmm {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Error taxonomy. The CLI maps these onto exit codes:
// DataError -> 2, ConfigError -> 3, NumericalError -> 4.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DataError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

// One observed waveform. samples[t-1] holds the observation at time t;
// time indices are implicitly the contiguous range 1..T.
struct WaveformSeries {
  std::string id;
  std::vector<double> samples;

  int length() const { return static_cast<int>(samples.size()); }
  void validate() const;  // throws DataError on empty or non-finite data
};

// Per-state parameters: segment regression mean, duration rate, and the
// covariance of the per-waveform random perturbation of the coefficients.
struct StateParams {
  Eigen::Vector2d beta = Eigen::Vector2d::Zero();  // [level, slope per step]
  double lambda = 1.0;                             // mean duration is 1 + lambda
  Eigen::Matrix2d psi = Eigen::Matrix2d::Zero();
};

// Full parameter set. `transitions` is (M+1) x M: row 0 is the initial-state
// distribution, row k (1..M) the successor distribution of state k. States
// are ordered left-to-right: row k is nonzero only for columns l with l > k,
// and row M is identically zero (the last state has no successor).
struct ModelParams {
  int num_states = 0;  // M
  int d_max = 1;       // duration truncation bound
  Eigen::MatrixXd transitions;
  std::vector<StateParams> states;
  double sigma2 = 1.0;

  // Structural invariants (shape, row sums, PSD psi, sigma2 >= 0).
  // Inference entry points additionally require sigma2 > 0.
  void validate() const;

  // log transitions(row, state) with -inf for structural zeros;
  // row 0 addresses the initial distribution, state is 0-based.
  double log_transition(int row, int state) const {
    const double a = transitions(row, state);
    return a > 0.0 ? std::log(a) : kNegInf;
  }
};

// Posterior of the random effect u for one (segment, state) pair.
struct RandomEffectPosterior {
  Eigen::Vector2d u_hat = Eigen::Vector2d::Zero();
  Eigen::Matrix2d u_cov = Eigen::Matrix2d::Zero();

  Eigen::Matrix2d second_moment() const {
    return u_cov + u_hat * u_hat.transpose();
  }
};

// One segment of a decoded state sequence; `state` is 1-based (1..M) and
// `start` is a 1-based time index, matching the file formats.
struct Segment {
  int state = 0;
  int start = 0;
  int duration = 0;
};

struct Segmentation {
  std::vector<Segment> segments;
  double log_joint = kNegInf;
};

struct TrainingCorpus {
  std::vector<WaveformSeries> waveforms;

  void validate() const;  // non-empty, unique ids, per-waveform validity
};

}  // namespace reshmm
