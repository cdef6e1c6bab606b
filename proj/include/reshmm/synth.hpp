#pragma once

#include "reshmm/types.hpp"

namespace reshmm {

// Deterministic RNG with hand-rolled distributions so sampled corpora are
// bit-identical across platforms and standard-library versions.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  double uniform();                 // [0, 1)
  double normal();                  // standard normal, Box-Muller
  int poisson(double lambda);       // CDF inversion
  int categorical(const Eigen::VectorXd& weights);  // nonnegative weights
  Eigen::Vector2d gaussian2(const Eigen::Matrix2d& cov);  // N(0, cov), PSD

  // Substream seed for item `index` under root seed `seed` (splitmix64 of
  // the pair), so corpus contents do not depend on sampling order.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index);

private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  std::uint64_t next_u64();
};

struct SegmentTruth {
  Segment segment;              // state 1-based, start 1-based
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  bool truncated = false;       // segment cut short by t_cap
};

struct WaveformTruth {
  std::string id;
  std::vector<SegmentTruth> segments;
};

struct GeneratorConfig {
  ModelParams params;
  int n = 1;
  std::uint64_t seed = 0;
  int t_cap = 0;  // 0: unbounded
};

struct SampledWaveform {
  WaveformSeries series;
  WaveformTruth truth;
};

struct SampledCorpus {
  TrainingCorpus corpus;
  std::vector<WaveformTruth> truths;
};

// Draw one waveform: initial state from row 0 of the transition matrix, a
// duration from the shifted Poisson (rejection-truncated at d_max), a random
// effect from N(0, psi), d regression samples, then the successor state until
// the terminal all-zero row or t_cap.
SampledWaveform sample_waveform(const ModelParams& params, std::uint64_t seed,
                                int t_cap = 0, const std::string& id = "w0");

SampledCorpus sample_corpus(const GeneratorConfig& config);

// Built-in demo models: a well-separated piecewise-linear shape with random
// effects, and a variant with different slopes for two-class experiments.
ModelParams preset_model(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace reshmm
