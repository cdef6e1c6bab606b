#include "reshmm/synth.hpp"

#include <cmath>

#include "reshmm/inference.hpp"
#include "reshmm/parallel.hpp"

namespace reshmm {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t Rng::substream(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index * 0xA24BAED4963EE407ull + 1));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

int Rng::poisson(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("poisson rate must be positive");
  const double u = uniform();
  double p = std::exp(-lambda);
  double cdf = p;
  int k = 0;
  const int cap = static_cast<int>(10.0 * lambda) + 1000;
  while (u > cdf && k < cap) {
    ++k;
    p *= lambda / k;
    cdf += p;
  }
  return k;
}

int Rng::categorical(const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (!(total > 0.0)) return -1;
  const double u = uniform() * total;
  double acc = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights(i);
    if (u < acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

Eigen::Vector2d Rng::gaussian2(const Eigen::Matrix2d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (cov + cov.transpose()));
  const Eigen::Vector2d scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Vector2d z(normal(), normal());
  return es.eigenvectors() * scale.cwiseProduct(z);
}

SampledWaveform sample_waveform(const ModelParams& params, std::uint64_t seed,
                                int t_cap, const std::string& id) {
  params.validate();
  SampledWaveform out;
  out.series.id = id;
  out.truth.id = id;

  Rng rng(seed);
  int state = rng.categorical(params.transitions.row(0).transpose());
  if (state < 0) throw ConfigError("initial-state distribution has no mass");

  const double sigma = std::sqrt(params.sigma2);
  while (state >= 0) {
    const auto& st = params.states[state];
    int d = 0;
    int tries = 0;
    do {
      d = 1 + rng.poisson(st.lambda);
      if (++tries > 10000)
        throw NumericalError("duration sampling exceeded the rejection budget; "
                             "d_max is far below the duration mean");
    } while (d > params.d_max);

    const Eigen::Vector2d u = rng.gaussian2(st.psi);
    SegmentTruth truth;
    truth.segment.state = state + 1;
    truth.segment.start = out.series.length() + 1;
    truth.u = u;

    int emitted = 0;
    for (int j = 0; j < d; ++j) {
      if (t_cap > 0 && out.series.length() >= t_cap) {
        truth.truncated = true;
        break;
      }
      out.series.samples.push_back((st.beta(0) + u(0)) +
                                   (st.beta(1) + u(1)) * j + sigma * rng.normal());
      ++emitted;
    }
    truth.segment.duration = emitted;
    if (emitted > 0) out.truth.segments.push_back(truth);
    if (truth.truncated || (t_cap > 0 && out.series.length() >= t_cap)) break;

    state = rng.categorical(params.transitions.row(state + 1).transpose());
  }
  return out;
}

SampledCorpus sample_corpus(const GeneratorConfig& config) {
  config.params.validate();
  if (config.n < 1) throw ConfigError("corpus size must be at least 1");

  int width = 1;
  for (int v = config.n - 1; v >= 10; v /= 10) ++width;
  width = std::max(width, 3);

  SampledCorpus out;
  out.corpus.waveforms.resize(config.n);
  out.truths.resize(config.n);
  std::vector<SampledWaveform> drawn(config.n);
  parallel_for(config.n, [&](int i) {
    std::string id = std::to_string(i);
    id = "w" + std::string(width - id.size(), '0') + id;
    drawn[i] = sample_waveform(config.params, Rng::substream(config.seed, i),
                               config.t_cap, id);
  });
  for (int i = 0; i < config.n; ++i) {
    out.corpus.waveforms[i] = std::move(drawn[i].series);
    out.truths[i] = std::move(drawn[i].truth);
  }
  return out;
}

ModelParams preset_model(const std::string& name) {
  // A four-phase rise/fall shape with per-waveform coefficient variation.
  auto base = []() {
    ModelParams p;
    p.num_states = 4;
    p.d_max = 60;
    p.transitions.setZero(5, 4);
    p.transitions(0, 0) = 1.0;
    p.transitions(1, 1) = 1.0;
    p.transitions(2, 2) = 1.0;
    p.transitions(3, 3) = 1.0;
    p.sigma2 = 0.25;
    p.states.resize(4);
    const double slopes[4] = {1.2, -0.4, -1.5, 0.5};
    const double levels[4] = {0.0, 18.0, 12.0, -10.0};
    for (int k = 0; k < 4; ++k) {
      p.states[k].beta << levels[k], slopes[k];
      p.states[k].lambda = 14.0;
      p.states[k].psi << 1.0, 0.0, 0.0, 0.01;
    }
    return p;
  };
  if (name == "demo-a") return base();
  if (name == "demo-b") {
    ModelParams p = base();
    const double slopes[4] = {0.6, 0.8, -2.0, -0.1};
    for (int k = 0; k < 4; ++k) p.states[k].beta(1) = slopes[k];
    return p;
  }
  throw ConfigError("unknown preset '" + name + "'; available: demo-a, demo-b");
}

std::vector<std::string> preset_names() { return {"demo-a", "demo-b"}; }

}  // namespace reshmm
