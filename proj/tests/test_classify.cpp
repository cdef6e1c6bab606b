#include <doctest.h>

#include <cmath>

#include "reshmm/classify.hpp"
#include "reshmm/synth.hpp"
#include "test_util.hpp"

using namespace reshmm;

namespace {

LabeledFeature feat(const std::string& id, int label,
                    std::initializer_list<double> values) {
  LabeledFeature f;
  f.id = id;
  f.label = label;
  f.features = Eigen::VectorXd(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) f.features(i++) = v;
  return f;
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("k = 1 returns the label of an exactly matching point") {
  std::vector<LabeledFeature> train = {
      feat("a", 0, {0.0, 1.0}), feat("b", 1, {5.0, -2.0}),
      feat("c", 0, {-3.0, 4.0})};
  Eigen::VectorXd q(2);
  q << 5.0, -2.0;
  CHECK(knn_classify(train, q, 1) == 1);
}

TEST_CASE("well-separated clusters classify perfectly") {
  Rng rng(211);
  std::vector<LabeledFeature> train;
  auto draw = [&](double cx, double cy, int label, int n) {
    for (int i = 0; i < n; ++i)
      train.push_back(feat("p" + std::to_string(train.size()), label,
                           {cx + rng.normal(), cy + rng.normal()}));
  };
  draw(0.0, 0.0, 0, 25);
  draw(20.0, 20.0, 1, 25);  // 10+ standard deviations apart after z-scoring
  for (int i = 0; i < 50; ++i) {
    const bool positive = i % 2 == 0;
    Eigen::VectorXd q(2);
    q << (positive ? 20.0 : 0.0) + rng.normal(),
        (positive ? 20.0 : 0.0) + rng.normal();
    for (int k : {1, 3, 5})
      CHECK(knn_classify(train, q, k) == (positive ? 1 : 0));
  }
}

TEST_CASE("duplicating training points leaves k = 1 predictions unchanged") {
  Rng rng(223);
  std::vector<LabeledFeature> train;
  for (int i = 0; i < 10; ++i)
    train.push_back(feat("p" + std::to_string(i), i % 3 == 0,
                         {rng.uniform() * 4.0, rng.uniform() * 4.0}));
  std::vector<LabeledFeature> doubled = train;
  doubled.insert(doubled.end(), train.begin(), train.end());
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd q(2);
    q << rng.uniform() * 4.0, rng.uniform() * 4.0;
    CHECK(knn_classify(train, q, 1) == knn_classify(doubled, q, 1));
  }
}

TEST_CASE("standardization uses training statistics only") {
  // With train-only z-scoring the second dimension keeps its weight and the
  // huge query lands nearer the high-y point; folding the query into the
  // statistics would crush that dimension and flip the answer.
  std::vector<LabeledFeature> train = {feat("lo", 0, {0.0, 0.0}),
                                       feat("hi", 1, {4.0, 0.9})};
  Eigen::VectorXd q(2);
  q << 0.0, 1000.0;
  CHECK(knn_classify(train, q, 1) == 1);
}

TEST_CASE("knn rejects bad arguments") {
  std::vector<LabeledFeature> train = {feat("a", 0, {0.0})};
  Eigen::VectorXd q(1);
  q << 0.0;
  CHECK_THROWS_AS(knn_classify({}, q, 1), ConfigError);
  CHECK_THROWS_AS(knn_classify(train, q, 2), ConfigError);
  Eigen::VectorXd q2(2);
  q2 << 0.0, 1.0;
  CHECK_THROWS_AS(knn_classify(train, q2, 1), ConfigError);
}

TEST_CASE("baseline distance basics") {
  WaveformSeries a{"a", {1.0, 2.0, 3.0}};
  CHECK(baseline_distance(a, a) == 0.0);

  WaveformSeries b = a;
  b.id = "b";
  for (auto& v : b.samples) v += 2.5;
  CHECK(baseline_distance(a, b) == doctest::Approx(6.25).epsilon(1e-12));

  Rng rng(227);
  WaveformSeries c{"c", {}};
  WaveformSeries d{"d", {}};
  for (int i = 0; i < 7; ++i) {
    c.samples.push_back(rng.uniform());
    d.samples.push_back(rng.uniform());
  }
  double want = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double r = c.samples[i] - d.samples[i];
    want += r * r;
  }
  CHECK(baseline_distance(c, d) == doctest::Approx(want / 7.0).epsilon(1e-12));

  // unequal lengths truncate to the shorter waveform
  WaveformSeries e{"e", {1.0, 2.0}};
  WaveformSeries f{"f", {1.0, 2.0, 99.0}};
  CHECK(baseline_distance(e, f) == 0.0);
}

TEST_CASE("cv protocol is deterministic and separates synthetic classes") {
  const ModelParams pos_model = preset_model("demo-a");
  const ModelParams neg_model = preset_model("demo-b");
  GeneratorConfig gp{pos_model, 10, 31, 0};
  GeneratorConfig gn{neg_model, 9, 32, 0};
  const TrainingCorpus positives = sample_corpus(gp).corpus;
  TrainingCorpus negatives = sample_corpus(gn).corpus;
  for (auto& w : negatives.waveforms) w.id = "n_" + w.id;

  CvConfig cfg;
  cfg.model.num_states = 4;
  cfg.model.max_iter = 4;
  cfg.model.d_max = 60;
  cfg.k_values = {1, 3};
  cfg.seed = 7;
  const AccuracyTable a = cv_protocol(positives, negatives, cfg);
  const AccuracyTable b = cv_protocol(positives, negatives, cfg);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].feature_set == b.rows[i].feature_set);
    CHECK(a.rows[i].k == b.rows[i].k);
    CHECK(a.rows[i].fold == b.rows[i].fold);
    CHECK(a.rows[i].accuracy == b.rows[i].accuracy);
  }
  CHECK(a.rows.size() == 3 * 2 * 5);  // feature sets x k values x folds

  for (const auto& s : a.summary)
    if (s.feature_set == "shape_noise") CHECK(s.mean >= 0.8);
}

TEST_CASE("label shuffling drops accuracy to roughly the majority rate") {
  // Identical score distributions for both classes: accuracy should hover
  // around the class balance, far from perfect.
  const ModelParams model = preset_model("demo-a");
  GeneratorConfig gp{model, 12, 41, 0};
  GeneratorConfig gn{model, 12, 41, 0};  // same seed: identical waveforms
  const TrainingCorpus positives = sample_corpus(gp).corpus;
  TrainingCorpus negatives = sample_corpus(gn).corpus;
  for (auto& w : negatives.waveforms) w.id = "n_" + w.id;

  CvConfig cfg;
  cfg.model.num_states = 4;
  cfg.model.max_iter = 2;
  cfg.model.d_max = 60;
  cfg.k_values = {1, 3};
  cfg.seed = 3;
  const AccuracyTable table = cv_protocol(positives, negatives, cfg);
  for (const auto& s : table.summary) {
    CHECK(s.mean >= 0.15);
    CHECK(s.mean <= 0.85);
  }
}

TEST_CASE("cv protocol rejects undersized classes") {
  Rng rng(229);
  const ModelParams model = testutil::random_model(rng, 2, 20);
  GeneratorConfig g{model, 4, 5, 0};
  const TrainingCorpus tiny = sample_corpus(g).corpus;
  CvConfig cfg;
  cfg.model.num_states = 2;
  CHECK_THROWS_AS(cv_protocol(tiny, tiny, cfg), ConfigError);
}

}  // TEST_SUITE
