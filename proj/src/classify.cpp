#include "reshmm/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "reshmm/evaluation.hpp"
#include "reshmm/synth.hpp"

namespace reshmm {

namespace {

// Majority vote over (distance, training index, label) triples. Distance
// ties resolve to the earlier index; vote ties to the label with the
// smaller summed distance, then the smaller label.
int vote(std::vector<std::tuple<double, int, int>>& cand, int k) {
  std::sort(cand.begin(), cand.end());
  std::map<int, std::pair<int, double>> tally;  // label -> (count, dist sum)
  for (int i = 0; i < k; ++i) {
    auto& t = tally[std::get<2>(cand[i])];
    t.first += 1;
    t.second += std::get<0>(cand[i]);
  }
  int best_label = 0;
  int best_count = -1;
  double best_dist = 0.0;
  for (const auto& [label, t] : tally) {
    if (t.first > best_count ||
        (t.first == best_count && t.second < best_dist)) {
      best_label = label;
      best_count = t.first;
      best_dist = t.second;
    }
  }
  return best_label;
}

}  // namespace

int knn_classify(const std::vector<LabeledFeature>& train,
                 const Eigen::VectorXd& query, int k) {
  if (train.empty()) throw ConfigError("k-NN training set is empty");
  if (k < 1 || k > static_cast<int>(train.size()))
    throw ConfigError("k must be between 1 and the training-set size");
  const Eigen::Index dim = query.size();
  for (const auto& f : train)
    if (f.features.size() != dim)
      throw ConfigError("k-NN feature dimensions do not match");

  // z-scoring statistics from the training set only.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& f : train) mean += f.features;
  mean /= static_cast<double>(train.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& f : train)
    var += (f.features - mean).cwiseAbs2();
  var /= static_cast<double>(train.size());
  Eigen::VectorXd sd = var.cwiseSqrt().cwiseMax(1e-12);

  const Eigen::VectorXd q = (query - mean).cwiseQuotient(sd);
  std::vector<std::tuple<double, int, int>> cand;
  cand.reserve(train.size());
  for (int i = 0; i < static_cast<int>(train.size()); ++i) {
    const Eigen::VectorXd z = (train[i].features - mean).cwiseQuotient(sd);
    cand.emplace_back((z - q).norm(), i, train[i].label);
  }
  return vote(cand, k);
}

double baseline_distance(const WaveformSeries& a, const WaveformSeries& b) {
  a.validate();
  b.validate();
  const int n = std::min(a.length(), b.length());
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = a.samples[i] - b.samples[i];
    sse += r * r;
  }
  return sse / n;
}

namespace {

struct Item {
  int label = 0;                     // 1 positive, 0 negative
  Eigen::VectorXd logp_feature;      // dim 1
  Eigen::VectorXd shape_feature;     // dim 2
  const WaveformSeries* waveform = nullptr;
};

// Deterministic shuffled round-robin fold assignment.
std::vector<int> fold_of(int n, int folds, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  std::vector<int> fold(n);
  for (int i = 0; i < n; ++i) fold[order[i]] = i % folds;
  return fold;
}

int knn_raw(const std::vector<const Item*>& train, const Item& query, int k) {
  std::vector<std::tuple<double, int, int>> cand;
  cand.reserve(train.size());
  for (int i = 0; i < static_cast<int>(train.size()); ++i)
    cand.emplace_back(baseline_distance(*train[i]->waveform, *query.waveform),
                      i, train[i]->label);
  return vote(cand, k);
}

}  // namespace

AccuracyTable cv_protocol(const TrainingCorpus& positives,
                          const TrainingCorpus& negatives,
                          const CvConfig& config) {
  positives.validate();
  negatives.validate();
  const int np = static_cast<int>(positives.waveforms.size());
  const int nn = static_cast<int>(negatives.waveforms.size());
  if (np < 5)
    throw ConfigError("five-fold cross validation needs at least 5 positives");
  if (nn < 3)
    throw ConfigError("three-fold inner validation needs at least 3 negatives");
  for (int k : config.k_values)
    if (k < 1) throw ConfigError("k values must be positive");

  const std::vector<std::string> feature_sets = {"logp", "shape_noise", "raw"};
  AccuracyTable table;

  Rng outer_rng(Rng::substream(config.seed, 0));
  const std::vector<int> outer_fold = fold_of(np, 5, outer_rng);

  for (int f = 0; f < 5; ++f) {
    TrainingCorpus train_pos;
    std::vector<const WaveformSeries*> held_out;
    for (int i = 0; i < np; ++i) {
      if (outer_fold[i] == f)
        held_out.push_back(&positives.waveforms[i]);
      else
        train_pos.waveforms.push_back(positives.waveforms[i]);
    }
    const FitReport fitted = fit(train_pos, config.model);

    // Score the held-out positives and all negatives under this fold's model.
    std::vector<Item> items;
    auto add_item = [&](const WaveformSeries& w, int label) {
      const ScoreVector s = score_waveform(w, fitted.params);
      Item it;
      it.label = label;
      it.logp_feature = Eigen::VectorXd::Constant(1, s.logp);
      it.shape_feature = Eigen::VectorXd(2);
      it.shape_feature << s.score_shape, s.score_noise;
      it.waveform = &w;
      items.push_back(std::move(it));
    };
    for (const auto* w : held_out) add_item(*w, 1);
    for (const auto& w : negatives.waveforms) add_item(w, 0);

    // Stratified inner folds so each has both classes when possible.
    Rng inner_rng(Rng::substream(config.seed, 1 + f));
    std::vector<int> inner_fold(items.size());
    {
      std::vector<int> pos_idx, neg_idx;
      for (int i = 0; i < static_cast<int>(items.size()); ++i)
        (items[i].label == 1 ? pos_idx : neg_idx).push_back(i);
      const std::vector<int> pf = fold_of(static_cast<int>(pos_idx.size()), 3, inner_rng);
      const std::vector<int> nf = fold_of(static_cast<int>(neg_idx.size()), 3, inner_rng);
      for (size_t i = 0; i < pos_idx.size(); ++i) inner_fold[pos_idx[i]] = pf[i];
      for (size_t i = 0; i < neg_idx.size(); ++i) inner_fold[neg_idx[i]] = nf[i];
    }

    for (const auto& fs : feature_sets) {
      for (int k : config.k_values) {
        int correct = 0, total = 0;
        for (int inner = 0; inner < 3; ++inner) {
          std::vector<LabeledFeature> train_feat;
          std::vector<const Item*> train_raw;
          std::vector<const Item*> test_items;
          for (size_t i = 0; i < items.size(); ++i) {
            if (inner_fold[i] == inner) {
              test_items.push_back(&items[i]);
              continue;
            }
            train_raw.push_back(&items[i]);
            LabeledFeature lf;
            lf.label = items[i].label;
            lf.features = (fs == "logp") ? items[i].logp_feature
                                         : items[i].shape_feature;
            train_feat.push_back(std::move(lf));
          }
          if (k > static_cast<int>(train_raw.size()))
            throw ConfigError("inner training fold is smaller than k=" +
                              std::to_string(k));
          for (const Item* q : test_items) {
            int pred;
            if (fs == "raw") {
              pred = knn_raw(train_raw, *q, k);
            } else {
              const Eigen::VectorXd& feat =
                  (fs == "logp") ? q->logp_feature : q->shape_feature;
              pred = knn_classify(train_feat, feat, k);
            }
            correct += (pred == q->label);
            ++total;
          }
        }
        table.rows.push_back(AccuracyRow{
            fs, k, f, static_cast<double>(correct) / std::max(total, 1)});
      }
    }
  }

  // Mean and standard deviation over the outer folds.
  for (const auto& fs : feature_sets) {
    for (int k : config.k_values) {
      std::vector<double> acc;
      for (const auto& row : table.rows)
        if (row.feature_set == fs && row.k == k) acc.push_back(row.accuracy);
      const double mean =
          std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
      double var = 0.0;
      for (double a : acc) var += (a - mean) * (a - mean);
      var /= acc.size();
      table.summary.push_back(AccuracySummary{fs, k, mean, std::sqrt(var)});
    }
  }
  const auto best = std::max_element(
      table.summary.begin(), table.summary.end(),
      [](const AccuracySummary& a, const AccuracySummary& b) {
        if (a.mean != b.mean) return a.mean < b.mean;
        return a.k > b.k;  // prefer the smaller k on ties
      });
  table.best_feature_set = best->feature_set;
  table.best_k = best->k;
  return table;
}

}  // namespace reshmm
