#pragma once

#include "reshmm/learning.hpp"
#include "reshmm/types.hpp"

namespace reshmm {

struct LabeledFeature {
  std::string id;
  int label = 0;
  Eigen::VectorXd features;
};

// Majority vote among the k nearest training points by Euclidean distance on
// per-dimension z-scored features (statistics from the training set only).
// Distance ties go to the earlier training index; vote ties to the label
// with the smaller summed distance.
int knn_classify(const std::vector<LabeledFeature>& train,
                 const Eigen::VectorXd& query, int k);

// Mean squared pointwise difference; unequal lengths are truncated to the
// shorter waveform.
double baseline_distance(const WaveformSeries& a, const WaveformSeries& b);

struct CvConfig {
  FitConfig model;
  std::vector<int> k_values = {1, 3, 5, 7, 9};
  std::uint64_t seed = 0;
};

struct AccuracyRow {
  std::string feature_set;  // "logp", "shape_noise", or "raw"
  int k = 0;
  int fold = 0;  // outer fold index
  double accuracy = 0.0;
};

struct AccuracySummary {
  std::string feature_set;
  int k = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;
  std::vector<AccuracySummary> summary;
  std::string best_feature_set;
  int best_k = 0;
};

// The nested protocol: outer 5-fold split of the positives, a model fit on
// each fold's training positives, scores for the held-out positives and all
// negatives, then inner 3-fold CV per k over those items. Runs the feature
// sets {logp}, {shape_noise} and the raw-distance baseline.
AccuracyTable cv_protocol(const TrainingCorpus& positives,
                          const TrainingCorpus& negatives,
                          const CvConfig& config);

}  // namespace reshmm
