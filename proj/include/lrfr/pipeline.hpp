#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lrfr/model_set.hpp"
#include "lrfr/training.hpp"

namespace lrfr {

/// Extraction + model assembly for training: builds the label/property
/// vocabularies over the training set (cluster mode rewrites bigram atoms
/// first so conjoined properties are part of the space), freezes them,
/// extracts the dev set, and initializes one parameter tensor per arity.
struct BuildResult {
  ModelSet model;
  std::vector<FeatureInstance> train;
  std::vector<FeatureInstance> dev;
};

BuildResult build_for_training(const std::vector<RawInstance>& train_raw,
                               const std::vector<RawInstance>& dev_raw,
                               std::vector<TemplateDef> templates, EmbeddingTable embeddings,
                               ClusterMap clusters, bool use_clusters,
                               const TrainConfig& config);

/// Predict-time extraction against frozen vocabularies, including the
/// cluster rewrite when the model was trained in cluster mode.
FeatureInstance extract_for_model(ModelSet& model, const RawInstance& raw);

/// Predictions for a batch of raw instances; `threads` > 1 scores over a
/// worker pool against the read-only model, output order preserved.
std::vector<int> predict_all(ModelSet& model, const std::vector<RawInstance>& raws,
                             int threads = 1);

/// Candidate indices of each ranking instance, best first.
std::vector<std::vector<int>> rank_all(ModelSet& model, const std::vector<RawInstance>& raws,
                                       int threads = 1);

struct LabelScore {
  long long tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
  bool ranking = false;
  long long total = 0;
  long long correct = 0;
  double accuracy = 0;
  std::map<int, LabelScore> per_label;  // classification only
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
};

EvalReport evaluate(ModelSet& model, const std::vector<RawInstance>& raws, int threads = 1);
void print_eval(std::ostream& out, const EvalReport& report, const Vocab& labels);

}  // namespace lrfr
