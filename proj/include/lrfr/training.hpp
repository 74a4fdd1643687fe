#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lrfr/model_set.hpp"
#include "lrfr/tensor.hpp"

namespace lrfr {

/// Loss gradients for one instance, mirroring the model's parameter
/// blocks. Regularization is not included here; it is applied by the
/// optimizer step, lazily over the touched blocks.
struct ComponentGrads {
  bool active = false;
  TensorD core;                  // tucker only; default (empty) for cp
  std::vector<Matrix> factors;   // one per view
  std::vector<int> touched_props;  // property columns with loss gradient
};

struct GradientSet {
  std::vector<ComponentGrads> by_arity;
  std::map<int, Vector> embedding_rows;  // word id -> d(loss)/d(e_w)
};

/// Per-parameter accumulated squared gradients.
struct AdaGradState {
  struct Component {
    TensorD core;
    std::vector<Matrix> factors;
  };
  std::vector<Component> by_arity;
  Matrix embeddings;  // dim x vocab, allocated when fine-tuning
  double eps = 1e-8;
};

AdaGradState init_adagrad(const ModelSet& model, bool fine_tune);

/// Per-instance loss: -log posterior of the gold label, or of the gold
/// candidate for the ranking loss. No regularization term.
double instance_loss(const ModelSet& model, const FeatureInstance& inst, LossKind loss);

/// Analytic gradients of instance_loss for every parameter block, plus
/// d(loss)/d(e_w) for the instance's words when fine-tuning is enabled.
GradientSet instance_gradients(const ModelSet& model, const FeatureInstance& inst,
                               const TrainConfig& config);

/// AdaGrad update over the touched blocks: for each parameter p with
/// combined gradient g = loss gradient + lambda * d(||W - ref||^2)/dp
/// (ref = I for square views initialized at identity, 0 otherwise, and
/// no regularizer on embeddings), accumulate g^2 and step
/// p -= eta * g / (sqrt(acc) + eps).
void adagrad_step(ModelSet& model, const GradientSet& grads, AdaGradState& state,
                  const TrainConfig& config);

/// Classification accuracy or ranking accuracy@1.
double dev_metric(const ModelSet& model, std::span<const FeatureInstance> dev, LossKind loss);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0;  // mean per-instance loss over the pass
  double dev_metric = 0;
  long long elapsed_ms = 0;
};

struct TrainResult {
  ModelSet model;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_metric = 0;
};

/// Seeded-shuffle SGD with per-epoch dev evaluation and early stopping:
/// training halts once the dev metric has failed to improve for
/// `patience` consecutive evaluations, and the best-dev parameters are
/// restored. Sequential and deterministic given the seed. When `log` is
/// given, one tab-separated line per epoch is written:
/// epoch, train loss, dev metric, elapsed ms.
TrainResult train(ModelSet model, std::span<const FeatureInstance> train_set,
                  std::span<const FeatureInstance> dev_set, const TrainConfig& config,
                  std::ostream* log = nullptr);

struct FdReport {
  std::vector<std::pair<std::string, double>> blocks;  // block name, max rel err
  double max_error = 0;
};

/// Central-difference check of instance_gradients over every parameter
/// block (including embeddings when fine-tuning). Relative error per
/// coordinate is |a - f| / max(|a| + |f|, 1e-6).
FdReport finite_diff_check(const ModelSet& model, const FeatureInstance& inst,
                           const TrainConfig& config, double eps = 1e-5);

}  // namespace lrfr
