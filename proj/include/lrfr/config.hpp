#pragma once

#include <cstdint>
#include <stdexcept>

#include "lrfr/model.hpp"

namespace lrfr {

enum class LossKind { log, ranking };

/// How features of mixed lexical arity are handled: one tensor per arity,
/// or a single unigram tensor with bigram atoms rewritten through word
/// clusters.
enum class NgramMode { multi_tensor, cluster };

struct TrainConfig {
  double eta = 0.05;
  double lambda = 0.005;
  Ranks ranks{10, 20, 50, 50};
  int epochs = 50;
  int patience = 5;
  int max_arity = 2;
  std::uint64_t seed = 1;
  bool fine_tune = false;
  LossKind loss = LossKind::log;
  NgramMode ngram_mode = NgramMode::multi_tensor;
  Form unigram_form = Form::tucker;
  Form ngram_form = Form::cp;

  void validate() const {
    if (eta <= 0) throw std::invalid_argument("TrainConfig: eta must be positive");
    if (lambda < 0) throw std::invalid_argument("TrainConfig: lambda must be nonnegative");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (max_arity < 1) throw std::invalid_argument("TrainConfig: max_arity must be >= 1");
  }
};

inline const char* loss_name(LossKind k) { return k == LossKind::log ? "log" : "ranking"; }
inline const char* ngram_mode_name(NgramMode m) {
  return m == NgramMode::multi_tensor ? "multi-tensor" : "cluster";
}

}  // namespace lrfr
