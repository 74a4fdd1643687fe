#pragma once

#include <span>
#include <vector>

#include "lrfr/model_set.hpp"
#include "lrfr/tensor.hpp"

namespace lrfr {

// ---------------------------------------------------------------------------
// Per-feature kernels, templated on scalar so an instrumented scalar type
// can tally the exact multiply count of the production evaluation order.
// hs holds one hidden vector per view, view 0 first. Lexical views are
// contracted into the core first and the leading view last, so all-label
// scoring can reuse the partially contracted core.
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar tucker_score_views(const Tensor<Scalar>& core, std::span<const Vec<Scalar>> hs) {
  if (core.order() == 1) {
    Scalar acc(0);
    for (Index i = 0; i < core.size(); ++i) acc = acc + core[i] * hs[0][i];
    return acc;
  }
  const Vec<Scalar> v = contract_trailing(core, hs.subspan(1));
  Scalar acc(0);
  for (Index i = 0; i < v.size(); ++i) acc = acc + v[i] * hs[0][i];
  return acc;
}

/// Hadamard chain of the given hidden vectors.
template <typename Scalar>
Vec<Scalar> cp_mix(std::span<const Vec<Scalar>> hs) {
  Vec<Scalar> z = hs[0];
  for (std::size_t k = 1; k < hs.size(); ++k) z = hadamard(z, hs[k]);
  return z;
}

template <typename Scalar>
Scalar cp_score_views(std::span<const Vec<Scalar>> hs) {
  const Vec<Scalar> z = cp_mix(hs.subspan(1));
  Scalar acc(0);
  for (Index i = 0; i < z.size(); ++i) acc = acc + z[i] * hs[0][i];
  return acc;
}

// ---------------------------------------------------------------------------
// Spec-level feature scoring: label and property ids select factor
// columns (lookup-table transforms); word inputs are dense vectors
// multiplied through the lexical factors.
// ---------------------------------------------------------------------------

double score_feature_tucker(const TuckerModel& model, int y, int u,
                            std::span<const Vector> words);
double score_feature_cp(const CPModel& model, int y, int u, std::span<const Vector> words);

// Ranking variants without a label view.
double score_feature_tucker(const TuckerModel& model, int u, std::span<const Vector> words);
double score_feature_cp(const CPModel& model, int u, std::span<const Vector> words);

// ---------------------------------------------------------------------------
// Hidden-representation cache: label and property transforms are factor
// column reads; per-word lexical transforms are precomputed over the
// whole vocabulary before prediction. Built once, then read-only.
// ---------------------------------------------------------------------------

struct HiddenReps {
  // word_h[arity_index][lexical slot] is rank x vocab: column w holds
  // W^(i) * e_w for word id w.
  std::vector<std::vector<Matrix>> word_h;
};

HiddenReps build_hidden_reps(const ModelSet& model);

// ---------------------------------------------------------------------------
// Instance scoring (grouped evaluation: atoms sharing the same words are
// folded into one property-count vector before the core contraction).
// ---------------------------------------------------------------------------

/// Scores for every label. Throws if a feature arity has no model.
Vector label_scores(const ModelSet& model, const FeatureSets& feats,
                    const HiddenReps* cache = nullptr);

double score_instance(const ModelSet& model, const FeatureInstance& inst, int y,
                      const HiddenReps* cache = nullptr);

/// Softmax over label scores, computed with max subtraction. Entries sum
/// to 1; ties in argmax resolve to the lowest label index.
Vector posterior(const ModelSet& model, const FeatureInstance& inst,
                 const HiddenReps* cache = nullptr);

/// One score per ranking candidate.
Vector candidate_scores(const ModelSet& model, const FeatureInstance& inst,
                        const HiddenReps* cache = nullptr);
Vector candidate_posterior(const ModelSet& model, const FeatureInstance& inst,
                           const HiddenReps* cache = nullptr);

/// Argmax label (classification) or candidate index (ranking).
int predict(const ModelSet& model, const FeatureInstance& inst,
            const HiddenReps* cache = nullptr);

/// Scores an instance against a unigram-only model, rewriting any bigram
/// atoms through the word-cluster reduction on the fly.
double score_instance_clustered(ModelSet& model, const FeatureInstance& inst, int y);

/// Numerically stable softmax; input must be finite.
Vector stable_softmax(const Vector& scores);

/// First index of the maximum entry.
int argmax(const Vector& v);

}  // namespace lrfr
