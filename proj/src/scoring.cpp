#include "lrfr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lrfr/errors.hpp"

namespace lrfr {

const ModelComponent& ModelSet::component(int n) const {
  if (!has_arity(n))
    throw DataError("no parameter tensor for arity-" + std::to_string(n) + " features");
  return by_arity[static_cast<std::size_t>(n - 1)];
}

ModelComponent& ModelSet::component(int n) {
  if (!has_arity(n))
    throw DataError("no parameter tensor for arity-" + std::to_string(n) + " features");
  return by_arity[static_cast<std::size_t>(n - 1)];
}

namespace {

std::vector<Vector> view_hiddens(const std::vector<Matrix>& factors, const ViewRoles& roles,
                                 int y, int u, std::span<const Vector> words) {
  if (static_cast<int>(words.size()) != roles.arity)
    throw std::invalid_argument("feature arity " + std::to_string(words.size()) +
                                " does not match model arity " + std::to_string(roles.arity));
  std::vector<Vector> hs;
  hs.reserve(factors.size());
  if (roles.has_label) hs.push_back(factors[static_cast<std::size_t>(roles.label_view())].col(y));
  hs.push_back(factors[static_cast<std::size_t>(roles.property_view())].col(u));
  for (int i = 0; i < roles.arity; ++i)
    hs.push_back(factors[static_cast<std::size_t>(roles.lexical_view(i))] *
                 words[static_cast<std::size_t>(i)]);
  return hs;
}

}  // namespace

double score_feature_tucker(const TuckerModel& model, int y, int u,
                            std::span<const Vector> words) {
  const auto hs = view_hiddens(model.factors, model.roles, y, u, words);
  return tucker_score_views(model.core, std::span<const Vector>(hs));
}

double score_feature_cp(const CPModel& model, int y, int u, std::span<const Vector> words) {
  const auto hs = view_hiddens(model.factors, model.roles, y, u, words);
  return cp_score_views(std::span<const Vector>(hs));
}

double score_feature_tucker(const TuckerModel& model, int u, std::span<const Vector> words) {
  if (model.roles.has_label)
    throw std::invalid_argument("model has a label view; pass a label id");
  const auto hs = view_hiddens(model.factors, model.roles, /*y=*/0, u, words);
  return tucker_score_views(model.core, std::span<const Vector>(hs));
}

double score_feature_cp(const CPModel& model, int u, std::span<const Vector> words) {
  if (model.roles.has_label)
    throw std::invalid_argument("model has a label view; pass a label id");
  const auto hs = view_hiddens(model.factors, model.roles, /*y=*/0, u, words);
  return cp_score_views(std::span<const Vector>(hs));
}

HiddenReps build_hidden_reps(const ModelSet& model) {
  HiddenReps reps;
  reps.word_h.resize(model.by_arity.size());
  for (std::size_t k = 0; k < model.by_arity.size(); ++k) {
    const int arity = static_cast<int>(k) + 1;
    if (!model.has_arity(arity)) continue;
    const ModelComponent& comp = model.by_arity[k];
    const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    const ViewRoles& roles = comp.roles();
    for (int i = 0; i < roles.arity; ++i)
      reps.word_h[k].push_back(factors[static_cast<std::size_t>(roles.lexical_view(i))] *
                               model.embeddings.vectors());
  }
  return reps;
}

namespace {

Vector word_hidden(const ModelSet& model, const HiddenReps* cache, int arity_index,
                   const std::vector<Matrix>& factors, const ViewRoles& roles, int slot,
                   int word) {
  if (cache != nullptr)
    return cache->word_h[static_cast<std::size_t>(arity_index)][static_cast<std::size_t>(slot)]
        .col(word);
  return factors[static_cast<std::size_t>(roles.lexical_view(slot))] *
         Vector(model.embeddings.vector(word));
}

// Grouped evaluation: atoms sharing a word tuple contribute one summed
// property vector and a single core contraction.
std::map<std::vector<int>, Vector> group_by_words(const std::vector<FeatureAtom>& atoms,
                                                  const Matrix& prop_factor) {
  std::map<std::vector<int>, Vector> groups;
  for (const auto& atom : atoms) {
    auto [it, fresh] = groups.try_emplace(atom.words, Vector::Zero(prop_factor.rows()));
    it->second += prop_factor.col(atom.property);
  }
  return groups;
}

// Sum over one arity's atoms of the per-atom vector over the leading
// view (label scores when a label view exists, otherwise the property
// view, in which case the caller dots with nothing further).
void accumulate_arity(const ModelSet& model, const HiddenReps* cache, int arity,
                      const std::vector<FeatureAtom>& atoms, Vector* label_acc,
                      double* scalar_acc) {
  const ModelComponent& comp = model.component(arity);
  const ViewRoles& roles = comp.roles();
  const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
  const Matrix& prop_factor = factors[static_cast<std::size_t>(roles.property_view())];

  for (const auto& [words, h_prop] : group_by_words(atoms, prop_factor)) {
    std::vector<Vector> trailing;
    trailing.reserve(1 + words.size());
    trailing.push_back(h_prop);
    for (std::size_t i = 0; i < words.size(); ++i)
      trailing.push_back(word_hidden(model, cache, arity - 1, factors, roles,
                                     static_cast<int>(i), words[i]));
    if (roles.has_label) {
      if (comp.form == Form::tucker)
        *label_acc += contract_trailing(comp.tucker.core, std::span<const Vector>(trailing));
      else
        *label_acc += cp_mix(std::span<const Vector>(trailing));
    } else {
      std::span<const Vector> hs(trailing);
      if (comp.form == Form::tucker)
        *scalar_acc += tucker_score_views(comp.tucker.core, hs);
      else
        *scalar_acc += cp_score_views(hs);
    }
  }
}

}  // namespace

Vector label_scores(const ModelSet& model, const FeatureSets& feats, const HiddenReps* cache) {
  if (!model.has_label) throw std::invalid_argument("label_scores: model has no label view");
  Vector scores = Vector::Zero(model.labels.size());
  for (int arity = 1; arity <= feats.max_arity(); ++arity) {
    const auto& atoms = feats.arity(arity);
    if (atoms.empty()) continue;
    const ModelComponent& comp = model.component(arity);
    const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    const Matrix& label_factor = factors[static_cast<std::size_t>(comp.roles().label_view())];
    Vector acc = Vector::Zero(label_factor.rows());
    accumulate_arity(model, cache, arity, atoms, &acc, nullptr);
    scores.noalias() += label_factor.transpose() * acc;
  }
  return scores;
}

namespace {

double set_score(const ModelSet& model, const FeatureSets& feats, const HiddenReps* cache) {
  double acc = 0;
  for (int arity = 1; arity <= feats.max_arity(); ++arity) {
    const auto& atoms = feats.arity(arity);
    if (atoms.empty()) continue;
    accumulate_arity(model, cache, arity, atoms, nullptr, &acc);
  }
  return acc;
}

}  // namespace

double score_instance(const ModelSet& model, const FeatureInstance& inst, int y,
                      const HiddenReps* cache) {
  if (inst.is_ranking()) {
    if (y < 0 || y >= static_cast<int>(inst.candidates.size()))
      throw std::invalid_argument("candidate index out of range");
    return set_score(model, inst.candidates[static_cast<std::size_t>(y)], cache);
  }
  if (inst.features.empty()) return 0;
  return label_scores(model, inst.features, cache)[y];
}

Vector candidate_scores(const ModelSet& model, const FeatureInstance& inst,
                        const HiddenReps* cache) {
  if (!inst.is_ranking()) throw std::invalid_argument("candidate_scores: not a ranking instance");
  Vector s(static_cast<Index>(inst.candidates.size()));
  for (std::size_t c = 0; c < inst.candidates.size(); ++c)
    s[static_cast<Index>(c)] = set_score(model, inst.candidates[c], cache);
  return s;
}

Vector stable_softmax(const Vector& scores) {
  const double m = scores.maxCoeff();
  Vector p = (scores.array() - m).exp();
  p /= p.sum();
  return p;
}

int argmax(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

Vector posterior(const ModelSet& model, const FeatureInstance& inst, const HiddenReps* cache) {
  const Vector s = label_scores(model, inst.features, cache);
  for (Index i = 0; i < s.size(); ++i)
    if (!std::isfinite(s[i]))
      throw NumericError("non-finite score for label '" + model.labels.name(static_cast<int>(i)) +
                         "'");
  return stable_softmax(s);
}

Vector candidate_posterior(const ModelSet& model, const FeatureInstance& inst,
                           const HiddenReps* cache) {
  if (inst.candidates.empty()) throw DataError("ranking instance has an empty candidate list");
  const Vector s = candidate_scores(model, inst, cache);
  for (Index i = 0; i < s.size(); ++i)
    if (!std::isfinite(s[i]))
      throw NumericError("non-finite score for candidate " + std::to_string(i));
  return stable_softmax(s);
}

int predict(const ModelSet& model, const FeatureInstance& inst, const HiddenReps* cache) {
  if (inst.is_ranking()) return argmax(candidate_scores(model, inst, cache));
  return argmax(label_scores(model, inst.features, cache));
}

double score_instance_clustered(ModelSet& model, const FeatureInstance& inst, int y) {
  FeatureInstance reduced = inst;
  cluster_reduce_all(reduced, model.clusters, model.properties, model.embeddings);
  return score_instance(model, reduced, y);
}

}  // namespace lrfr
