// Shared synthetic fixtures: random toy model sets and planted-teacher
// datasets used by the unit tests and the acceptance suite.
#pragma once

#include <string>
#include <vector>

#include "lrfr/model_set.hpp"
#include "lrfr/scoring.hpp"
#include "oracles.hpp"

namespace testutil {

using namespace lrfr;

struct ToyOptions {
  bool has_label = true;
  int d1 = 4;
  int d2 = 6;
  int vocab = 8;
  int dim = 5;
  int max_arity = 2;
  Form unigram_form = Form::tucker;
  Form ngram_form = Form::cp;
  Ranks ranks{3, 3, 2, 3};
  double scale = 0.5;  // factor magnitudes; init-sized values are too flat for toys
};

inline EmbeddingTable random_embeddings(int vocab, int dim, Rng& rng, double scale = 1.0) {
  std::vector<std::string> words;
  Matrix rows(vocab, dim);
  for (int w = 0; w < vocab; ++w) {
    words.push_back("w" + std::to_string(w));
    for (int j = 0; j < dim; ++j) rows(w, j) = rng.uniform(-scale, scale);
  }
  return EmbeddingTable(words, rows);
}

inline ModelComponent random_component(Form form, const ViewRoles& roles, Index d1, Index d2,
                                       Index dim, const Ranks& ranks, Rng& rng, double scale) {
  std::vector<Index> input_dims, view_ranks;
  if (roles.has_label) {
    input_dims.push_back(d1);
    view_ranks.push_back(ranks.r1);
  }
  input_dims.push_back(d2);
  view_ranks.push_back(ranks.r2);
  for (int i = 0; i < roles.arity; ++i) {
    input_dims.push_back(dim);
    view_ranks.push_back(ranks.r3);
  }
  ModelComponent comp;
  comp.form = form;
  if (form == Form::tucker) {
    comp.tucker.roles = roles;
    comp.tucker.core = oracle::random_tensor(view_ranks, rng, scale);
    for (std::size_t v = 0; v < input_dims.size(); ++v) {
      comp.tucker.factors.push_back(
          oracle::random_matrix(view_ranks[v], input_dims[v], rng, scale));
      comp.tucker.identity_reg.push_back(false);
    }
    check_tucker(comp.tucker);
  } else {
    comp.cp.roles = roles;
    comp.cp.rank = ranks.cp;
    for (std::size_t v = 0; v < input_dims.size(); ++v) {
      comp.cp.factors.push_back(oracle::random_matrix(ranks.cp, input_dims[v], rng, scale));
      comp.cp.identity_reg.push_back(false);
    }
    check_cp(comp.cp);
  }
  return comp;
}

/// Random model set with frozen vocabularies L0..L(d1-1) / P1..P(d2-1)
/// (property 0 is UNK) and one component per arity up to max_arity.
inline ModelSet random_model_set(std::uint64_t seed, const ToyOptions& opts = {}) {
  Rng rng(seed);
  ModelSet model;
  model.has_label = opts.has_label;
  model.embeddings = random_embeddings(opts.vocab, opts.dim, rng);
  for (int i = 0; i < opts.d1; ++i) model.labels.intern("L" + std::to_string(i));
  for (int i = 1; i < opts.d2; ++i) model.properties.intern("P" + std::to_string(i));
  model.labels.freeze();
  model.properties.freeze();
  for (int arity = 1; arity <= opts.max_arity; ++arity) {
    const Form form = arity == 1 ? opts.unigram_form : opts.ngram_form;
    model.by_arity.push_back(random_component(form, ViewRoles{opts.has_label, arity},
                                              opts.d1, model.properties.size(), opts.dim,
                                              opts.ranks, rng, opts.scale));
  }
  model.config.max_arity = opts.max_arity;
  model.config.loss = opts.has_label ? LossKind::log : LossKind::ranking;
  return model;
}

inline FeatureSets random_feature_sets(Rng& rng, int d2, int vocab, int max_arity,
                                       int min_atoms = 1, int max_atoms = 3) {
  FeatureSets sets;
  const int n_uni = min_atoms + rng.index(max_atoms - min_atoms + 1);
  for (int i = 0; i < n_uni; ++i)
    sets.add(FeatureAtom{rng.index(d2), {1 + rng.index(vocab - 1)}});
  if (max_arity >= 2) {
    const int n_bi = rng.index(max_atoms);
    for (int i = 0; i < n_bi; ++i)
      sets.add(FeatureAtom{rng.index(d2), {1 + rng.index(vocab - 1), 1 + rng.index(vocab - 1)}});
  }
  return sets;
}

inline FeatureInstance random_instance(Rng& rng, const ToyOptions& opts) {
  FeatureInstance inst;
  if (opts.has_label) {
    inst.features =
        random_feature_sets(rng, opts.d2, opts.vocab, opts.max_arity);
    inst.gold = rng.index(opts.d1);
  } else {
    const int n_cand = 2 + rng.index(4);
    for (int c = 0; c < n_cand; ++c)
      inst.candidates.push_back(
          random_feature_sets(rng, opts.d2, opts.vocab, opts.max_arity));
    inst.gold = rng.index(n_cand);
  }
  return inst;
}

struct PlantedData {
  ModelSet teacher;
  std::vector<FeatureInstance> train;
  std::vector<FeatureInstance> dev;
};

/// Fresh untrained model over the same vocabularies/embeddings as
/// `like`, initialized the way the training pipeline initializes.
inline ModelSet fresh_student(const ModelSet& like, Form form, const Ranks& ranks,
                              std::uint64_t seed) {
  ModelSet student = like;
  student.by_arity.clear();
  Rng rng(seed);
  for (int arity = 1; arity <= like.config.max_arity; ++arity) {
    const ViewRoles roles{like.has_label, arity};
    std::vector<Index> input_dims, view_ranks;
    if (roles.has_label) {
      input_dims.push_back(like.labels.size());
      view_ranks.push_back(ranks.r1);
    }
    input_dims.push_back(like.properties.size());
    view_ranks.push_back(ranks.r2);
    for (int i = 0; i < arity; ++i) {
      input_dims.push_back(like.embeddings.dim());
      view_ranks.push_back(ranks.r3);
    }
    ModelComponent comp;
    comp.form = form;
    if (form == Form::tucker)
      comp.tucker = init_tucker(input_dims, view_ranks, roles, rng);
    else
      comp.cp = init_cp(input_dims, ranks.cp, roles, rng);
    student.by_arity.push_back(std::move(comp));
  }
  return student;
}

/// Classification data labeled by a random CP teacher: each instance is
/// a handful of unigram atoms and its gold label is the teacher's argmax.
inline PlantedData planted_classification(std::uint64_t seed, int n_train, int n_dev,
                                          int d1 = 4, int d2 = 10, int dim = 8,
                                          int vocab = 40, int cp_rank = 3) {
  ToyOptions opts;
  opts.d1 = d1;
  opts.d2 = d2;
  opts.dim = dim;
  opts.vocab = vocab;
  opts.max_arity = 1;
  opts.unigram_form = Form::cp;
  opts.ranks.cp = cp_rank;
  opts.scale = 1.0;
  PlantedData data;
  data.teacher = random_model_set(seed, opts);
  Rng rng(seed + 1);
  auto draw = [&](std::vector<FeatureInstance>& out, int count) {
    for (int i = 0; i < count; ++i) {
      FeatureInstance inst;
      inst.features = random_feature_sets(rng, d2, vocab, 1, 1, 3);
      inst.gold = argmax(label_scores(data.teacher, inst.features));
      out.push_back(std::move(inst));
    }
  };
  draw(data.train, n_train);
  draw(data.dev, n_dev);
  return data;
}

/// Ranking data from a planted no-label-view CP teacher, 3..8 candidates
/// per query, gold = argmax of the teacher's candidate scores.
inline PlantedData planted_ranking(std::uint64_t seed, int n_train, int n_dev, int d2 = 10,
                                   int dim = 8, int vocab = 40, int cp_rank = 3) {
  ToyOptions opts;
  opts.has_label = false;
  opts.d2 = d2;
  opts.dim = dim;
  opts.vocab = vocab;
  opts.max_arity = 1;
  opts.unigram_form = Form::cp;
  opts.ranks.cp = cp_rank;
  opts.scale = 1.0;
  PlantedData data;
  data.teacher = random_model_set(seed, opts);
  Rng rng(seed + 1);
  auto draw = [&](std::vector<FeatureInstance>& out, int count) {
    for (int i = 0; i < count; ++i) {
      FeatureInstance inst;
      const int n_cand = 3 + rng.index(6);
      for (int c = 0; c < n_cand; ++c)
        inst.candidates.push_back(random_feature_sets(rng, d2, vocab, 1, 1, 2));
      inst.gold = argmax(candidate_scores(data.teacher, inst));
      out.push_back(std::move(inst));
    }
  };
  draw(data.train, n_train);
  draw(data.dev, n_dev);
  return data;
}

/// Linearly separable two-label toy set: the gold label is decided by
/// which of two marker words the single atom carries.
inline PlantedData separable_classification(std::uint64_t seed, int count) {
  ToyOptions opts;
  opts.d1 = 2;
  opts.d2 = 3;
  opts.vocab = 6;
  opts.dim = 4;
  opts.max_arity = 1;
  opts.unigram_form = Form::cp;
  opts.ranks.cp = 2;
  PlantedData data;
  data.teacher = random_model_set(seed, opts);  // only vocabularies/embeddings are used
  Rng rng(seed + 1);
  for (int i = 0; i < count; ++i) {
    FeatureInstance inst;
    const int word = 1 + rng.index(2);  // word ids 1 and 2 are the markers
    inst.features.add(FeatureAtom{1, {word}});
    inst.gold = word - 1;
    data.train.push_back(inst);
    data.dev.push_back(std::move(inst));
  }
  return data;
}

}  // namespace testutil
