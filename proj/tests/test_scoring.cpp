#include <doctest.h>

#include <cmath>
#include <limits>

#include "lrfr/scoring.hpp"
#include "testutil.hpp"

using namespace lrfr;
using testutil::ToyOptions;

namespace {

// Naive per-feature oracle: every atom scored on its own against the
// full materialized tensor, summed.
double naive_instance_score(const ModelSet& model, const FeatureSets& feats, int y) {
  double total = 0;
  for (int arity = 1; arity <= feats.max_arity(); ++arity) {
    if (feats.arity(arity).empty()) continue;
    const ModelComponent& comp = model.component(arity);
    const TensorD full = comp.form == Form::tucker ? oracle::tucker_materialize(comp.tucker)
                                                   : oracle::cp_materialize(comp.cp);
    for (const auto& atom : feats.arity(arity)) {
      std::vector<Vector> inputs;
      if (model.has_label) inputs.push_back(oracle::one_hot(model.labels.size(), y));
      inputs.push_back(oracle::one_hot(model.properties.size(), atom.property));
      for (int w : atom.words) inputs.push_back(model.embeddings.vector(w));
      total += oracle::full_tensor_score(full, inputs);
    }
  }
  return total;
}

}  // namespace

TEST_CASE("rank-1 tucker score is the product of the hidden scalars") {
  TuckerModel m;
  m.core = TensorD({1, 1, 1}, {2.0});
  m.roles = {true, 1};
  // Factors turn one-hot/e inputs into hidden scalars 3, 5, 7.
  m.factors = {Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, 5.0),
               Matrix::Constant(1, 1, 7.0)};
  const std::vector<Vector> words{Vector::Ones(1)};
  CHECK(score_feature_tucker(m, 0, 0, words) == doctest::Approx(210.0));
}

TEST_CASE("identity factors with one-hot inputs reduce scoring to a tensor lookup") {
  Rng rng(30);
  TuckerModel m;
  m.core = oracle::random_tensor({3, 4, 2}, rng);
  m.roles = {true, 1};
  m.factors = {Matrix::Identity(3, 3), Matrix::Identity(4, 4), Matrix::Identity(2, 2)};
  for (Index y = 0; y < 3; ++y)
    for (Index u = 0; u < 4; ++u)
      for (Index w = 0; w < 2; ++w) {
        const std::vector<Vector> words{oracle::one_hot(2, w)};
        CHECK(score_feature_tucker(m, static_cast<int>(y), static_cast<int>(u), words) ==
              doctest::Approx(m.core(y, u, w)).epsilon(1e-14));
      }
}

TEST_CASE("a zero hidden vector zeroes the score") {
  Rng rng(31);
  TuckerModel m;
  m.core = oracle::random_tensor({2, 2, 2}, rng);
  m.roles = {true, 1};
  m.factors = {oracle::random_matrix(2, 3, rng), Matrix::Zero(2, 4),
               oracle::random_matrix(2, 5, rng)};
  const std::vector<Vector> words{oracle::random_vector(5, rng)};
  CHECK(score_feature_tucker(m, 1, 2, words) == 0.0);
}

TEST_CASE("rank-1 cp score multiplies hidden scalars") {
  CPModel m;
  m.rank = 1;
  m.roles = {true, 1};
  m.factors = {Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 3.0),
               Matrix::Constant(1, 1, 4.0)};
  const std::vector<Vector> words{Vector::Ones(1)};
  CHECK(score_feature_cp(m, 0, 0, words) == doctest::Approx(24.0));
}

TEST_CASE("cp rank-2 with a zeroed second component reduces to the first term") {
  Rng rng(32);
  CPModel m;
  m.rank = 2;
  m.roles = {true, 1};
  m.factors = {oracle::random_matrix(2, 3, rng), oracle::random_matrix(2, 4, rng),
               oracle::random_matrix(2, 5, rng)};
  m.factors[1].row(1).setZero();
  CPModel r1 = m;
  r1.rank = 1;
  for (auto& f : r1.factors) f.conservativeResize(1, Eigen::NoChange);
  const std::vector<Vector> words{oracle::random_vector(5, rng)};
  CHECK(score_feature_cp(m, 1, 2, words) ==
        doctest::Approx(score_feature_cp(r1, 1, 2, words)).epsilon(1e-12));
}

TEST_CASE("factored scores equal one-hot dots against the materialized tensor") {
  // Appendix-style oracle equivalence across random toy configurations.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const Form form : {Form::tucker, Form::cp}) {
      Rng rng(seed);
      ToyOptions opts;
      opts.d1 = 2 + rng.index(3);
      opts.d2 = 2 + rng.index(4);
      opts.dim = 2 + rng.index(5);
      opts.vocab = 6;
      opts.max_arity = 2;
      opts.unigram_form = form;
      opts.ngram_form = form;
      opts.ranks = {2, 3, 2, 3};
      const ModelSet model = testutil::random_model_set(seed * 101, opts);

      for (int arity = 1; arity <= 2; ++arity) {
        const ModelComponent& comp = model.component(arity);
        const TensorD full = form == Form::tucker ? tucker_materialize(comp.tucker)
                                                  : cp_materialize(comp.cp);
        for (int trial = 0; trial < 5; ++trial) {
          const int y = rng.index(opts.d1);
          const int u = rng.index(model.properties.size());
          std::vector<Vector> one_hots{oracle::one_hot(opts.d1, y),
                                       oracle::one_hot(model.properties.size(), u)};
          std::vector<Vector> words;
          for (int i = 0; i < arity; ++i) {
            const Index w = rng.index(opts.dim);
            words.push_back(oracle::one_hot(opts.dim, w));
            one_hots.push_back(words.back());
          }
          const double factored =
              form == Form::tucker
                  ? score_feature_tucker(comp.tucker, y, u, words)
                  : score_feature_cp(comp.cp, y, u, words);
          const double expected =
              frobenius_dot(full, outer_product(std::span<const Vector>(one_hots)));
          CHECK(std::abs(factored - expected) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("scores are multilinear in each view's input") {
  Rng rng(33);
  ToyOptions opts;
  const ModelSet model = testutil::random_model_set(77, opts);
  const ModelComponent& comp = model.component(1);
  const int y = 1, u = 2;
  const Vector w1 = oracle::random_vector(opts.dim, rng);
  const Vector w2 = oracle::random_vector(opts.dim, rng);
  const double alpha = 1.7, beta = -0.4;
  const Vector mix = alpha * w1 + beta * w2;
  const double s_mix = score_feature_tucker(comp.tucker, y, u, {{mix}});
  const double s1 = score_feature_tucker(comp.tucker, y, u, {{w1}});
  const double s2 = score_feature_tucker(comp.tucker, y, u, {{w2}});
  CHECK(s_mix == doctest::Approx(alpha * s1 + beta * s2).epsilon(1e-10));
}

TEST_CASE("cp score with embeddings equals one-hot score through the composed factor") {
  Rng rng(34);
  ToyOptions opts;
  opts.unigram_form = Form::cp;
  opts.max_arity = 1;
  const ModelSet model = testutil::random_model_set(55, opts);
  const CPModel& m = model.component(1).cp;

  // Compose the lexical factor with the embedding table: W' = W * E^T.
  CPModel composed = m;
  const int lex = m.roles.lexical_view(0);
  composed.factors[static_cast<std::size_t>(lex)] =
      m.factors[static_cast<std::size_t>(lex)] * model.embeddings.vectors();

  for (int w = 0; w < model.embeddings.size(); ++w) {
    const std::vector<Vector> dense{Vector(model.embeddings.vector(w))};
    const std::vector<Vector> onehot{oracle::one_hot(model.embeddings.size(), w)};
    CHECK(score_feature_cp(m, 1, 2, dense) ==
          doctest::Approx(score_feature_cp(composed, 1, 2, onehot)).epsilon(1e-10));
  }
}

TEST_CASE("instance scoring: empty sets, singletons, grouped vs naive") {
  ToyOptions opts;
  const ModelSet model = testutil::random_model_set(99, opts);

  FeatureInstance empty;
  empty.gold = 0;
  CHECK(score_instance(model, empty, 1) == 0.0);

  FeatureInstance single;
  single.features.add(FeatureAtom{2, {3}});
  const ModelComponent& comp = model.component(1);
  const std::vector<Vector> words{Vector(model.embeddings.vector(3))};
  CHECK(score_instance(model, single, 1) ==
        doctest::Approx(score_feature_tucker(comp.tucker, 1, 2, words)).epsilon(1e-12));

  // 3 unigram + 2 bigram atoms against the per-feature summation oracle.
  Rng rng(35);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureInstance inst;
    for (int i = 0; i < 3; ++i)
      inst.features.add(FeatureAtom{rng.index(opts.d2), {1 + rng.index(opts.vocab - 1)}});
    for (int i = 0; i < 2; ++i)
      inst.features.add(FeatureAtom{
          rng.index(opts.d2), {1 + rng.index(opts.vocab - 1), 1 + rng.index(opts.vocab - 1)}});
    for (int y = 0; y < opts.d1; ++y) {
      const double grouped = score_instance(model, inst, y);
      const double naive = naive_instance_score(model, inst.features, y);
      CHECK(std::abs(grouped - naive) < 1e-9);
    }
  }
}

TEST_CASE("missing arity model raises a data error") {
  ToyOptions opts;
  opts.max_arity = 1;
  const ModelSet model = testutil::random_model_set(44, opts);
  FeatureInstance inst;
  inst.features.add(FeatureAtom{1, {1, 2}});
  inst.gold = 0;
  CHECK_THROWS_WITH_AS(score_instance(model, inst, 0), doctest::Contains("arity-2"), DataError);
}

TEST_CASE("posterior: uniform scores, closed form, shift invariance") {
  const Vector zeros = Vector::Zero(4);
  const Vector uniform = stable_softmax(zeros);
  for (Index i = 0; i < 4; ++i) CHECK(uniform[i] == doctest::Approx(0.25));

  Vector two(2);
  two << 0.0, std::log(3.0);
  const Vector p = stable_softmax(two);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

  Vector shifted = two.array() + 1e6;
  const Vector q = stable_softmax(shifted);
  CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(argmax(q) == argmax(p));
}

TEST_CASE("a non-finite score raises a numeric error naming the label") {
  ToyOptions opts;
  opts.max_arity = 1;
  ModelSet model = testutil::random_model_set(67, opts);
  model.by_arity[0].tucker.core[0] = std::numeric_limits<double>::infinity();
  FeatureInstance inst;
  inst.features.add(FeatureAtom{1, {1}});
  CHECK_THROWS_WITH_AS(posterior(model, inst), doctest::Contains("L"), NumericError);
}

TEST_CASE("feature arity must match the model's lexical view count") {
  ToyOptions opts;
  const ModelSet model = testutil::random_model_set(68, opts);
  const std::vector<Vector> two_words{Vector::Zero(opts.dim), Vector::Zero(opts.dim)};
  CHECK_THROWS_WITH_AS(score_feature_tucker(model.component(1).tucker, 0, 1, two_words),
                       doctest::Contains("arity"), std::invalid_argument);
}

TEST_CASE("posterior sums to one and ties break to the lowest label") {
  ToyOptions opts;
  const ModelSet model = testutil::random_model_set(66, opts);
  Rng rng(36);
  FeatureInstance inst;
  inst.features = testutil::random_feature_sets(rng, opts.d2, opts.vocab, 2);
  const Vector p = posterior(model, inst);
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));

  Vector tie(3);
  tie << 5.0, 5.0, 1.0;
  CHECK(argmax(tie) == 0);
}

TEST_CASE("ranking: single candidate, symmetric tie, naive oracle") {
  ToyOptions opts;
  opts.has_label = false;
  const ModelSet model = testutil::random_model_set(88, opts);

  FeatureInstance one;
  one.candidates.resize(1);
  one.candidates[0].add(FeatureAtom{1, {2}});
  one.gold = 0;
  CHECK(candidate_posterior(model, one)[0] == doctest::Approx(1.0));

  FeatureInstance tie;
  tie.candidates.resize(2);
  tie.candidates[0].add(FeatureAtom{1, {2}});
  tie.candidates[1].add(FeatureAtom{1, {2}});
  tie.gold = 0;
  const Vector p = candidate_posterior(model, tie);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(predict(model, tie) == 0);

  Rng rng(37);
  FeatureInstance three;
  three.candidates.resize(3);
  for (auto& cand : three.candidates)
    cand = testutil::random_feature_sets(rng, opts.d2, opts.vocab, 2);
  three.gold = 0;
  const Vector s = candidate_scores(model, three);
  for (int c = 0; c < 3; ++c)
    CHECK(std::abs(s[c] - naive_instance_score(model, three.candidates[c], -1)) < 1e-9);

  FeatureInstance none;
  none.gold = 0;
  CHECK_THROWS_AS(candidate_posterior(model, none), DataError);
}

TEST_CASE("clustered scoring equals manual reduction followed by unigram scoring") {
  ToyOptions opts;
  opts.max_arity = 1;
  ModelSet model = testutil::random_model_set(111, opts);
  model.mode = NgramMode::cluster;
  model.use_clusters = true;
  for (int w = 1; w < opts.vocab; ++w)
    model.clusters.insert(model.embeddings.word(w), w % 2 ? "01" : "10");

  Rng rng(38);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureInstance inst;
    inst.features.add(FeatureAtom{rng.index(opts.d2),
                                  {1 + rng.index(opts.vocab - 1), 1 + rng.index(opts.vocab - 1)}});
    if (trial % 3 == 0) inst.features.add(FeatureAtom{rng.index(opts.d2), {1}});
    const int y = rng.index(opts.d1);

    FeatureInstance reduced = inst;
    cluster_reduce_all(reduced, model.clusters, model.properties, model.embeddings);
    const double via_reduce = score_instance(model, reduced, y);
    const double direct = score_instance_clustered(model, inst, y);
    CHECK(direct == via_reduce);  // bitwise: identical evaluation
  }

  // Unigram-only instances are untouched by the rewrite.
  FeatureInstance uni;
  uni.features.add(FeatureAtom{1, {2}});
  CHECK(score_instance_clustered(model, uni, 1) == score_instance(model, uni, 1));
}

TEST_CASE("clustered bigram score equals the two-term identity computed monolithically") {
  ToyOptions opts;
  opts.max_arity = 1;
  ModelSet model = testutil::random_model_set(112, opts);
  model.mode = NgramMode::cluster;
  model.use_clusters = true;
  for (int w = 1; w < opts.vocab; ++w)
    model.clusters.insert(model.embeddings.word(w), w % 2 ? "0110" : "0111");

  Rng rng(39);
  const TuckerModel& uni = model.component(1).tucker;
  for (int trial = 0; trial < 20; ++trial) {
    const int u = rng.index(opts.d2);
    const int w1 = 1 + rng.index(opts.vocab - 1);
    const int w2 = 1 + rng.index(opts.vocab - 1);
    const int y = rng.index(opts.d1);

    FeatureInstance inst;
    inst.features.add(FeatureAtom{u, {w1, w2}});
    const double via_cluster = score_instance_clustered(model, inst, y);

    // Monolithic evaluation of the two-term rewrite.
    const std::string base = model.properties.name(u);
    const int u1 = model.properties.lookup(
        base + "∧" + model.clusters.cluster(model.embeddings.word(w1)));
    const int u2 = model.properties.lookup(
        base + "∧" + model.clusters.cluster(model.embeddings.word(w2)));
    const double monolithic =
        score_feature_tucker(uni, y, u1, {{Vector(model.embeddings.vector(w2))}}) +
        score_feature_tucker(uni, y, u2, {{Vector(model.embeddings.vector(w1))}});
    CHECK(via_cluster == doctest::Approx(monolithic).epsilon(1e-12));
  }
}

TEST_CASE("bigram atoms whose reduced properties hit zero factor rows score zero") {
  ToyOptions opts;
  opts.max_arity = 1;
  ModelSet model = testutil::random_model_set(113, opts);
  model.mode = NgramMode::cluster;
  model.use_clusters = true;
  // No cluster entries: every reduction lands on UNK conjunctions, which
  // are unseen property strings, interned to UNK; zero that column.
  TuckerModel& uni = model.by_arity[0].tucker;
  uni.factors[static_cast<std::size_t>(uni.roles.property_view())].col(kUnkId).setZero();
  FeatureInstance inst;
  inst.features.add(FeatureAtom{1, {2, 3}});
  CHECK(score_instance_clustered(model, inst, 0) == 0.0);
}
