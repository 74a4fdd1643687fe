#include <doctest.h>

#include <sstream>

#include "lrfr/pipeline.hpp"
#include "lrfr/scoring.hpp"
#include "testutil.hpp"

using namespace lrfr;

namespace {

// A small classification corpus: label decided by the marker annotation.
std::vector<RawInstance> marker_corpus(int count, int offset = 0) {
  std::vector<RawInstance> out;
  for (int i = 0; i < count; ++i) {
    RawInstance raw;
    raw.line = i + 1;
    const bool pos = (i + offset) % 2 == 0;
    raw.tokens = {pos ? "good" : "bad", "stuff"};
    raw.token_ann["pos"] = {"ADJ", "NN"};
    raw.label = pos ? "P" : "N";
    out.push_back(std::move(raw));
  }
  return out;
}

std::vector<TemplateDef> marker_templates() {
  return {{"word", "W:{pos@1}", {"*"}, 0}};
}

EmbeddingTable marker_embeddings() {
  Matrix rows(3, 4);
  rows << 1, 0, 0, 0.5, -1, 0, 0, 0.5, 0, 1, -1, 0.25;
  return EmbeddingTable({"good", "bad", "stuff"}, rows);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.patience = 30;
  cfg.ranks = {2, 2, 2, 2};
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("build_for_training assembles vocabularies, components, and datasets") {
  const TrainConfig cfg = quick_config();
  const auto built = build_for_training(marker_corpus(8), marker_corpus(4, 1),
                                        marker_templates(), marker_embeddings(), {}, false, cfg);
  CHECK(built.model.labels.size() == 2);
  CHECK(built.model.properties.frozen());
  CHECK(built.model.by_arity.size() == 1);
  CHECK(built.model.by_arity[0].form == Form::tucker);
  CHECK(built.train.size() == 8);
  CHECK(built.dev.size() == 4);
  CHECK(built.train[0].features.arity(1).size() == 2);
}

TEST_CASE("build_for_training rejects broken inputs") {
  const TrainConfig cfg = quick_config();
  CHECK_THROWS_WITH_AS(build_for_training({}, marker_corpus(2), marker_templates(),
                                          marker_embeddings(), {}, false, cfg),
                       doctest::Contains("empty"), DataError);

  auto unlabeled = marker_corpus(4);
  unlabeled[2].label.clear();
  CHECK_THROWS_WITH_AS(build_for_training(unlabeled, marker_corpus(2), marker_templates(),
                                          marker_embeddings(), {}, false, cfg),
                       doctest::Contains("line 3"), DataError);

  TrainConfig cluster_cfg = cfg;
  cluster_cfg.ngram_mode = NgramMode::cluster;
  CHECK_THROWS_WITH_AS(build_for_training(marker_corpus(4), marker_corpus(2),
                                          marker_templates(), marker_embeddings(), {}, false,
                                          cluster_cfg),
                       doctest::Contains("cluster"), DataError);

  // A single label cannot be classified.
  auto one_label = marker_corpus(4);
  for (auto& raw : one_label) raw.label = "P";
  CHECK_THROWS_WITH_AS(build_for_training(one_label, marker_corpus(2), marker_templates(),
                                          marker_embeddings(), {}, false, cfg),
                       doctest::Contains("2 distinct labels"), DataError);
}

TEST_CASE("end-to-end: train, predict, evaluate on the marker corpus") {
  const TrainConfig cfg = quick_config();
  auto built = build_for_training(marker_corpus(16), marker_corpus(8), marker_templates(),
                                  marker_embeddings(), {}, false, cfg);
  const TrainResult result = train(std::move(built.model), built.train, built.dev, cfg, nullptr);
  CHECK(result.best_metric == 1.0);

  ModelSet model = result.model;
  const auto test_raws = marker_corpus(6, 1);
  const auto preds = predict_all(model, test_raws, 1);
  REQUIRE(preds.size() == 6);
  for (std::size_t i = 0; i < preds.size(); ++i)
    CHECK(model.labels.name(preds[i]) == test_raws[i].label);

  const EvalReport report = evaluate(model, test_raws, 1);
  CHECK(report.accuracy == 1.0);
  CHECK(report.correct == 6);
  for (const auto& [label, s] : report.per_label) {
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }
  CHECK(report.micro_f1 == 1.0);
  CHECK(report.macro_f1 == 1.0);

  std::ostringstream pretty;
  print_eval(pretty, report, model.labels);
  CHECK(pretty.str().find("accuracy\t1") != std::string::npos);

  // Threaded prediction returns the same answers in the same order.
  const auto preds4 = predict_all(model, test_raws, 4);
  CHECK(preds4 == preds);
}

TEST_CASE("evaluate reports errors for unknown or missing gold labels") {
  const TrainConfig cfg = quick_config();
  auto built = build_for_training(marker_corpus(8), marker_corpus(4), marker_templates(),
                                  marker_embeddings(), {}, false, cfg);
  ModelSet model = train(std::move(built.model), built.train, built.dev, cfg, nullptr).model;
  auto raws = marker_corpus(2);
  raws[1].label = "UNSEEN";
  CHECK_THROWS_WITH_AS(evaluate(model, raws, 1), doctest::Contains("UNSEEN"), DataError);
  raws[1].label.clear();
  CHECK_THROWS_WITH_AS(evaluate(model, raws, 1), doctest::Contains("missing gold"), DataError);
}

TEST_CASE("model save/load round-trips bytes and posteriors exactly") {
  const TrainConfig cfg = quick_config();
  auto built = build_for_training(marker_corpus(10), marker_corpus(4), marker_templates(),
                                  marker_embeddings(), {}, false, cfg);
  const TrainResult result = train(std::move(built.model), built.train, built.dev, cfg, nullptr);

  std::ostringstream first;
  save_model(result.model, first);
  std::istringstream in(first.str());
  ModelSet loaded = load_model(in, "buffer");
  std::ostringstream second;
  save_model(loaded, second);
  CHECK(first.str() == second.str());  // byte-identical after a round trip

  // Posteriors are bit-equal between the original and the loaded model.
  ModelSet original = result.model;
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureInstance inst;
    inst.features.add(FeatureAtom{rng.index(original.properties.size()),
                                  {rng.index(original.embeddings.size())}});
    const Vector a = posterior(original, inst);
    const Vector b = posterior(loaded, inst);
    REQUIRE(a.size() == b.size());
    for (Index y = 0; y < a.size(); ++y) CHECK(a[y] == b[y]);
  }

  // Config echo survives.
  CHECK(loaded.config.seed == cfg.seed);
  CHECK(loaded.config.ranks.r2 == cfg.ranks.r2);
  CHECK(loaded.labels.size() == original.labels.size());
}

TEST_CASE("truncated or corrupted model files fail with data errors") {
  const TrainConfig cfg = quick_config();
  auto built = build_for_training(marker_corpus(8), marker_corpus(4), marker_templates(),
                                  marker_embeddings(), {}, false, cfg);
  const TrainResult result = train(std::move(built.model), built.train, built.dev, cfg, nullptr);
  std::ostringstream out;
  save_model(result.model, out);
  const std::string bytes = out.str();

  for (const std::size_t cut :
       {bytes.size() / 10, bytes.size() / 3, bytes.size() / 2, bytes.size() - 9}) {
    std::istringstream in(bytes.substr(0, cut));
    CHECK_THROWS_AS(load_model(in, "buffer"), DataError);
  }

  // Garbage in a count field.
  const std::size_t at = bytes.find("labels 2");
  REQUIRE(at != std::string::npos);
  std::string garbled = bytes;
  garbled.replace(at, 8, "labels x");
  std::istringstream in(garbled);
  CHECK_THROWS_WITH_AS(load_model(in, "buffer"), doctest::Contains("label count"), DataError);
}

TEST_CASE("version-mismatched model headers are refused by name") {
  std::istringstream in("LRFR-MODEL v0\nmode multi-tensor\n");
  CHECK_THROWS_WITH_AS(load_model(in, "buffer"), doctest::Contains("v0"), DataError);
  std::istringstream in2("LRFR-MODEL v0\n");
  CHECK_THROWS_WITH_AS(load_model(in2, "buffer"), doctest::Contains("LRFR-MODEL v1"),
                       DataError);
}

TEST_CASE("two identically seeded training runs serialize byte-identically") {
  const TrainConfig cfg = quick_config();
  auto run = [&]() {
    auto built = build_for_training(marker_corpus(12), marker_corpus(6), marker_templates(),
                                    marker_embeddings(), {}, false, cfg);
    const TrainResult result =
        train(std::move(built.model), built.train, built.dev, cfg, nullptr);
    std::ostringstream out;
    save_model(result.model, out);
    return out.str();
  };
  CHECK(run() == run());
}

TEST_CASE("cluster-mode pipeline trains on reduced bigrams and round-trips") {
  RawInstance proto;
  proto.tokens = {"good", "bad"};
  proto.pair_ann["d"][{0, 1}] = "1";
  std::vector<RawInstance> train_raw, dev_raw;
  for (int i = 0; i < 10; ++i) {
    RawInstance raw = proto;
    raw.line = i + 1;
    raw.tokens[0] = i % 2 ? "good" : "bad";
    raw.label = i % 2 ? "P" : "N";
    (i % 3 ? train_raw : dev_raw).push_back(raw);
  }
  ClusterMap clusters;
  clusters.insert("good", "01");
  clusters.insert("bad", "10");

  TrainConfig cfg = quick_config();
  cfg.ngram_mode = NgramMode::cluster;
  const std::vector<TemplateDef> templates{{"pair", "D:{d@pair}", {"*", "*"}, 0}};
  auto built = build_for_training(train_raw, dev_raw, templates, marker_embeddings(), clusters,
                                  true, cfg);
  // Bigram atoms were rewritten: only an arity-1 component exists, and
  // the property space includes cluster conjunctions.
  CHECK(built.model.by_arity.size() == 1);
  CHECK(built.model.properties.contains("D:1∧01"));
  for (const auto& inst : built.train) CHECK(inst.features.max_arity() <= 1);

  const TrainResult result = train(std::move(built.model), built.train, built.dev, cfg, nullptr);
  ModelSet model = result.model;
  std::ostringstream out;
  save_model(model, out);
  std::istringstream in(out.str());
  ModelSet loaded = load_model(in, "buffer");
  CHECK(loaded.use_clusters);
  CHECK(loaded.clusters.cluster("good") == "01");

  // Prediction through the loaded model extracts and reduces identically.
  const auto p1 = predict_all(model, dev_raw, 1);
  const auto p2 = predict_all(loaded, dev_raw, 1);
  CHECK(p1 == p2);
}

TEST_CASE("ranking pipeline end to end") {
  // Candidates carry a per-candidate annotation; gold is the candidate
  // whose annotation is GOOD.
  std::vector<RawInstance> raws;
  Rng rng(31);
  for (int i = 0; i < 24; ++i) {
    RawInstance raw;
    raw.line = i + 1;
    raw.tokens = {"good", "bad", "stuff"};
    raw.roles["child"] = 2;
    const int n_cand = 2 + rng.index(2);
    raw.gold_candidate = rng.index(n_cand);
    for (int c = 0; c < n_cand; ++c) {
      RawInstance::Candidate cand;
      cand.head = c % 2;
      cand.ann["quality"] = c == raw.gold_candidate ? "GOOD" : "BAD";
      raw.candidates.push_back(std::move(cand));
    }
    raws.push_back(std::move(raw));
  }
  const std::vector<TemplateDef> templates{{"q", "Q:{quality}", {"role:head"}, 0}};

  TrainConfig cfg = quick_config();
  cfg.loss = LossKind::ranking;
  cfg.epochs = 40;
  auto built = build_for_training(raws, raws, templates, marker_embeddings(), {}, false, cfg);
  CHECK_FALSE(built.model.has_label);
  const TrainResult result = train(std::move(built.model), built.train, built.dev, cfg, nullptr);
  CHECK(result.best_metric == 1.0);

  ModelSet model = result.model;
  const auto ranked = rank_all(model, raws, 2);
  REQUIRE(ranked.size() == raws.size());
  for (std::size_t i = 0; i < raws.size(); ++i)
    CHECK(ranked[i][0] == raws[i].gold_candidate);

  const EvalReport report = evaluate(model, raws, 1);
  CHECK(report.ranking);
  CHECK(report.accuracy == 1.0);

  // Ranking models round-trip and predict identically.
  std::ostringstream out;
  save_model(model, out);
  std::istringstream in(out.str());
  ModelSet loaded = load_model(in, "buffer");
  CHECK(predict_all(loaded, raws, 1) == predict_all(model, raws, 1));
}
