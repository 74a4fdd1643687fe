// Command-line front end: train, predict, eval, bench, check-grad,
// inspect-model. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numeric failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "lrfr/bench.hpp"
#include "lrfr/pipeline.hpp"
#include "lrfr/scoring.hpp"
#include "lrfr/training.hpp"

namespace {

using namespace lrfr;

struct RunConfig {
  TrainConfig train;
  std::string train_path, dev_path, test_path;
  std::string templates_path, embeddings_path, clusters_path;
  std::string model_in, model_out, output_path;
  int cluster_prefix = 0;
  int threads = 1;
  std::string form = "tucker";
  std::string loss = "log";
  std::string ngram_mode = "multi-tensor";
  std::string unigram_form = "tucker";
  std::string ngram_form = "cp";
  // bench / check-grad knobs
  std::int64_t d1 = 32, d2 = 264, m = 200;
  int n = 1;
  std::int64_t features = 100000;
  bool json_report = false;
  int instances = 5;
  double eps = 1e-5;
  double threshold = 1e-4;
};

void finish_train_config(RunConfig& rc) {
  rc.train.loss = rc.loss == "ranking" ? LossKind::ranking : LossKind::log;
  rc.train.ngram_mode = rc.ngram_mode == "cluster" ? NgramMode::cluster : NgramMode::multi_tensor;
  rc.train.unigram_form = rc.unigram_form == "cp" ? Form::cp : Form::tucker;
  rc.train.ngram_form = rc.ngram_form == "tucker" ? Form::tucker : Form::cp;
  rc.train.validate();
}

void echo_config(std::ostream& out, const std::string& subcommand,
                 const std::vector<std::pair<std::string, std::string>>& kv) {
  out << "# lrfr " << subcommand << "\n";
  for (const auto& [k, v] : kv) out << "# " << k << " = " << v << "\n";
}

std::vector<std::pair<std::string, std::string>> train_kv(const RunConfig& rc) {
  const TrainConfig& c = rc.train;
  return {
      {"train", rc.train_path},
      {"dev", rc.dev_path},
      {"templates", rc.templates_path},
      {"embeddings", rc.embeddings_path},
      {"clusters", rc.clusters_path.empty() ? "(none)" : rc.clusters_path},
      {"model-out", rc.model_out},
      {"loss", loss_name(c.loss)},
      {"ngram-mode", ngram_mode_name(c.ngram_mode)},
      {"unigram-form", form_name(c.unigram_form)},
      {"ngram-form", form_name(c.ngram_form)},
      {"r1", std::to_string(c.ranks.r1)},
      {"r2", std::to_string(c.ranks.r2)},
      {"r3", std::to_string(c.ranks.r3)},
      {"cp-rank", std::to_string(c.ranks.cp)},
      {"eta", std::to_string(c.eta)},
      {"lambda", std::to_string(c.lambda)},
      {"epochs", std::to_string(c.epochs)},
      {"patience", std::to_string(c.patience)},
      {"max-arity", std::to_string(c.max_arity)},
      {"seed", std::to_string(c.seed)},
      {"fine-tune", c.fine_tune ? "true" : "false"},
  };
}

int cmd_train(RunConfig& rc) {
  finish_train_config(rc);
  echo_config(std::cout, "train", train_kv(rc));

  auto templates = load_templates(rc.templates_path);
  auto embeddings = load_embeddings(rc.embeddings_path);
  ClusterMap clusters;
  const bool use_clusters = !rc.clusters_path.empty();
  if (use_clusters) clusters = load_clusters(rc.clusters_path, rc.cluster_prefix);

  auto train_raw = load_instances(rc.train_path);
  auto dev_raw = load_instances(rc.dev_path);
  if (train_raw.empty()) throw DataError(rc.train_path + ": no instances (empty dataset)");

  BuildResult built = build_for_training(train_raw, dev_raw, std::move(templates),
                                         std::move(embeddings), std::move(clusters),
                                         use_clusters, rc.train);
  std::cout << "# labels = " << built.model.labels.size()
            << ", properties = " << built.model.properties.size()
            << ", embedding dim = " << built.model.embeddings.dim() << "\n";
  std::cout << "epoch\ttrain_loss\tdev_metric\telapsed_ms\n";
  TrainResult result = train(std::move(built.model), built.train, built.dev, rc.train,
                             &std::cout);
  std::cout << "# best epoch " << result.best_epoch << " dev metric " << result.best_metric
            << "\n";
  save_model(result.model, rc.model_out);
  std::cout << "# model written to " << rc.model_out << "\n";
  return 0;
}

int cmd_predict(RunConfig& rc) {
  echo_config(std::cerr, "predict",
              {{"model", rc.model_in},
               {"input", rc.test_path},
               {"output", rc.output_path.empty() ? "(stdout)" : rc.output_path},
               {"threads", std::to_string(rc.threads)}});
  ModelSet model = load_model(rc.model_in);
  const auto raws = load_instances(rc.test_path);

  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!rc.output_path.empty()) {
    file.open(rc.output_path);
    if (!file) throw DataError("cannot write '" + rc.output_path + "'");
    out = &file;
  }
  if (model.has_label) {
    const auto preds = predict_all(model, raws, rc.threads);
    for (int p : preds) (*out) << model.labels.name(p) << "\n";
  } else {
    for (const auto& order : rank_all(model, raws, rc.threads)) {
      for (std::size_t i = 0; i < order.size(); ++i)
        (*out) << (i == 0 ? "" : " ") << order[i];
      (*out) << "\n";
    }
  }
  return 0;
}

int cmd_eval(RunConfig& rc) {
  echo_config(std::cout, "eval",
              {{"model", rc.model_in},
               {"input", rc.test_path},
               {"threads", std::to_string(rc.threads)}});
  ModelSet model = load_model(rc.model_in);
  const auto raws = load_instances(rc.test_path);
  const EvalReport report = evaluate(model, raws, rc.threads);
  print_eval(std::cout, report, model.labels);
  return 0;
}

int cmd_bench(RunConfig& rc) {
  echo_config(std::cout, "bench",
              {{"form", rc.form},
               {"d1", std::to_string(rc.d1)},
               {"d2", std::to_string(rc.d2)},
               {"m", std::to_string(rc.m)},
               {"n", std::to_string(rc.n)},
               {"features", std::to_string(rc.features)},
               {"seed", std::to_string(rc.train.seed)}});
  const ModelDims dims{rc.d1, rc.d2, rc.m, rc.n};
  std::vector<Form> forms;
  if (rc.form == "both") {
    forms = {Form::tucker, Form::cp};
  } else {
    forms = {rc.form == "cp" ? Form::cp : Form::tucker};
  }
  if (!rc.json_report) std::cout << bench::report_header_tsv() << "\n";
  for (Form f : forms) {
    const auto report = bench::bench_predict(f, dims, rc.train.ranks, rc.features, rc.train.seed);
    std::cout << (rc.json_report ? bench::to_json(report) : bench::to_tsv(report)) << "\n";
  }
  return 0;
}

// Synthetic toy fixtures shared by check-grad; arities 1 and 2 and a few
// words so every gradient block is exercised.
ModelSet toy_model(Form form, bool has_label, const Ranks& ranks, Rng& rng,
                   std::vector<FeatureInstance>& instances, int n_instances, bool ranking) {
  const int d1 = 4, d2 = 6, vocab = 8, dim = 5;
  ModelSet model;
  model.has_label = has_label;
  std::vector<std::string> words;
  Matrix rows(vocab, dim);
  for (int w = 0; w < vocab; ++w) {
    words.push_back("w" + std::to_string(w));
    for (int j = 0; j < dim; ++j) rows(w, j) = rng.uniform(-1, 1);
  }
  model.embeddings = EmbeddingTable(words, rows);
  for (int i = 0; i < d1; ++i) model.labels.intern("L" + std::to_string(i));
  for (int i = 1; i < d2; ++i) model.properties.intern("P" + std::to_string(i));
  model.labels.freeze();
  model.properties.freeze();

  for (int arity = 1; arity <= 2; ++arity) {
    const ViewRoles roles{has_label, arity};
    std::vector<Index> input_dims, view_ranks;
    if (has_label) {
      input_dims.push_back(d1);
      view_ranks.push_back(ranks.r1);
    }
    input_dims.push_back(model.properties.size());
    view_ranks.push_back(ranks.r2);
    for (int i = 0; i < arity; ++i) {
      input_dims.push_back(dim);
      view_ranks.push_back(ranks.r3);
    }
    ModelComponent comp;
    comp.form = form;
    if (form == Form::tucker) {
      comp.tucker = init_tucker(input_dims, view_ranks, roles, rng);
      for (Index i = 0; i < comp.tucker.core.size(); ++i)
        comp.tucker.core[i] = rng.uniform(-0.5, 0.5);
      for (auto& f : comp.tucker.factors)
        for (Index j = 0; j < f.size(); ++j) f.data()[j] = rng.uniform(-0.5, 0.5);
      std::fill(comp.tucker.identity_reg.begin(), comp.tucker.identity_reg.end(), false);
    } else {
      comp.cp = init_cp(input_dims, ranks.cp, roles, rng);
      for (auto& f : comp.cp.factors)
        for (Index j = 0; j < f.size(); ++j) f.data()[j] = rng.uniform(-0.5, 0.5);
      std::fill(comp.cp.identity_reg.begin(), comp.cp.identity_reg.end(), false);
    }
    model.by_arity.push_back(std::move(comp));
  }

  auto random_sets = [&](FeatureSets& sets) {
    const int n_uni = 1 + rng.index(3);
    for (int i = 0; i < n_uni; ++i)
      sets.add(FeatureAtom{rng.index(d2), {1 + rng.index(vocab)}});
    const int n_bi = rng.index(3);
    for (int i = 0; i < n_bi; ++i)
      sets.add(FeatureAtom{rng.index(d2), {1 + rng.index(vocab), 1 + rng.index(vocab)}});
  };
  for (int i = 0; i < n_instances; ++i) {
    FeatureInstance inst;
    if (ranking) {
      const int n_cand = 2 + rng.index(3);
      inst.candidates.resize(static_cast<std::size_t>(n_cand));
      for (auto& cand : inst.candidates) random_sets(cand);
      inst.gold = rng.index(n_cand);
    } else {
      random_sets(inst.features);
      inst.gold = rng.index(d1);
    }
    instances.push_back(std::move(inst));
  }
  return model;
}

int cmd_check_grad(RunConfig& rc) {
  echo_config(std::cout, "check-grad",
              {{"seed", std::to_string(rc.train.seed)},
               {"instances", std::to_string(rc.instances)},
               {"eps", std::to_string(rc.eps)},
               {"threshold", std::to_string(rc.threshold)}});
  const Ranks ranks{3, 3, 2, 3};
  double worst = 0;
  for (Form form : {Form::tucker, Form::cp})
    for (LossKind loss : {LossKind::log, LossKind::ranking})
      for (bool fine_tune : {false, true}) {
        Rng rng(rc.train.seed);
        std::vector<FeatureInstance> instances;
        ModelSet model = toy_model(form, loss == LossKind::log, ranks, rng, instances,
                                   rc.instances, loss == LossKind::ranking);
        TrainConfig cfg;
        cfg.loss = loss;
        cfg.fine_tune = fine_tune;
        double config_worst = 0;
        for (const auto& inst : instances) {
          const FdReport report = finite_diff_check(model, inst, cfg, rc.eps);
          config_worst = std::max(config_worst, report.max_error);
        }
        std::cout << form_name(form) << "\t" << loss_name(loss) << "\t"
                  << (fine_tune ? "fine-tune" : "fixed-emb") << "\tmax_rel_err\t"
                  << config_worst << "\n";
        worst = std::max(worst, config_worst);
      }
  std::cout << "max_rel_err\t" << worst << "\n";
  if (!(worst < rc.threshold)) {
    std::cerr << "gradient check failed: " << worst << " >= " << rc.threshold << "\n";
    return 3;
  }
  return 0;
}

int cmd_inspect(RunConfig& rc) {
  ModelSet model = load_model(rc.model_in);
  std::cout << "mode\t" << ngram_mode_name(model.mode) << "\n";
  std::cout << "label-view\t" << (model.has_label ? "yes" : "no") << "\n";
  std::cout << "labels\t" << model.labels.size() << "\n";
  std::cout << "properties\t" << model.properties.size() << "\n";
  std::cout << "embeddings\t" << model.embeddings.size() << " x " << model.embeddings.dim()
            << "\n";
  std::cout << "clusters\t" << (model.use_clusters ? model.clusters.size() : 0) << "\n";
  std::cout << "templates\t" << model.templates.size() << "\n";
  for (std::size_t k = 0; k < model.by_arity.size(); ++k) {
    const int arity = static_cast<int>(k) + 1;
    if (!model.has_arity(arity)) continue;
    const ModelComponent& comp = model.by_arity[k];
    std::cout << "arity " << arity << "\t" << form_name(comp.form);
    std::int64_t params = 0;
    if (comp.form == Form::tucker) {
      params = comp.tucker.core.size();
      std::cout << "\tcore";
      for (Index d : comp.tucker.core.shape()) std::cout << " " << d;
      for (const auto& f : comp.tucker.factors) params += f.size();
    } else {
      std::cout << "\trank " << comp.cp.rank;
      for (const auto& f : comp.cp.factors) params += f.size();
    }
    std::cout << "\tparams " << params << "\n";
  }
  std::cout << "trained-with\t" << "eta=" << model.config.eta
            << " lambda=" << model.config.lambda << " epochs=" << model.config.epochs
            << " patience=" << model.config.patience << " seed=" << model.config.seed
            << " loss=" << loss_name(model.config.loss)
            << " fine_tune=" << (model.config.fine_tune ? "true" : "false") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank feature representations: factored scoring of conjunctive "
               "lexical features with Tucker- or CP-form parameter tensors"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--eta", rc.train.eta, "learning rate");
    cmd->add_option("--lambda", rc.train.lambda, "L2 regularizer weight");
    cmd->add_option("--r1", rc.train.ranks.r1, "label-view rank (tucker)");
    cmd->add_option("--r2", rc.train.ranks.r2, "property-view rank (tucker)");
    cmd->add_option("--r3", rc.train.ranks.r3, "lexical-view rank (tucker)");
    cmd->add_option("--cp-rank", rc.train.ranks.cp, "cp rank");
    cmd->add_option("--epochs", rc.train.epochs, "max epochs");
    cmd->add_option("--patience", rc.train.patience, "early-stop patience (dev evaluations)");
    cmd->add_option("--max-arity", rc.train.max_arity, "max lexical arity");
    cmd->add_option("--seed", rc.train.seed, "shuffle / init seed");
    cmd->add_flag("--fine-tune", rc.train.fine_tune, "fine-tune the word embeddings");
    cmd->add_option("--loss", rc.loss, "log | ranking")
        ->check(CLI::IsMember({"log", "ranking"}));
    cmd->add_option("--ngram-mode", rc.ngram_mode, "multi-tensor | cluster")
        ->check(CLI::IsMember({"multi-tensor", "cluster"}));
    cmd->add_option("--unigram-form", rc.unigram_form, "form of the arity-1 tensor")
        ->check(CLI::IsMember({"tucker", "cp"}));
    cmd->add_option("--ngram-form", rc.ngram_form, "form of arity>=2 tensors")
        ->check(CLI::IsMember({"tucker", "cp"}));
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--train", rc.train_path, "training instances (jsonl)")->required();
  train_cmd->add_option("--dev", rc.dev_path, "development instances (jsonl)")->required();
  train_cmd->add_option("--templates", rc.templates_path, "feature templates (jsonl)")
      ->required();
  train_cmd->add_option("--embeddings", rc.embeddings_path, "embeddings (text)")->required();
  train_cmd->add_option("--clusters", rc.clusters_path, "brown cluster paths (tsv)");
  train_cmd->add_option("--cluster-prefix", rc.cluster_prefix, "cluster path prefix length");
  train_cmd->add_option("--model-out", rc.model_out, "output model path")->required();
  add_train_flags(train_cmd);

  CLI::App* predict_cmd = app.add_subcommand("predict", "write one prediction per instance");
  predict_cmd->add_option("--model", rc.model_in, "model file")->required();
  predict_cmd->add_option("--input", rc.test_path, "instances (jsonl)")->required();
  predict_cmd->add_option("--output,-o", rc.output_path, "output path (default stdout)");
  predict_cmd->add_option("--threads", rc.threads, "worker threads");

  CLI::App* eval_cmd = app.add_subcommand("eval", "accuracy and per-label P/R/F1");
  eval_cmd->add_option("--model", rc.model_in, "model file")->required();
  eval_cmd->add_option("--input", rc.test_path, "instances (jsonl)")->required();
  eval_cmd->add_option("--threads", rc.threads, "worker threads");

  CLI::App* bench_cmd = app.add_subcommand("bench", "prediction cost report");
  bench_cmd->add_option("--form", rc.form, "tucker | cp | both")
      ->check(CLI::IsMember({"tucker", "cp", "both"}));
  bench_cmd->add_option("--d1", rc.d1, "label count");
  bench_cmd->add_option("--d2", rc.d2, "property count");
  bench_cmd->add_option("--m", rc.m, "embedding dimension");
  bench_cmd->add_option("--n", rc.n, "lexical arity");
  bench_cmd->add_option("--r1", rc.train.ranks.r1, "tucker label rank");
  bench_cmd->add_option("--r2", rc.train.ranks.r2, "tucker property rank");
  bench_cmd->add_option("--r3", rc.train.ranks.r3, "tucker lexical rank");
  bench_cmd->add_option("--cp-rank", rc.train.ranks.cp, "cp rank");
  bench_cmd->add_option("--features", rc.features, "workload size");
  bench_cmd->add_option("--seed", rc.train.seed, "workload seed");
  bench_cmd->add_flag("--json", rc.json_report, "one JSON object per report");

  CLI::App* grad_cmd = app.add_subcommand("check-grad", "finite-difference gradient check");
  grad_cmd->add_option("--seed", rc.train.seed, "fixture seed");
  grad_cmd->add_option("--instances", rc.instances, "instances per configuration");
  grad_cmd->add_option("--eps", rc.eps, "central-difference step");
  grad_cmd->add_option("--threshold", rc.threshold, "max relative error allowed");

  CLI::App* inspect_cmd = app.add_subcommand("inspect-model", "print model header");
  inspect_cmd->add_option("--model", rc.model_in, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    // Bench defaults mirror the standard unigram configuration; other
    // subcommands default r-values lower, so set bench-only defaults here.
    if (bench_cmd->parsed()) {
      if (!bench_cmd->count("--r1")) rc.train.ranks.r1 = 32;
      if (!bench_cmd->count("--r2")) rc.train.ranks.r2 = 20;
      if (!bench_cmd->count("--r3")) rc.train.ranks.r3 = 200;
      if (!bench_cmd->count("--cp-rank")) rc.train.ranks.cp = 200;
      return cmd_bench(rc);
    }
    if (train_cmd->parsed()) return cmd_train(rc);
    if (predict_cmd->parsed()) return cmd_predict(rc);
    if (eval_cmd->parsed()) return cmd_eval(rc);
    if (grad_cmd->parsed()) return cmd_check_grad(rc);
    if (inspect_cmd->parsed()) return cmd_inspect(rc);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::length_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
