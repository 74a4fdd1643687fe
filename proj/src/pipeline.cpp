#include "lrfr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <ostream>
#include <thread>

#include "lrfr/scoring.hpp"

namespace lrfr {

namespace {

int max_arity_of(const FeatureInstance& inst) {
  int n = inst.features.max_arity();
  for (const auto& cand : inst.candidates) n = std::max(n, cand.max_arity());
  return n;
}

ModelComponent make_component(Form form, const ViewRoles& roles, Index d1, Index d2, Index m,
                              const Ranks& ranks, Rng& rng) {
  std::vector<Index> input_dims;
  std::vector<Index> view_ranks;
  if (roles.has_label) {
    input_dims.push_back(d1);
    view_ranks.push_back(ranks.r1);
  }
  input_dims.push_back(d2);
  view_ranks.push_back(ranks.r2);
  for (int i = 0; i < roles.arity; ++i) {
    input_dims.push_back(m);
    view_ranks.push_back(ranks.r3);
  }
  ModelComponent comp;
  comp.form = form;
  if (form == Form::tucker) {
    comp.tucker = init_tucker(input_dims, view_ranks, roles, rng);
  } else {
    comp.cp = init_cp(input_dims, ranks.cp, roles, rng);
  }
  return comp;
}

}  // namespace

BuildResult build_for_training(const std::vector<RawInstance>& train_raw,
                               const std::vector<RawInstance>& dev_raw,
                               std::vector<TemplateDef> templates, EmbeddingTable embeddings,
                               ClusterMap clusters, bool use_clusters,
                               const TrainConfig& config) {
  config.validate();
  if (train_raw.empty()) throw DataError("training set is empty");
  if (config.ngram_mode == NgramMode::cluster && !use_clusters)
    throw DataError("cluster mode requires a clusters file");
  if (embeddings.dim() < 1) throw DataError("embedding table is empty");

  ExtractOptions opts;
  opts.max_arity = config.max_arity;
  validate_templates(templates, opts);

  BuildResult out;
  ModelSet& model = out.model;
  model.has_label = config.loss == LossKind::log;
  model.mode = config.ngram_mode;
  model.embeddings = std::move(embeddings);
  model.clusters = std::move(clusters);
  model.use_clusters = use_clusters;
  model.templates = std::move(templates);
  model.config = config;

  const bool ranking = config.loss == LossKind::ranking;
  auto extract_one = [&](const RawInstance& raw, bool training) {
    if (ranking && raw.candidates.empty())
      throw DataError("instance at line " + std::to_string(raw.line) +
                      ": ranking loss needs a candidate list");
    if (!ranking && !raw.candidates.empty())
      throw DataError("instance at line " + std::to_string(raw.line) +
                      ": log loss cannot train on candidate lists");
    if (training) {
      if (!ranking && raw.label.empty())
        throw DataError("instance at line " + std::to_string(raw.line) + ": missing gold label");
      if (ranking && raw.gold_candidate < 0)
        throw DataError("instance at line " + std::to_string(raw.line) +
                        ": missing gold candidate");
    }
    FeatureInstance inst =
        extract(raw, model.templates, model.properties, model.labels, model.embeddings, opts);
    if (model.mode == NgramMode::cluster)
      cluster_reduce_all(inst, model.clusters, model.properties, model.embeddings);
    return inst;
  };

  for (const auto& raw : train_raw) out.train.push_back(extract_one(raw, true));
  model.labels.freeze();
  model.properties.freeze();
  for (const auto& raw : dev_raw) out.dev.push_back(extract_one(raw, true));

  int max_n = 0;
  for (const auto& inst : out.train) max_n = std::max(max_n, max_arity_of(inst));
  if (max_n == 0) throw DataError("no features extracted from the training set");
  if (!ranking && model.labels.size() < 2)
    throw DataError("need at least 2 distinct labels, found " +
                    std::to_string(model.labels.size()));

  Rng rng(config.seed);
  for (int arity = 1; arity <= max_n; ++arity) {
    const Form form = arity == 1 ? config.unigram_form : config.ngram_form;
    const ViewRoles roles{model.has_label, arity};
    model.by_arity.push_back(make_component(form, roles, model.labels.size(),
                                            model.properties.size(), model.embeddings.dim(),
                                            config.ranks, rng));
  }
  return out;
}

FeatureInstance extract_for_model(ModelSet& model, const RawInstance& raw) {
  ExtractOptions opts;
  opts.max_arity = model.config.max_arity;
  FeatureInstance inst =
      extract(raw, model.templates, model.properties, model.labels, model.embeddings, opts);
  if (model.mode == NgramMode::cluster)
    cluster_reduce_all(inst, model.clusters, model.properties, model.embeddings);
  return inst;
}

namespace {

// Vocabularies are frozen at predict time, so extraction and scoring are
// read-only and instances can be sharded across a worker pool.
template <typename Fn>
void parallel_over(std::size_t count, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

std::vector<int> predict_all(ModelSet& model, const std::vector<RawInstance>& raws,
                             int threads) {
  const HiddenReps cache = build_hidden_reps(model);
  std::vector<int> preds(raws.size(), -1);
  std::exception_ptr error;
  std::mutex error_mu;
  parallel_over(raws.size(), threads, [&](std::size_t i) {
    try {
      const FeatureInstance inst = extract_for_model(model, raws[i]);
      preds[i] = predict(model, inst, &cache);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  return preds;
}

std::vector<std::vector<int>> rank_all(ModelSet& model, const std::vector<RawInstance>& raws,
                                       int threads) {
  const HiddenReps cache = build_hidden_reps(model);
  std::vector<std::vector<int>> out(raws.size());
  std::exception_ptr error;
  std::mutex error_mu;
  parallel_over(raws.size(), threads, [&](std::size_t i) {
    try {
      const FeatureInstance inst = extract_for_model(model, raws[i]);
      const Vector s = candidate_scores(model, inst, &cache);
      std::vector<int> order(static_cast<std::size_t>(s.size()));
      for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return s[a] > s[b]; });
      out[i] = std::move(order);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!error) error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  return out;
}

EvalReport evaluate(ModelSet& model, const std::vector<RawInstance>& raws, int threads) {
  EvalReport report;
  report.ranking = !model.has_label;
  const std::vector<int> preds = predict_all(model, raws, threads);

  for (std::size_t i = 0; i < raws.size(); ++i) {
    const RawInstance& raw = raws[i];
    int gold = -1;
    if (report.ranking) {
      if (raw.gold_candidate < 0)
        throw DataError("instance at line " + std::to_string(raw.line) +
                        ": missing gold candidate for evaluation");
      gold = raw.gold_candidate;
    } else {
      if (raw.label.empty())
        throw DataError("instance at line " + std::to_string(raw.line) +
                        ": missing gold label for evaluation");
      gold = model.labels.lookup(raw.label);
      if (gold < 0)
        throw DataError("instance at line " + std::to_string(raw.line) + ": gold label '" +
                        raw.label + "' not in the model's label set");
    }
    ++report.total;
    if (preds[i] == gold) ++report.correct;
    if (!report.ranking) {
      if (preds[i] == gold) {
        ++report.per_label[gold].tp;
      } else {
        ++report.per_label[gold].fn;
        ++report.per_label[preds[i]].fp;
      }
    }
  }
  report.accuracy =
      report.total == 0 ? 0 : static_cast<double>(report.correct) / static_cast<double>(report.total);

  if (!report.ranking) {
    long long tp = 0, fp = 0, fn = 0;
    double psum = 0, rsum = 0, fsum = 0;
    for (auto& [label, s] : report.per_label) {
      s.precision = s.tp + s.fp == 0 ? 0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
      s.recall = s.tp + s.fn == 0 ? 0 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
      s.f1 = s.precision + s.recall == 0 ? 0 : 2 * s.precision * s.recall / (s.precision + s.recall);
      tp += s.tp;
      fp += s.fp;
      fn += s.fn;
      psum += s.precision;
      rsum += s.recall;
      fsum += s.f1;
    }
    const double n_labels = static_cast<double>(report.per_label.size());
    if (!report.per_label.empty()) {
      report.macro_precision = psum / n_labels;
      report.macro_recall = rsum / n_labels;
      report.macro_f1 = fsum / n_labels;
    }
    report.micro_precision = tp + fp == 0 ? 0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    report.micro_recall = tp + fn == 0 ? 0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    report.micro_f1 = report.micro_precision + report.micro_recall == 0
                          ? 0
                          : 2 * report.micro_precision * report.micro_recall /
                                (report.micro_precision + report.micro_recall);
  }
  return report;
}

void print_eval(std::ostream& out, const EvalReport& report, const Vocab& labels) {
  out << "instances\t" << report.total << "\n";
  out << "correct\t" << report.correct << "\n";
  out << "accuracy\t" << report.accuracy << "\n";
  if (report.ranking) return;
  out << "label\tprecision\trecall\tf1\ttp\tfp\tfn\n";
  for (const auto& [label, s] : report.per_label)
    out << labels.name(label) << "\t" << s.precision << "\t" << s.recall << "\t" << s.f1 << "\t"
        << s.tp << "\t" << s.fp << "\t" << s.fn << "\n";
  out << "micro\t" << report.micro_precision << "\t" << report.micro_recall << "\t"
      << report.micro_f1 << "\n";
  out << "macro\t" << report.macro_precision << "\t" << report.macro_recall << "\t"
      << report.macro_f1 << "\n";
}

}  // namespace lrfr
