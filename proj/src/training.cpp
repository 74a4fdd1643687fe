#include "lrfr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "lrfr/rng.hpp"
#include "lrfr/scoring.hpp"

namespace lrfr {

AdaGradState init_adagrad(const ModelSet& model, bool fine_tune) {
  AdaGradState state;
  state.by_arity.resize(model.by_arity.size());
  for (std::size_t k = 0; k < model.by_arity.size(); ++k) {
    const ModelComponent& comp = model.by_arity[k];
    auto& acc = state.by_arity[k];
    if (comp.form == Form::tucker) {
      if (comp.tucker.factors.empty()) continue;
      acc.core = TensorD(comp.tucker.core.shape());
      for (const auto& f : comp.tucker.factors) acc.factors.push_back(Matrix::Zero(f.rows(), f.cols()));
    } else {
      if (comp.cp.factors.empty()) continue;
      for (const auto& f : comp.cp.factors) acc.factors.push_back(Matrix::Zero(f.rows(), f.cols()));
    }
  }
  if (fine_tune)
    state.embeddings = Matrix::Zero(model.embeddings.vectors().rows(),
                                    model.embeddings.vectors().cols());
  return state;
}

namespace {

double log_sum_exp(const Vector& s) {
  const double m = s.maxCoeff();
  return m + std::log((s.array() - m).exp().sum());
}

void check_finite_scores(const Vector& s, const char* what) {
  for (Index i = 0; i < s.size(); ++i)
    if (!std::isfinite(s[i]))
      throw NumericError(std::string("non-finite score for ") + what + " " + std::to_string(i));
}

struct ViewHiddens {
  std::vector<Vector> hs;  // one per view; label slot holds the residual-mixed q
  Vector h_prop;
  std::vector<Vector> h_words;
};

// Gradient contributions of one atom, weighted either by the
// residual-mixed label vector q (classification) or by a scalar
// candidate residual (ranking).
void atom_gradients(const ModelSet& model, const ModelComponent& comp, const FeatureAtom& atom,
                    const Vector* q, double weight, bool fine_tune, ComponentGrads& g,
                    std::map<int, Vector>& emb_grads, Vector* label_acc) {
  const ViewRoles& roles = comp.roles();
  const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
  const int pv = roles.property_view();

  std::vector<Vector> hs(factors.size());
  if (roles.has_label) hs[static_cast<std::size_t>(roles.label_view())] = *q;
  hs[static_cast<std::size_t>(pv)] = factors[static_cast<std::size_t>(pv)].col(atom.property);
  std::vector<Vector> word_inputs(atom.words.size());
  for (std::size_t i = 0; i < atom.words.size(); ++i) {
    word_inputs[i] = model.embeddings.vector(atom.words[i]);
    hs[static_cast<std::size_t>(roles.lexical_view(static_cast<int>(i)))] =
        factors[static_cast<std::size_t>(roles.lexical_view(static_cast<int>(i)))] *
        word_inputs[i];
  }
  const std::span<const Vector> hspan(hs);

  g.touched_props.push_back(atom.property);

  if (comp.form == Form::tucker) {
    if (roles.has_label && label_acc != nullptr)
      *label_acc += contract_trailing(comp.tucker.core, hspan.subspan(1));
    const TensorD outer = outer_product(hspan);
    for (Index i = 0; i < outer.size(); ++i) g.core[i] += weight * outer[i];
    g.factors[static_cast<std::size_t>(pv)].col(atom.property) +=
        weight * contract_except(comp.tucker.core, hspan, pv);
    for (std::size_t i = 0; i < atom.words.size(); ++i) {
      const int lv = roles.lexical_view(static_cast<int>(i));
      const Vector vec = weight * contract_except(comp.tucker.core, hspan, lv);
      g.factors[static_cast<std::size_t>(lv)].noalias() += vec * word_inputs[i].transpose();
      if (fine_tune) {
        auto [it, fresh] = emb_grads.try_emplace(atom.words[i],
                                                 Vector::Zero(model.embeddings.dim()));
        it->second.noalias() += factors[static_cast<std::size_t>(lv)].transpose() * vec;
      }
    }
  } else {
    // CP: the gradient for one view is the Hadamard product of every
    // other view's hidden vector.
    auto mix_except = [&](int skip) {
      Vector z = Vector::Ones(static_cast<Index>(comp.cp.rank));
      for (std::size_t v = 0; v < hs.size(); ++v)
        if (static_cast<int>(v) != skip) z = hadamard(z, hs[v]);
      return z;
    };
    if (roles.has_label && label_acc != nullptr)
      *label_acc += mix_except(roles.label_view());
    g.factors[static_cast<std::size_t>(pv)].col(atom.property) += weight * mix_except(pv);
    for (std::size_t i = 0; i < atom.words.size(); ++i) {
      const int lv = roles.lexical_view(static_cast<int>(i));
      const Vector vec = weight * mix_except(lv);
      g.factors[static_cast<std::size_t>(lv)].noalias() += vec * word_inputs[i].transpose();
      if (fine_tune) {
        auto [it, fresh] = emb_grads.try_emplace(atom.words[i],
                                                 Vector::Zero(model.embeddings.dim()));
        it->second.noalias() += factors[static_cast<std::size_t>(lv)].transpose() * vec;
      }
    }
  }
}

ComponentGrads& grads_for(GradientSet& grads, const ModelSet& model, int arity) {
  auto& g = grads.by_arity[static_cast<std::size_t>(arity - 1)];
  if (!g.active) {
    const ModelComponent& comp = model.component(arity);
    g.active = true;
    const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    if (comp.form == Form::tucker) g.core = TensorD(comp.tucker.core.shape());
    for (const auto& f : factors) g.factors.push_back(Matrix::Zero(f.rows(), f.cols()));
  }
  return g;
}

void finish_touched(GradientSet& grads) {
  for (auto& g : grads.by_arity) {
    std::sort(g.touched_props.begin(), g.touched_props.end());
    g.touched_props.erase(std::unique(g.touched_props.begin(), g.touched_props.end()),
                          g.touched_props.end());
  }
}

double classification_loss_and_grads(const ModelSet& model, const FeatureInstance& inst,
                                     const TrainConfig* config, GradientSet* grads) {
  if (inst.gold < 0 || inst.gold >= model.labels.size())
    throw DataError("gold label missing from the label set");
  const Vector s = label_scores(model, inst.features);
  check_finite_scores(s, "label");
  const double loss = log_sum_exp(s) - s[inst.gold];
  if (grads == nullptr) return loss;

  Vector residual = stable_softmax(s);
  residual[inst.gold] -= 1.0;

  for (int arity = 1; arity <= inst.features.max_arity(); ++arity) {
    const auto& atoms = inst.features.arity(arity);
    if (atoms.empty()) continue;
    const ModelComponent& comp = model.component(arity);
    const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    const Matrix& label_factor = factors[static_cast<std::size_t>(comp.roles().label_view())];
    const Vector q = label_factor * residual;

    ComponentGrads& g = grads_for(*grads, model, arity);
    Vector label_acc = Vector::Zero(label_factor.rows());
    for (const auto& atom : atoms)
      atom_gradients(model, comp, atom, &q, 1.0, config->fine_tune, g, grads->embedding_rows,
                     &label_acc);
    g.factors[static_cast<std::size_t>(comp.roles().label_view())].noalias() +=
        label_acc * residual.transpose();
  }
  return loss;
}

double ranking_loss_and_grads(const ModelSet& model, const FeatureInstance& inst,
                              const TrainConfig* config, GradientSet* grads) {
  if (inst.candidates.empty()) throw DataError("ranking instance has an empty candidate list");
  if (inst.gold < 0 || inst.gold >= static_cast<int>(inst.candidates.size()))
    throw DataError("gold candidate missing from the candidate list");
  const Vector s = candidate_scores(model, inst);
  check_finite_scores(s, "candidate");
  const double loss = log_sum_exp(s) - s[inst.gold];
  if (grads == nullptr) return loss;

  Vector residual = stable_softmax(s);
  residual[inst.gold] -= 1.0;

  for (std::size_t c = 0; c < inst.candidates.size(); ++c) {
    const double weight = residual[static_cast<Index>(c)];
    const FeatureSets& feats = inst.candidates[c];
    for (int arity = 1; arity <= feats.max_arity(); ++arity) {
      const auto& atoms = feats.arity(arity);
      if (atoms.empty()) continue;
      const ModelComponent& comp = model.component(arity);
      ComponentGrads& g = grads_for(*grads, model, arity);
      for (const auto& atom : atoms)
        atom_gradients(model, comp, atom, nullptr, weight, config->fine_tune, g,
                       grads->embedding_rows, nullptr);
    }
  }
  return loss;
}

double loss_and_grads(const ModelSet& model, const FeatureInstance& inst,
                      const TrainConfig* config, LossKind loss, GradientSet* grads) {
  if (grads != nullptr) grads->by_arity.resize(model.by_arity.size());
  double value = 0;
  if (loss == LossKind::ranking || inst.is_ranking()) {
    if (!inst.is_ranking()) throw DataError("ranking loss needs candidate lists");
    value = ranking_loss_and_grads(model, inst, config, grads);
  } else {
    value = classification_loss_and_grads(model, inst, config, grads);
  }
  if (grads != nullptr) finish_touched(*grads);
  return value;
}

}  // namespace

double instance_loss(const ModelSet& model, const FeatureInstance& inst, LossKind loss) {
  return loss_and_grads(model, inst, nullptr, loss, nullptr);
}

GradientSet instance_gradients(const ModelSet& model, const FeatureInstance& inst,
                               const TrainConfig& config) {
  GradientSet grads;
  loss_and_grads(model, inst, &config, config.loss, &grads);
  return grads;
}

namespace {

inline void step_scalar(double& p, double g_loss, double reg_center, double lambda, double& acc,
                        double eta, double eps) {
  const double g = g_loss + 2.0 * lambda * (p - reg_center);
  acc += g * g;
  p -= eta * g / (std::sqrt(acc) + eps);
}

void step_matrix(Matrix& p, const Matrix& g, Matrix& acc, bool identity_ref,
                 const TrainConfig& c, double eps) {
  for (Index j = 0; j < p.cols(); ++j)
    for (Index i = 0; i < p.rows(); ++i)
      step_scalar(p(i, j), g(i, j), identity_ref && i == j ? 1.0 : 0.0, c.lambda, acc(i, j),
                  c.eta, eps);
}

void step_matrix_cols(Matrix& p, const Matrix& g, Matrix& acc, bool identity_ref,
                      const std::vector<int>& cols, const TrainConfig& c, double eps) {
  for (int jc : cols)
    for (Index i = 0; i < p.rows(); ++i)
      step_scalar(p(i, jc), g(i, jc), identity_ref && i == jc ? 1.0 : 0.0, c.lambda,
                  acc(i, jc), c.eta, eps);
}

}  // namespace

void adagrad_step(ModelSet& model, const GradientSet& grads, AdaGradState& state,
                  const TrainConfig& config) {
  const double eps = state.eps;
  for (std::size_t k = 0; k < grads.by_arity.size(); ++k) {
    const ComponentGrads& g = grads.by_arity[k];
    if (!g.active) continue;
    ModelComponent& comp = model.by_arity[k];
    auto& acc = state.by_arity[k];
    const ViewRoles& roles = comp.roles();
    auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    const auto& ident = comp.form == Form::tucker ? comp.tucker.identity_reg
                                                  : comp.cp.identity_reg;
    if (comp.form == Form::tucker)
      for (Index i = 0; i < comp.tucker.core.size(); ++i)
        step_scalar(comp.tucker.core[i], g.core[i], 0.0, config.lambda, acc.core[i], config.eta,
                    eps);
    for (std::size_t v = 0; v < factors.size(); ++v) {
      // The property view updates lazily over the columns this step
      // touched; the other views receive dense gradients.
      if (static_cast<int>(v) == roles.property_view())
        step_matrix_cols(factors[v], g.factors[v], acc.factors[v], ident[v], g.touched_props,
                         config, eps);
      else
        step_matrix(factors[v], g.factors[v], acc.factors[v], ident[v], config, eps);
    }
  }
  if (config.fine_tune) {
    Matrix& vectors = model.embeddings.vectors();
    for (const auto& [word, g] : grads.embedding_rows)
      for (Index i = 0; i < vectors.rows(); ++i) {
        double& a = state.embeddings(i, word);
        const double gv = g[i];
        a += gv * gv;
        vectors(i, word) -= config.eta * gv / (std::sqrt(a) + eps);
      }
  }
}

double dev_metric(const ModelSet& model, std::span<const FeatureInstance> dev, LossKind loss) {
  if (dev.empty()) return 0;
  long long correct = 0;
  for (const auto& inst : dev) {
    const int pred = loss == LossKind::ranking || inst.is_ranking()
                         ? argmax(candidate_scores(model, inst))
                         : argmax(label_scores(model, inst.features));
    if (pred == inst.gold) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dev.size());
}

TrainResult train(ModelSet model, std::span<const FeatureInstance> train_set,
                  std::span<const FeatureInstance> dev_set, const TrainConfig& config,
                  std::ostream* log) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (dev_set.empty()) throw DataError("development set is empty (needed for early stopping)");

  AdaGradState state = init_adagrad(model, config.fine_tune);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.best_metric = -std::numeric_limits<double>::infinity();
  ModelSet best = model;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double loss_sum = 0;
    GradientSet grads;
    for (std::size_t idx : order) {
      grads.by_arity.clear();
      grads.embedding_rows.clear();
      loss_sum += loss_and_grads(model, train_set[idx], &config, config.loss, &grads);
      adagrad_step(model, grads, state, config);
    }
    const double metric = dev_metric(model, dev_set, config.loss);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(train_set.size()), metric, ms});
    if (log != nullptr)
      (*log) << epoch << '\t' << result.history.back().train_loss << '\t' << metric << '\t'
             << ms << '\n';
    if (metric > result.best_metric) {
      result.best_metric = metric;
      result.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

namespace {

double block_max_rel_err(ModelSet& probe, const FeatureInstance& inst, LossKind loss,
                         double* params, const double* analytic, Index count, double eps) {
  double worst = 0;
  for (Index i = 0; i < count; ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = instance_loss(probe, inst, loss);
    params[i] = saved - eps;
    const double down = instance_loss(probe, inst, loss);
    params[i] = saved;
    const double fd = (up - down) / (2 * eps);
    const double a = analytic[i];
    // The 1e-6 floor absorbs central-difference roundoff (~1e-11) on
    // near-zero coordinates.
    const double rel = std::abs(a - fd) / std::max(std::abs(a) + std::abs(fd), 1e-6);
    worst = std::max(worst, rel);
  }
  return worst;
}

std::string view_name(const ViewRoles& roles, int v) {
  if (roles.has_label && v == roles.label_view()) return "W(label)";
  if (v == roles.property_view()) return "W(property)";
  return "W(lex" + std::to_string(v - roles.property_view()) + ")";
}

}  // namespace

FdReport finite_diff_check(const ModelSet& model, const FeatureInstance& inst,
                           const TrainConfig& config, double eps) {
  ModelSet probe = model;
  GradientSet analytic = instance_gradients(probe, inst, config);

  FdReport report;
  auto record = [&](const std::string& name, double err) {
    report.blocks.emplace_back(name, err);
    report.max_error = std::max(report.max_error, err);
  };

  for (std::size_t k = 0; k < probe.by_arity.size(); ++k) {
    const int arity = static_cast<int>(k) + 1;
    if (!probe.has_arity(arity)) continue;
    ModelComponent& comp = probe.by_arity[k];
    const bool active = k < analytic.by_arity.size() && analytic.by_arity[k].active;
    const std::string prefix = "arity" + std::to_string(arity) + ".";
    auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;

    if (comp.form == Form::tucker) {
      const TensorD zero_core(comp.tucker.core.shape());
      const TensorD& g = active ? analytic.by_arity[k].core : zero_core;
      record(prefix + "core",
             block_max_rel_err(probe, inst, config.loss, comp.tucker.core.data(), g.data(),
                               comp.tucker.core.size(), eps));
    }
    for (std::size_t v = 0; v < factors.size(); ++v) {
      const Matrix zero = Matrix::Zero(factors[v].rows(), factors[v].cols());
      const Matrix& g = active ? analytic.by_arity[k].factors[v] : zero;
      record(prefix + view_name(comp.roles(), static_cast<int>(v)),
             block_max_rel_err(probe, inst, config.loss, factors[v].data(), g.data(),
                               factors[v].size(), eps));
    }
  }

  if (config.fine_tune) {
    // Every word mentioned by the instance, the only rows with gradient.
    std::set<int> words;
    auto collect = [&](const FeatureSets& sets) {
      for (const auto& atoms : sets.by_arity)
        for (const auto& atom : atoms) words.insert(atom.words.begin(), atom.words.end());
    };
    collect(inst.features);
    for (const auto& cand : inst.candidates) collect(cand);

    double worst = 0;
    Matrix& vectors = probe.embeddings.vectors();
    const Vector zero = Vector::Zero(vectors.rows());
    for (int w : words) {
      auto it = analytic.embedding_rows.find(w);
      const Vector& g = it == analytic.embedding_rows.end() ? zero : it->second;
      Vector col = vectors.col(w);
      worst = std::max(worst, block_max_rel_err(probe, inst, config.loss,
                                                vectors.col(w).data(), g.data(),
                                                vectors.rows(), eps));
      vectors.col(w) = col;
    }
    record("embeddings", worst);
  }
  return report;
}

}  // namespace lrfr
