#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lrfr/config.hpp"
#include "lrfr/data_io.hpp"
#include "lrfr/feature.hpp"
#include "lrfr/model.hpp"

namespace lrfr {

/// The parameter tensor for one lexical arity, in either low-rank form.
struct ModelComponent {
  Form form = Form::tucker;
  TuckerModel tucker;
  CPModel cp;

  const ViewRoles& roles() const { return form == Form::tucker ? tucker.roles : cp.roles; }
};

/// Everything needed to score instances: per-arity parameter tensors,
/// frozen vocabularies, the (possibly fine-tuned) embedding table,
/// clusters and templates, plus the configuration it was trained with.
/// Immutable outside training; training mutates a privately owned copy.
struct ModelSet {
  bool has_label = true;
  NgramMode mode = NgramMode::multi_tensor;
  std::vector<ModelComponent> by_arity;  // index k holds the arity-(k+1) tensor

  Vocab labels{/*with_unk=*/false};
  Vocab properties{/*with_unk=*/true};
  EmbeddingTable embeddings;
  ClusterMap clusters;
  bool use_clusters = false;
  std::vector<TemplateDef> templates;
  TrainConfig config;

  bool has_arity(int n) const {
    return n >= 1 && n <= static_cast<int>(by_arity.size()) &&
           component_present(by_arity[static_cast<std::size_t>(n - 1)]);
  }
  const ModelComponent& component(int n) const;
  ModelComponent& component(int n);

 private:
  static bool component_present(const ModelComponent& c) {
    return c.form == Form::tucker ? !c.tucker.factors.empty() : !c.cp.factors.empty();
  }
};

/// Binary model container: plain-text header and vocabularies, raw
/// little-endian 64-bit parameter blocks. save -> load -> save is
/// byte-identical; see docs/formats.md for the layout.
void save_model(const ModelSet& model, std::ostream& out);
void save_model(const ModelSet& model, const std::string& path);
ModelSet load_model(std::istream& in, const std::string& origin);
ModelSet load_model(const std::string& path);

}  // namespace lrfr
