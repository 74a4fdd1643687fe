#include "lrfr/feature.hpp"

#include <algorithm>
#include <charconv>

#include "lrfr/data_io.hpp"

namespace lrfr {

Vocab::Vocab(bool with_unk) : with_unk_(with_unk) {
  if (with_unk_) {
    names_.push_back("<unk>");
    index_.emplace("<unk>", kUnkId);
  }
}

int Vocab::intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  if (frozen_) {
    if (with_unk_) return kUnkId;
    return -1;
  }
  const int id = size();
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

int Vocab::lookup(const std::string& name) const {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  return with_unk_ ? kUnkId : -1;
}

const std::string& Vocab::name(int id) const { return names_[static_cast<std::size_t>(id)]; }

bool Vocab::contains(const std::string& name) const { return index_.count(name) > 0; }

void FeatureSets::add(FeatureAtom atom) {
  const int n = atom.arity();
  if (n < 1) throw std::invalid_argument("FeatureAtom must have at least one word");
  if (static_cast<int>(by_arity.size()) < n) by_arity.resize(static_cast<std::size_t>(n));
  by_arity[static_cast<std::size_t>(n - 1)].push_back(std::move(atom));
}

const std::vector<FeatureAtom>& FeatureSets::arity(int n) const {
  static const std::vector<FeatureAtom> kEmpty;
  if (n < 1 || n > static_cast<int>(by_arity.size())) return kEmpty;
  return by_arity[static_cast<std::size_t>(n - 1)];
}

bool FeatureSets::empty() const {
  return std::all_of(by_arity.begin(), by_arity.end(),
                     [](const auto& v) { return v.empty(); });
}

std::size_t FeatureSets::total() const {
  std::size_t n = 0;
  for (const auto& v : by_arity) n += v.size();
  return n;
}

namespace {

[[noreturn]] void template_fail(const TemplateDef& t, const std::string& what) {
  throw TemplateError("template '" + t.name + "': " + what);
}

// Pattern placeholders: {ann} instance (or candidate) annotation,
// {ann@K} per-token annotation of slot K's token, {ann@pair} per-pair
// annotation of the tokens bound to slots 1 and 2.
void check_pattern(const TemplateDef& t) {
  const std::string& p = t.property_pattern;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != '{') continue;
    const std::size_t close = p.find('}', i);
    if (close == std::string::npos) template_fail(t, "unterminated '{' in property pattern");
    const std::string ref = p.substr(i + 1, close - i - 1);
    if (ref.empty()) template_fail(t, "empty placeholder in property pattern");
    const std::size_t at = ref.find('@');
    if (at != std::string::npos) {
      if (at == 0) template_fail(t, "placeholder '" + ref + "' has no annotation name");
      const std::string where = ref.substr(at + 1);
      if (where == "pair") {
        if (t.slots.size() != 2)
          template_fail(t, "placeholder '" + ref + "' requires exactly 2 slots");
      } else {
        int k = 0;
        auto [ptr, ec] = std::from_chars(where.data(), where.data() + where.size(), k);
        if (ec != std::errc() || ptr != where.data() + where.size() || k < 1 ||
            k > static_cast<int>(t.slots.size()))
          template_fail(t, "placeholder '" + ref + "' references an invalid slot");
      }
    }
    i = close;
  }
}

}  // namespace

void validate_templates(const std::vector<TemplateDef>& templates, const ExtractOptions& opts) {
  for (const auto& t : templates) {
    if (t.name.empty()) throw TemplateError("template without a name");
    if (t.slots.empty()) template_fail(t, "needs at least one lexical slot");
    if (static_cast<int>(t.slots.size()) > opts.max_arity)
      template_fail(t, "has " + std::to_string(t.slots.size()) +
                           " lexical slots, above the configured maximum of " +
                           std::to_string(opts.max_arity));
    for (const auto& s : t.slots)
      if (s != "*" && s.rfind("role:", 0) != 0)
        template_fail(t, "slot '" + s + "' is neither \"*\" nor \"role:NAME\"");
    check_pattern(t);
  }
}

namespace {

int resolve_role(const TemplateDef& t, const RawInstance& raw,
                 const RawInstance::Candidate* cand, const std::string& role) {
  if (cand != nullptr && role == "head") return cand->head;
  auto it = raw.roles.find(role);
  if (it == raw.roles.end()) template_fail(t, "role '" + role + "' not present on instance");
  return it->second;
}

std::vector<std::vector<int>> slot_bindings(const TemplateDef& t, const RawInstance& raw,
                                            const RawInstance::Candidate* cand) {
  const int n_tokens = static_cast<int>(raw.tokens.size());
  std::vector<std::vector<int>> per_slot;
  int wildcards = 0;
  for (const auto& s : t.slots) {
    if (s == "*") {
      ++wildcards;
      std::vector<int> all(static_cast<std::size_t>(n_tokens));
      for (int i = 0; i < n_tokens; ++i) all[static_cast<std::size_t>(i)] = i;
      per_slot.push_back(std::move(all));
    } else {
      const int pos = resolve_role(t, raw, cand, s.substr(5));
      if (pos < 0 || pos >= n_tokens)
        template_fail(t, "role '" + s.substr(5) + "' binds position " + std::to_string(pos) +
                             " outside the token range");
      per_slot.push_back({pos});
    }
  }

  std::vector<std::vector<int>> bindings;
  if (t.slots.size() == 2 && wildcards == 2) {
    // Two free slots range over unordered token pairs i < j.
    for (int i = 0; i < n_tokens; ++i)
      for (int j = i + 1; j < n_tokens; ++j) bindings.push_back({i, j});
    return bindings;
  }
  std::vector<int> current(t.slots.size(), 0);
  std::vector<std::size_t> cursor(t.slots.size(), 0);
  while (true) {
    for (std::size_t k = 0; k < t.slots.size(); ++k) current[k] = per_slot[k][cursor[k]];
    bindings.push_back(current);
    std::size_t k = t.slots.size();
    while (k > 0) {
      --k;
      if (++cursor[k] < per_slot[k].size()) break;
      cursor[k] = 0;
      if (k == 0) return bindings;
    }
  }
}

std::string lookup_scalar_ann(const TemplateDef& t, const RawInstance& raw,
                              const RawInstance::Candidate* cand, const std::string& name) {
  if (cand != nullptr) {
    auto it = cand->ann.find(name);
    if (it != cand->ann.end()) return it->second;
  }
  auto it = raw.instance_ann.find(name);
  if (it == raw.instance_ann.end())
    template_fail(t, "annotation '" + name + "' missing from instance");
  return it->second;
}

std::string render_property(const TemplateDef& t, const RawInstance& raw,
                            const RawInstance::Candidate* cand, const std::vector<int>& pos) {
  const std::string& p = t.property_pattern;
  std::string out;
  out.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != '{') {
      out.push_back(p[i]);
      continue;
    }
    const std::size_t close = p.find('}', i);
    const std::string ref = p.substr(i + 1, close - i - 1);
    const std::size_t at = ref.find('@');
    if (at == std::string::npos) {
      out += lookup_scalar_ann(t, raw, cand, ref);
    } else {
      const std::string name = ref.substr(0, at);
      const std::string where = ref.substr(at + 1);
      if (where == "pair") {
        auto it = raw.pair_ann.find(name);
        const auto key = std::minmax(pos[0], pos[1]);
        if (it == raw.pair_ann.end() || !it->second.count({key.first, key.second}))
          template_fail(t, "pair annotation '" + name + "' missing for tokens (" +
                               std::to_string(key.first) + "," + std::to_string(key.second) +
                               ")");
        out += it->second.at({key.first, key.second});
      } else {
        int k = 0;
        std::from_chars(where.data(), where.data() + where.size(), k);
        auto it = raw.token_ann.find(name);
        if (it == raw.token_ann.end())
          template_fail(t, "per-token annotation '" + name + "' missing from instance");
        const auto& values = it->second;
        const int tok = pos[static_cast<std::size_t>(k - 1)];
        if (tok >= static_cast<int>(values.size()))
          template_fail(t, "per-token annotation '" + name + "' shorter than token list");
        out += values[static_cast<std::size_t>(tok)];
      }
    }
    i = close;
  }
  return out;
}

FeatureSets extract_sets(const RawInstance& raw, const std::vector<TemplateDef>& templates,
                         const RawInstance::Candidate* cand, Vocab& properties,
                         const EmbeddingTable& embeddings) {
  FeatureSets sets;
  for (const auto& t : templates) {
    for (const auto& binding : slot_bindings(t, raw, cand)) {
      FeatureAtom atom;
      atom.property = properties.intern(render_property(t, raw, cand, binding));
      atom.words.reserve(binding.size());
      for (int pos : binding)
        atom.words.push_back(embeddings.lookup(raw.tokens[static_cast<std::size_t>(pos)]));
      sets.add(std::move(atom));
    }
  }
  return sets;
}

}  // namespace

FeatureInstance extract(const RawInstance& raw, const std::vector<TemplateDef>& templates,
                        Vocab& properties, Vocab& labels, const EmbeddingTable& embeddings,
                        const ExtractOptions& opts) {
  FeatureInstance inst;
  if (!raw.candidates.empty()) {
    inst.gold = raw.gold_candidate;
    inst.candidates.reserve(raw.candidates.size());
    for (const auto& cand : raw.candidates) {
      FeatureSets sets = extract_sets(raw, templates, &cand, properties, embeddings);
      if (cand.head < 0 || cand.head >= static_cast<int>(raw.tokens.size()))
        throw DataError("instance at line " + std::to_string(raw.line) +
                        ": candidate head outside the token range");
      FeatureAtom bias;
      bias.property = properties.intern(opts.ranking_bias_property);
      bias.words.push_back(embeddings.lookup(raw.tokens[static_cast<std::size_t>(cand.head)]));
      sets.add(std::move(bias));
      inst.candidates.push_back(std::move(sets));
    }
    return inst;
  }
  inst.features = extract_sets(raw, templates, nullptr, properties, embeddings);
  if (!raw.label.empty()) inst.gold = labels.intern(raw.label);
  return inst;
}

void ClusterMap::insert(const std::string& word, const std::string& path) {
  paths_[word] = path;
}

std::string ClusterMap::cluster(const std::string& word) const {
  auto it = paths_.find(word);
  if (it == paths_.end()) return kUnkCluster;
  if (prefix_ > 0 && static_cast<int>(it->second.size()) > prefix_)
    return it->second.substr(0, static_cast<std::size_t>(prefix_));
  return it->second;
}

std::pair<FeatureAtom, FeatureAtom> cluster_reduce(const FeatureAtom& atom,
                                                   const ClusterMap& clusters,
                                                   Vocab& properties,
                                                   const EmbeddingTable& embeddings) {
  if (atom.arity() != 2)
    throw std::invalid_argument("cluster_reduce: atom must have exactly two words");
  const std::string& u = properties.name(atom.property);
  const std::string c1 = clusters.cluster(embeddings.word(atom.words[0]));
  const std::string c2 = clusters.cluster(embeddings.word(atom.words[1]));
  FeatureAtom first{properties.intern(u + "∧" + c1), {atom.words[1]}};
  FeatureAtom second{properties.intern(u + "∧" + c2), {atom.words[0]}};
  return {std::move(first), std::move(second)};
}

namespace {

void reduce_sets(FeatureSets& sets, const ClusterMap& clusters, Vocab& properties,
                 const EmbeddingTable& embeddings) {
  if (sets.max_arity() < 2) return;
  if (sets.max_arity() > 2)
    throw DataError("cluster mode supports arities 1 and 2 only");
  auto bigrams = std::move(sets.by_arity[1]);
  sets.by_arity.resize(1);
  for (const auto& atom : bigrams) {
    auto [a, b] = cluster_reduce(atom, clusters, properties, embeddings);
    sets.add(std::move(a));
    sets.add(std::move(b));
  }
}

}  // namespace

void cluster_reduce_all(FeatureInstance& inst, const ClusterMap& clusters, Vocab& properties,
                        const EmbeddingTable& embeddings) {
  reduce_sets(inst.features, clusters, properties, embeddings);
  for (auto& cand : inst.candidates) reduce_sets(cand, clusters, properties, embeddings);
}

}  // namespace lrfr
