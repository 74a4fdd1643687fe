#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lrfr/errors.hpp"

namespace lrfr {

/// String interner with dense indices. Built single-threaded during the
/// training pass, then frozen; lookups after freezing are read-only and
/// safe to share across threads.
class Vocab {
 public:
  // with_unk reserves index 0 for the unknown entry; frozen lookups of
  // unseen strings then return 0 instead of failing.
  explicit Vocab(bool with_unk = false);

  int intern(const std::string& name);
  int lookup(const std::string& name) const;  // -1 when absent and no UNK
  const std::string& name(int id) const;
  bool contains(const std::string& name) const;

  int size() const { return static_cast<int>(names_.size()); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  bool has_unk() const { return with_unk_; }

  const std::vector<std::string>& names() const { return names_; }

 private:
  bool with_unk_;
  bool frozen_ = false;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

constexpr int kUnkId = 0;

/// One conjunctive lexical feature minus its label part: a non-lexical
/// property index and an ordered list of word ids (arity = word count).
struct FeatureAtom {
  int property = 0;
  std::vector<int> words;

  int arity() const { return static_cast<int>(words.size()); }
  bool operator==(const FeatureAtom&) const = default;
};

/// Atoms partitioned by lexical arity: by_arity[k] holds arity-(k+1) atoms.
struct FeatureSets {
  std::vector<std::vector<FeatureAtom>> by_arity;

  void add(FeatureAtom atom);
  const std::vector<FeatureAtom>& arity(int n) const;  // empty when absent
  bool empty() const;
  int max_arity() const { return static_cast<int>(by_arity.size()); }
  std::size_t total() const;
};

/// A labeled example. Classification instances carry label-independent
/// feature sets scored against every label; ranking instances carry one
/// feature set per candidate and gold indexes the candidate list.
struct FeatureInstance {
  FeatureSets features;
  std::vector<FeatureSets> candidates;
  int gold = -1;

  bool is_ranking() const { return !candidates.empty(); }
};

/// Declarative feature template: a property pattern with {annotation}
/// placeholders plus 1..n lexical slots ("*" ranges over token positions,
/// two "*" slots over unordered pairs, "role:NAME" binds a named position).
struct TemplateDef {
  std::string name;
  std::string property_pattern;
  std::vector<std::string> slots;
  int line = 0;
};

/// Raw parsed instance prior to feature extraction. Annotations are
/// opaque strings keyed per instance, per token, or per token pair.
struct RawInstance {
  std::vector<std::string> tokens;
  std::map<std::string, std::string> instance_ann;
  std::map<std::string, std::vector<std::string>> token_ann;
  std::map<std::string, std::map<std::pair<int, int>, std::string>> pair_ann;
  std::map<std::string, int> roles;

  struct Candidate {
    int head = -1;
    std::map<std::string, std::string> ann;
  };
  std::vector<Candidate> candidates;

  std::string label;       // classification gold (may be empty for predict)
  int gold_candidate = -1; // ranking gold
  int line = 0;
};

class EmbeddingTable;  // data_io

struct ExtractOptions {
  int max_arity = 2;
  // Ranking candidates always receive an implicit (BIAS, head-word) atom,
  // so a candidate scores nonzero even under an empty template set.
  std::string ranking_bias_property = "BIAS";
};

void validate_templates(const std::vector<TemplateDef>& templates, const ExtractOptions& opts);

/// Runs every template over the instance, interning property strings
/// (frozen vocab maps unseen ones to UNK) and mapping tokens to embedding
/// ids. Ranking instances are extracted once per candidate.
FeatureInstance extract(const RawInstance& raw, const std::vector<TemplateDef>& templates,
                        Vocab& properties, Vocab& labels, const EmbeddingTable& embeddings,
                        const ExtractOptions& opts = {});

/// Word-cluster lookup: bitstring paths keyed by word, with an optional
/// prefix truncation and a reserved UNK cluster for absent words.
class ClusterMap {
 public:
  static constexpr const char* kUnkCluster = "UNK";

  void insert(const std::string& word, const std::string& path);
  std::string cluster(const std::string& word) const;  // prefix-truncated
  void set_prefix(int len) { prefix_ = len; }
  int prefix() const { return prefix_; }
  std::size_t size() const { return paths_.size(); }
  const std::map<std::string, std::string>& entries() const { return paths_; }

 private:
  int prefix_ = 0;  // 0 = full path
  std::map<std::string, std::string> paths_;
};

/// Rewrites a bigram atom (u, w1, w2) as the two unigram atoms
/// (u ^ c(w1), w2) and (u ^ c(w2), w1). The conjoined property strings
/// are interned into the same property vocabulary, so applying this
/// before freezing grows the property space.
std::pair<FeatureAtom, FeatureAtom> cluster_reduce(const FeatureAtom& atom,
                                                   const ClusterMap& clusters,
                                                   Vocab& properties,
                                                   const EmbeddingTable& embeddings);

/// Applies cluster_reduce to every arity-2 atom in place, leaving a
/// purely unigram feature set.
void cluster_reduce_all(FeatureInstance& inst, const ClusterMap& clusters, Vocab& properties,
                        const EmbeddingTable& embeddings);

}  // namespace lrfr
