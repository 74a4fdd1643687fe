#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lrfr/feature.hpp"
#include "lrfr/tensor.hpp"

namespace lrfr {

/// Pre-trained word vectors. Word id 0 is the reserved UNK row (zeros by
/// default); file words get ids 1..count. Vectors are stored as columns
/// so lookups hand out views without copying.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, const Matrix& rows);

  int dim() const { return static_cast<int>(vectors_.rows()); }
  int size() const { return static_cast<int>(words_.size()); }

  int lookup(const std::string& word) const;  // 0 when absent
  const std::string& word(int id) const { return words_[static_cast<std::size_t>(id)]; }
  Matrix::ConstColXpr vector(int id) const { return vectors_.col(id); }

  const Matrix& vectors() const { return vectors_; }
  Matrix& vectors() { return vectors_; }  // mutable for fine-tuning
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_{"<unk>"};
  std::unordered_map<std::string, int> index_;
  Matrix vectors_ = Matrix::Zero(0, 1);
};

/// Text embeddings: header line "count dim", then one "word v1 .. vdim"
/// line per word. Rejects duplicate words and dimension mismatches,
/// naming the offending line.
EmbeddingTable load_embeddings(const std::string& path);

/// Tab-separated cluster paths: "bitstring<TAB>word[<TAB>count]".
/// prefix > 0 truncates paths at lookup time.
ClusterMap load_clusters(const std::string& path, int prefix = 0);

/// JSONL instances, one record per line. See docs/formats.md.
std::vector<RawInstance> load_instances(const std::string& path);

/// JSONL templates, one record per line: {"name", "property", "slots"}.
std::vector<TemplateDef> load_templates(const std::string& path);

std::vector<RawInstance> parse_instances(std::istream& in, const std::string& origin);
std::vector<TemplateDef> parse_templates(std::istream& in, const std::string& origin);

}  // namespace lrfr
