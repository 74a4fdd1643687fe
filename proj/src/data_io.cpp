#include "lrfr/data_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace lrfr {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& origin, int line, const std::string& what) {
  throw DataError(origin + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

double parse_double(const std::string& origin, int line, std::string_view text) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail_at(origin, line, "bad number '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, const Matrix& rows) {
  if (rows.rows() != static_cast<Index>(words.size()))
    throw std::invalid_argument("EmbeddingTable: row count does not match word count");
  vectors_ = Matrix::Zero(rows.cols(), rows.rows() + 1);
  for (Index i = 0; i < rows.rows(); ++i) {
    const auto& w = words[static_cast<std::size_t>(i)];
    if (index_.count(w)) throw std::invalid_argument("EmbeddingTable: duplicate word '" + w + "'");
    index_.emplace(w, static_cast<int>(i) + 1);
    words_.push_back(w);
    vectors_.col(i + 1) = rows.row(i).transpose();
  }
}

int EmbeddingTable::lookup(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? 0 : it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty embeddings file");
  const auto header = split_ws(line);
  if (header.size() != 2) fail_at(path, 1, "header must be 'count dim'");
  const int count = static_cast<int>(parse_double(path, 1, header[0]));
  const int dim = static_cast<int>(parse_double(path, 1, header[1]));
  if (count < 1 || dim < 1) fail_at(path, 1, "count and dim must be positive");

  std::vector<std::string> words;
  Matrix rows(count, dim);
  int lineno = 1;
  int r = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (r >= count) fail_at(path, lineno, "more words than the header announced");
    if (static_cast<int>(fields.size()) != dim + 1)
      fail_at(path, lineno,
              "expected 1 word + " + std::to_string(dim) + " values, got " +
                  std::to_string(fields.size()) + " fields");
    std::string word(fields[0]);
    for (const auto& w : words)
      if (w == word) fail_at(path, lineno, "duplicate word '" + word + "'");
    for (int c = 0; c < dim; ++c)
      rows(r, c) = parse_double(path, lineno, fields[static_cast<std::size_t>(c) + 1]);
    words.push_back(std::move(word));
    ++r;
  }
  if (r != count)
    throw DataError(path + ": header announced " + std::to_string(count) + " words, found " +
                    std::to_string(r));
  return EmbeddingTable(std::move(words), rows);
}

ClusterMap load_clusters(const std::string& path, int prefix) {
  std::ifstream in = open_or_fail(path);
  ClusterMap map;
  map.set_prefix(prefix);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) fail_at(path, lineno, "expected 'bitstring<TAB>word'");
    const std::string bits = line.substr(0, tab);
    std::size_t end = line.find('\t', tab + 1);
    const std::string word =
        line.substr(tab + 1, end == std::string::npos ? std::string::npos : end - tab - 1);
    if (bits.empty()) fail_at(path, lineno, "empty cluster path");
    for (char c : bits)
      if (c != '0' && c != '1')
        fail_at(path, lineno, "cluster path contains non-binary character '" +
                                  std::string(1, c) + "'");
    if (word.empty()) fail_at(path, lineno, "empty word");
    map.insert(word, bits);
  }
  return map;
}

namespace {

std::map<std::string, std::string> parse_string_map(const json& j, const std::string& origin,
                                                    int line, const char* what) {
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string())
      fail_at(origin, line, std::string(what) + " '" + it.key() + "' must be a string");
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

std::pair<int, int> parse_pair_key(const std::string& key, const std::string& origin, int line) {
  const std::size_t us = key.find('_');
  if (us == std::string::npos)
    fail_at(origin, line, "pair annotation key '" + key + "' must look like 'i_j'");
  int a = 0, b = 0;
  auto r1 = std::from_chars(key.data(), key.data() + us, a);
  auto r2 = std::from_chars(key.data() + us + 1, key.data() + key.size(), b);
  if (r1.ec != std::errc() || r2.ec != std::errc())
    fail_at(origin, line, "pair annotation key '" + key + "' must look like 'i_j'");
  if (a > b) std::swap(a, b);
  return {a, b};
}

RawInstance parse_instance(const json& j, const std::string& origin, int line) {
  RawInstance raw;
  raw.line = line;
  if (!j.is_object()) fail_at(origin, line, "instance record must be a JSON object");
  if (!j.contains("tokens") || !j["tokens"].is_array())
    fail_at(origin, line, "missing 'tokens' array");
  for (const auto& t : j["tokens"]) {
    if (!t.is_string()) fail_at(origin, line, "tokens must be strings");
    raw.tokens.push_back(t.get<std::string>());
  }

  if (j.contains("annotations")) {
    const json& anns = j["annotations"];
    if (!anns.is_object()) fail_at(origin, line, "'annotations' must be an object");
    for (auto it = anns.begin(); it != anns.end(); ++it) {
      const json& v = it.value();
      if (v.is_string()) {
        raw.instance_ann[it.key()] = v.get<std::string>();
      } else if (v.is_array()) {
        if (v.size() != raw.tokens.size())
          fail_at(origin, line, "per-token annotation '" + it.key() + "' has " +
                                    std::to_string(v.size()) + " entries for " +
                                    std::to_string(raw.tokens.size()) + " tokens");
        std::vector<std::string> vals;
        for (const auto& e : v) {
          if (!e.is_string())
            fail_at(origin, line, "per-token annotation '" + it.key() + "' must hold strings");
          vals.push_back(e.get<std::string>());
        }
        raw.token_ann[it.key()] = std::move(vals);
      } else if (v.is_object()) {
        std::map<std::pair<int, int>, std::string> pairs;
        for (auto pit = v.begin(); pit != v.end(); ++pit) {
          if (!pit.value().is_string())
            fail_at(origin, line, "pair annotation '" + it.key() + "' must hold strings");
          pairs[parse_pair_key(pit.key(), origin, line)] = pit.value().get<std::string>();
        }
        raw.pair_ann[it.key()] = std::move(pairs);
      } else {
        fail_at(origin, line, "annotation '" + it.key() +
                                  "' must be a string, string array, or pair object");
      }
    }
  }

  if (j.contains("roles")) {
    if (!j["roles"].is_object()) fail_at(origin, line, "'roles' must be an object");
    for (auto it = j["roles"].begin(); it != j["roles"].end(); ++it) {
      if (!it.value().is_number_integer())
        fail_at(origin, line, "role '" + it.key() + "' must be a token index");
      raw.roles[it.key()] = it.value().get<int>();
    }
  }

  if (j.contains("candidates")) {
    if (!j["candidates"].is_array()) fail_at(origin, line, "'candidates' must be an array");
    for (const auto& c : j["candidates"]) {
      RawInstance::Candidate cand;
      if (!c.is_object() || !c.contains("head") || !c["head"].is_number_integer())
        fail_at(origin, line, "each candidate needs an integer 'head'");
      cand.head = c["head"].get<int>();
      if (c.contains("annotations")) {
        if (!c["annotations"].is_object())
          fail_at(origin, line, "candidate 'annotations' must be an object");
        cand.ann = parse_string_map(c["annotations"], origin, line, "candidate annotation");
      }
      raw.candidates.push_back(std::move(cand));
    }
    if (j.contains("gold")) {
      if (!j["gold"].is_number_integer()) fail_at(origin, line, "'gold' must be an integer");
      raw.gold_candidate = j["gold"].get<int>();
      if (raw.gold_candidate < 0 ||
          raw.gold_candidate >= static_cast<int>(raw.candidates.size()))
        fail_at(origin, line, "gold candidate " + std::to_string(raw.gold_candidate) +
                                  " outside the candidate list");
    }
    if (j.contains("label")) fail_at(origin, line, "ranking instances take 'gold', not 'label'");
  } else if (j.contains("label")) {
    if (!j["label"].is_string()) fail_at(origin, line, "'label' must be a string");
    raw.label = j["label"].get<std::string>();
    if (raw.label.empty()) fail_at(origin, line, "'label' must not be empty");
  }
  return raw;
}

}  // namespace

std::vector<RawInstance> parse_instances(std::istream& in, const std::string& origin) {
  std::vector<RawInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail_at(origin, lineno, "invalid JSON");
    out.push_back(parse_instance(j, origin, lineno));
  }
  return out;
}

std::vector<RawInstance> load_instances(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  return parse_instances(in, path);
}

std::vector<TemplateDef> parse_templates(std::istream& in, const std::string& origin) {
  std::vector<TemplateDef> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail_at(origin, lineno, "invalid JSON");
    TemplateDef t;
    t.line = lineno;
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string())
      fail_at(origin, lineno, "template record needs a string 'name'");
    t.name = j["name"].get<std::string>();
    if (!j.contains("property") || !j["property"].is_string())
      throw TemplateError(origin + ":" + std::to_string(lineno) + ": template '" + t.name +
                          "': needs a string 'property' pattern");
    t.property_pattern = j["property"].get<std::string>();
    if (!j.contains("slots") || !j["slots"].is_array())
      throw TemplateError(origin + ":" + std::to_string(lineno) + ": template '" + t.name +
                          "': needs a 'slots' array");
    for (const auto& s : j["slots"]) {
      if (!s.is_string())
        throw TemplateError(origin + ":" + std::to_string(lineno) + ": template '" + t.name +
                            "': slots must be strings");
      t.slots.push_back(s.get<std::string>());
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TemplateDef> load_templates(const std::string& path) {
  std::ifstream in = open_or_fail(path);
  return parse_templates(in, path);
}

}  // namespace lrfr
