#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lrfr/model_set.hpp"

static_assert(std::endian::native == std::endian::little,
              "model serialization assumes a little-endian host");

namespace lrfr {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "LRFR-MODEL v1";

json config_to_json(const TrainConfig& c) {
  json j;
  j["eta"] = c.eta;
  j["lambda"] = c.lambda;
  j["ranks"] = {{"r1", c.ranks.r1}, {"r2", c.ranks.r2}, {"r3", c.ranks.r3}, {"cp", c.ranks.cp}};
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["max_arity"] = c.max_arity;
  j["seed"] = c.seed;
  j["fine_tune"] = c.fine_tune;
  j["loss"] = loss_name(c.loss);
  j["ngram_mode"] = ngram_mode_name(c.ngram_mode);
  j["unigram_form"] = form_name(c.unigram_form);
  j["ngram_form"] = form_name(c.ngram_form);
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.eta = j.at("eta").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.ranks.r1 = j.at("ranks").at("r1").get<std::int64_t>();
  c.ranks.r2 = j.at("ranks").at("r2").get<std::int64_t>();
  c.ranks.r3 = j.at("ranks").at("r3").get<std::int64_t>();
  c.ranks.cp = j.at("ranks").at("cp").get<std::int64_t>();
  c.epochs = j.at("epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.max_arity = j.at("max_arity").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.fine_tune = j.at("fine_tune").get<bool>();
  c.loss = j.at("loss").get<std::string>() == "ranking" ? LossKind::ranking : LossKind::log;
  c.ngram_mode = j.at("ngram_mode").get<std::string>() == "cluster" ? NgramMode::cluster
                                                                    : NgramMode::multi_tensor;
  c.unigram_form = j.at("unigram_form").get<std::string>() == "cp" ? Form::cp : Form::tucker;
  c.ngram_form = j.at("ngram_form").get<std::string>() == "cp" ? Form::cp : Form::tucker;
  return c;
}

void put_doubles(std::string& buf, const double* p, std::size_t count) {
  const std::size_t at = buf.size();
  buf.resize(at + count * sizeof(double));
  std::memcpy(buf.data() + at, p, count * sizeof(double));
}

void put_matrix(std::string& buf, const Matrix& m) {
  // Row by row, so the byte layout is independent of Eigen's storage order.
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      put_doubles(buf, &v, 1);
    }
}

class BinReader {
 public:
  BinReader(const std::string& buf, const std::string& origin) : buf_(buf), origin_(origin) {}

  void take(double* p, std::size_t count) {
    if (at_ + count * sizeof(double) > buf_.size())
      throw DataError(origin_ + ": binary section truncated");
    std::memcpy(p, buf_.data() + at_, count * sizeof(double));
    at_ += count * sizeof(double);
  }

  Matrix take_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) take(&m(i, j), 1);
    return m;
  }

  bool exhausted() const { return at_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string origin_;
  std::size_t at_ = 0;
};

std::string expect_line(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": unexpected end of model file");
  return line;
}

std::vector<std::string> fields(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string f;
  while (ss >> f) out.push_back(f);
  return out;
}

std::string keyed_line(std::istream& in, const std::string& origin, const std::string& key) {
  const std::string line = expect_line(in, origin);
  if (line.rfind(key + " ", 0) != 0 && line != key)
    throw DataError(origin + ": expected '" + key + "' section, found '" + line + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

std::int64_t parse_count(const std::string& text, const std::string& origin,
                         const std::string& what) {
  std::int64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0)
    throw DataError(origin + ": malformed " + what + " '" + text + "'");
  return value;
}

std::string json_string_line(std::istream& in, const std::string& origin) {
  const std::string line = expect_line(in, origin);
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_string())
    throw DataError(origin + ": malformed string entry '" + line + "'");
  return j.get<std::string>();
}

}  // namespace

void save_model(const ModelSet& model, std::ostream& out) {
  out << kMagic << "\n";
  out << "mode " << ngram_mode_name(model.mode) << "\n";
  out << "label-view " << (model.has_label ? 1 : 0) << "\n";
  out << "config " << config_to_json(model.config).dump() << "\n";

  out << "labels " << model.labels.size() << "\n";
  for (const auto& name : model.labels.names()) out << json(name).dump() << "\n";
  out << "properties " << model.properties.size() << "\n";
  for (const auto& name : model.properties.names()) out << json(name).dump() << "\n";

  out << "embeddings " << model.embeddings.size() << " " << model.embeddings.dim() << "\n";
  for (int i = 1; i < model.embeddings.size(); ++i)
    out << json(model.embeddings.word(i)).dump() << "\n";

  out << "clusters " << (model.use_clusters ? model.clusters.size() : 0) << " "
      << model.clusters.prefix() << "\n";
  if (model.use_clusters)
    for (const auto& [word, path] : model.clusters.entries())
      out << json(word).dump() << "\t" << path << "\n";

  out << "templates " << model.templates.size() << "\n";
  for (const auto& t : model.templates) {
    json j;
    j["name"] = t.name;
    j["property"] = t.property_pattern;
    j["slots"] = t.slots;
    out << j.dump() << "\n";
  }

  std::string blob;
  out << "components " << model.by_arity.size() << "\n";
  for (std::size_t k = 0; k < model.by_arity.size(); ++k) {
    const ModelComponent& comp = model.by_arity[k];
    const bool present = model.has_arity(static_cast<int>(k) + 1);
    out << "component " << (k + 1) << " " << form_name(comp.form) << " " << (present ? 1 : 0)
        << "\n";
    if (!present) continue;
    const auto& factors = comp.form == Form::tucker ? comp.tucker.factors : comp.cp.factors;
    const auto& ident = comp.form == Form::tucker ? comp.tucker.identity_reg
                                                  : comp.cp.identity_reg;
    if (comp.form == Form::tucker) {
      out << "core";
      for (Index d : comp.tucker.core.shape()) out << " " << d;
      out << "\n";
      put_doubles(blob, comp.tucker.core.data(), static_cast<std::size_t>(comp.tucker.core.size()));
    } else {
      out << "rank " << comp.cp.rank << "\n";
    }
    out << "factors " << factors.size() << "\n";
    for (std::size_t v = 0; v < factors.size(); ++v) {
      out << "factor " << factors[v].rows() << " " << factors[v].cols() << " "
          << (ident[v] ? 1 : 0) << "\n";
      put_matrix(blob, factors[v]);
    }
  }

  put_matrix(blob, model.embeddings.vectors().transpose());  // one row per word id

  out << "binary " << blob.size() << "\n";
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

void save_model(const ModelSet& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  save_model(model, out);
  if (!out) throw DataError("failed writing model file '" + path + "'");
}

ModelSet load_model(std::istream& in, const std::string& origin) {
  const std::string magic = expect_line(in, origin);
  if (magic != kMagic) {
    throw DataError(origin + ": model version '" + magic + "' is not supported; expected '" +
                    kMagic + "'");
  }

  ModelSet model;
  model.mode = keyed_line(in, origin, "mode") == "cluster" ? NgramMode::cluster
                                                           : NgramMode::multi_tensor;
  model.has_label = keyed_line(in, origin, "label-view") == "1";
  {
    json j = json::parse(keyed_line(in, origin, "config"), nullptr, false);
    if (j.is_discarded()) throw DataError(origin + ": malformed config echo");
    model.config = config_from_json(j);
  }

  const std::int64_t n_labels = parse_count(keyed_line(in, origin, "labels"), origin, "label count");
  for (int i = 0; i < n_labels; ++i) model.labels.intern(json_string_line(in, origin));
  model.labels.freeze();

  const std::int64_t n_props = parse_count(keyed_line(in, origin, "properties"), origin, "property count");
  for (int i = 0; i < n_props; ++i) {
    const std::string name = json_string_line(in, origin);
    if (i == 0) {
      if (name != "<unk>") throw DataError(origin + ": property 0 must be '<unk>'");
      continue;  // already present
    }
    model.properties.intern(name);
  }
  model.properties.freeze();

  const auto emb_head = fields(keyed_line(in, origin, "embeddings"));
  if (emb_head.size() != 2) throw DataError(origin + ": malformed embeddings header");
  const std::int64_t emb_count = parse_count(emb_head[0], origin, "embedding count");
  const std::int64_t emb_dim = parse_count(emb_head[1], origin, "embedding dim");
  std::vector<std::string> emb_words;
  for (int i = 1; i < emb_count; ++i) emb_words.push_back(json_string_line(in, origin));

  const auto cl_head = fields(keyed_line(in, origin, "clusters"));
  if (cl_head.size() != 2) throw DataError(origin + ": malformed clusters header");
  const std::int64_t n_clusters = parse_count(cl_head[0], origin, "cluster count");
  model.clusters.set_prefix(static_cast<int>(parse_count(cl_head[1], origin, "cluster prefix")));
  model.use_clusters = n_clusters > 0;
  for (int i = 0; i < n_clusters; ++i) {
    const std::string line = expect_line(in, origin);
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(origin + ": malformed cluster entry");
    json w = json::parse(line.substr(0, tab), nullptr, false);
    if (w.is_discarded() || !w.is_string())
      throw DataError(origin + ": malformed cluster entry");
    model.clusters.insert(w.get<std::string>(), line.substr(tab + 1));
  }

  const std::int64_t n_templates = parse_count(keyed_line(in, origin, "templates"), origin, "template count");
  for (int i = 0; i < n_templates; ++i) {
    json j = json::parse(expect_line(in, origin), nullptr, false);
    if (j.is_discarded()) throw DataError(origin + ": malformed template entry");
    TemplateDef t;
    t.name = j.at("name").get<std::string>();
    t.property_pattern = j.at("property").get<std::string>();
    for (const auto& s : j.at("slots")) t.slots.push_back(s.get<std::string>());
    model.templates.push_back(std::move(t));
  }

  struct PendingFactor {
    Index rows = 0, cols = 0;
    bool identity = false;
  };
  struct PendingComponent {
    bool present = false;
    Form form = Form::tucker;
    std::vector<Index> core_shape;
    Index rank = 0;
    std::vector<PendingFactor> factors;
  };
  const std::int64_t n_components = parse_count(keyed_line(in, origin, "components"), origin, "component count");
  std::vector<PendingComponent> pending(static_cast<std::size_t>(n_components));
  for (int k = 0; k < n_components; ++k) {
    const auto head = fields(keyed_line(in, origin, "component"));
    if (head.size() != 3 || parse_count(head[0], origin, "component arity") != k + 1)
      throw DataError(origin + ": malformed component header");
    auto& pc = pending[static_cast<std::size_t>(k)];
    pc.form = head[1] == "cp" ? Form::cp : Form::tucker;
    pc.present = head[2] == "1";
    if (!pc.present) continue;
    if (pc.form == Form::tucker) {
      for (const auto& f : fields(keyed_line(in, origin, "core")))
        pc.core_shape.push_back(parse_count(f, origin, "core extent"));
    } else {
      pc.rank = parse_count(keyed_line(in, origin, "rank"), origin, "cp rank");
    }
    const std::int64_t n_factors = parse_count(keyed_line(in, origin, "factors"), origin, "factor count");
    for (int v = 0; v < n_factors; ++v) {
      const auto ff = fields(keyed_line(in, origin, "factor"));
      if (ff.size() != 3) throw DataError(origin + ": malformed factor header");
      pc.factors.push_back({parse_count(ff[0], origin, "factor rows"),
                            parse_count(ff[1], origin, "factor cols"), ff[2] == "1"});
    }
  }

  const std::size_t blob_size = static_cast<std::size_t>(
      parse_count(keyed_line(in, origin, "binary"), origin, "binary size"));
  std::string blob(blob_size, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_size));
  if (static_cast<std::size_t>(in.gcount()) != blob_size)
    throw DataError(origin + ": binary section truncated");

  BinReader reader(blob, origin);
  for (std::size_t k = 0; k < pending.size(); ++k) {
    const auto& pc = pending[k];
    ModelComponent comp;
    comp.form = pc.form;
    if (pc.present) {
      const ViewRoles roles{model.has_label, static_cast<int>(k) + 1};
      if (pc.form == Form::tucker) {
        comp.tucker.core = TensorD(pc.core_shape);
        reader.take(comp.tucker.core.data(), static_cast<std::size_t>(comp.tucker.core.size()));
        for (const auto& f : pc.factors) {
          comp.tucker.factors.push_back(reader.take_matrix(f.rows, f.cols));
          comp.tucker.identity_reg.push_back(f.identity);
        }
        comp.tucker.roles = roles;
        check_tucker(comp.tucker);
      } else {
        comp.cp.rank = pc.rank;
        for (const auto& f : pc.factors) {
          comp.cp.factors.push_back(reader.take_matrix(f.rows, f.cols));
          comp.cp.identity_reg.push_back(f.identity);
        }
        comp.cp.roles = roles;
        check_cp(comp.cp);
      }
    }
    model.by_arity.push_back(std::move(comp));
  }

  const Matrix rows = reader.take_matrix(emb_count, emb_dim);
  EmbeddingTable table(emb_words, rows.bottomRows(emb_count - 1));
  table.vectors().col(0) = rows.row(0).transpose();  // UNK row may be fine-tuned
  model.embeddings = std::move(table);
  if (!reader.exhausted()) throw DataError(origin + ": trailing bytes in binary section");
  return model;
}

ModelSet load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return load_model(in, path);
}

}  // namespace lrfr
