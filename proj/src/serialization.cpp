#include "nnmf/serialization.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

namespace nnmf {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

constexpr const char* kMagic = "NNMFMODEL1";

}  // namespace

Fields config_fields(const ModelConfig& c) {
  return {
      {"algorithm", to_string(c.algorithm)},
      {"factors", std::to_string(c.factors)},
      {"learning_rate", format_double(c.learning_rate)},
      {"reg_p", format_double(c.reg_p)},
      {"reg_q", format_double(c.reg_q)},
      {"epochs_max", std::to_string(c.epochs_max)},
      {"user_k", std::to_string(c.user_k)},
      {"item_k", std::to_string(c.item_k)},
      {"user_shrink", format_double(c.user_shrink)},
      {"item_shrink", format_double(c.item_shrink)},
      {"negative_ratio", std::to_string(c.negative_ratio)},
      {"eval_every", std::to_string(c.early_stop.eval_every)},
      {"patience", std::to_string(c.early_stop.patience)},
      {"eval_cutoff", std::to_string(c.early_stop.cutoff)},
      {"init_seed", std::to_string(c.init_seed)},
      {"sample_seed", std::to_string(c.sample_seed)},
  };
}

ModelConfig config_from_fields(const std::map<std::string, std::string>& fields) {
  ModelConfig c;
  for (const auto& [key, value] : fields) {
    if (key == "algorithm") c.algorithm = parse_algorithm(value);
    else if (key == "factors") c.factors = parse_number<Index>(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
    else if (key == "reg_p") c.reg_p = parse_number<double>(key, value);
    else if (key == "reg_q") c.reg_q = parse_number<double>(key, value);
    else if (key == "reg") c.reg_p = c.reg_q = parse_number<double>(key, value);
    else if (key == "epochs_max") c.epochs_max = parse_number<int>(key, value);
    else if (key == "user_k") c.user_k = parse_number<Index>(key, value);
    else if (key == "item_k") c.item_k = parse_number<Index>(key, value);
    else if (key == "user_shrink") c.user_shrink = parse_number<double>(key, value);
    else if (key == "item_shrink") c.item_shrink = parse_number<double>(key, value);
    else if (key == "negative_ratio") c.negative_ratio = parse_number<int>(key, value);
    else if (key == "eval_every") c.early_stop.eval_every = parse_number<int>(key, value);
    else if (key == "patience") c.early_stop.patience = parse_number<int>(key, value);
    else if (key == "eval_cutoff") c.early_stop.cutoff = parse_number<Index>(key, value);
    else if (key == "init_seed") c.init_seed = parse_number<std::uint64_t>(key, value);
    else if (key == "sample_seed") c.sample_seed = parse_number<std::uint64_t>(key, value);
    else throw ConfigError("unknown model setting '" + key + "'");
  }
  return c;
}

const std::string& ModelFile::get(const std::string& key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw DataError("model file has no '" + key + "' entry");
}

const Matrix& ModelFile::block(const std::string& name) const {
  for (const auto& [n, m] : blocks) {
    if (n == name) return m;
  }
  throw DataError("model file has no block '" + name + "'");
}

void write_model_file(const std::filesystem::path& path, const ModelFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kMagic << '\n';
  for (const auto& [k, v] : file.header) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("model header entry '" + k + "' cannot be stored");
    }
    out << k << '=' << v << '\n';
  }
  out << "end\n";
  for (const auto& [name, m] : file.blocks) {
    out << "block " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    std::vector<unsigned char> bytes(static_cast<std::size_t>(m.size()) * 8);
    std::size_t at = 0;
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c) {
        const auto bits = std::bit_cast<std::uint64_t>(m(r, c));
        for (int b = 0; b < 8; ++b) bytes[at++] = static_cast<unsigned char>(bits >> (8 * b));
      }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw DataError("failed writing " + path.string());
}

ModelFile read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw DataError(path.string() + ": not a model file");
  ModelFile file;
  while (true) {
    if (!std::getline(in, line)) throw DataError(path.string() + ": truncated header");
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ": malformed header line '" + line + "'");
    file.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  while (std::getline(in, line)) {
    char name[256];
    long long rows = 0, cols = 0;
    if (std::sscanf(line.c_str(), "block %255s %lld %lld", name, &rows, &cols) != 3 || rows < 0 || cols < 0) {
      throw DataError(path.string() + ": malformed block line '" + line + "'");
    }
    Matrix m(rows, cols);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(rows * cols) * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw DataError(path.string() + ": truncated block");
    std::size_t at = 0;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[at++]) << (8 * b);
        m(r, c) = std::bit_cast<double>(bits);
      }
    }
    file.blocks.emplace_back(name, std::move(m));
  }
  return file;
}

ModelFile to_model_file(const TrainedModel& model, const std::string& user_similarity_key,
                        const std::string& item_similarity_key) {
  ModelFile file;
  file.header = {
      {"kind", model.config.kind()},
      {"algorithm", to_string(model.config.algorithm)},
      {"factors", std::to_string(model.base.factors())},
      {"n_users", std::to_string(model.base.users.rows())},
      {"n_items", std::to_string(model.base.items.rows())},
      {"config_hash", to_hex(model.config.hash())},
      {"user_similarity", user_similarity_key},
      {"item_similarity", item_similarity_key},
      {"epochs_run", std::to_string(model.epochs_run)},
      {"best_epoch", std::to_string(model.best_epoch)},
  };
  for (auto& f : config_fields(model.config)) file.header.emplace_back("config." + f.first, f.second);
  file.blocks.emplace_back("P", model.base.users);
  file.blocks.emplace_back("Q", model.base.items);
  return file;
}

TrainedModel trained_model_from_file(const ModelFile& file, const SimilarityResolver& resolve) {
  std::map<std::string, std::string> fields;
  for (const auto& [k, v] : file.header) {
    if (k.rfind("config.", 0) == 0) fields[k.substr(7)] = v;
  }
  TrainedModel model;
  model.config = config_from_fields(fields);
  if (to_hex(model.config.hash()) != file.get("config_hash")) throw DataError("model config hash mismatch");
  model.base.users = file.block("P");
  model.base.items = file.block("Q");
  const auto& user_key = file.get("user_similarity");
  const auto& item_key = file.get("item_similarity");
  model.user_similarity = user_key == "identity" ? identity_similarity(model.base.users.rows()) : resolve(user_key);
  model.item_similarity = item_key == "identity" ? identity_similarity(model.base.items.rows()) : resolve(item_key);
  if (model.user_similarity.size() != model.base.users.rows() ||
      model.item_similarity.size() != model.base.items.rows()) {
    throw DataError("model similarities do not match its embeddings");
  }
  model.epochs_run = parse_number<int>("epochs_run", file.get("epochs_run"));
  model.best_epoch = parse_number<int>("best_epoch", file.get("best_epoch"));
  model.materialized = materialize(model.base, model.user_similarity, model.item_similarity);
  return model;
}

ModelFile to_model_file(const ScoreModel& model, const std::string& similarity_key) {
  ModelFile file;
  file.header.emplace_back("kind", to_string(model.kind));
  switch (model.kind) {
    case BaselineKind::item_knn:
    case BaselineKind::user_knn:
      file.header.emplace_back("similarity", similarity_key);
      break;
    case BaselineKind::slim_bpr: {
      Matrix triples(model.weights.nonZeros(), 3);
      Index row = 0;
      for (Index r = 0; r < model.weights.outerSize(); ++r) {
        for (SparseMatrix::InnerIterator it(model.weights, r); it; ++it, ++row) {
          triples(row, 0) = static_cast<double>(r);
          triples(row, 1) = static_cast<double>(it.index());
          triples(row, 2) = it.value();
        }
      }
      file.header.emplace_back("n_items", std::to_string(model.weights.rows()));
      file.blocks.emplace_back("W", std::move(triples));
      break;
    }
    case BaselineKind::pure_svd:
      file.header.emplace_back("factors", std::to_string(model.item_factors.cols()));
      file.blocks.emplace_back("V", model.item_factors);
      file.blocks.emplace_back("sigma", model.singular_values.transpose());
      break;
  }
  return file;
}

ScoreModel score_model_from_file(const ModelFile& file, const SimilarityResolver& resolve) {
  ScoreModel model;
  model.kind = parse_baseline_kind(file.get("kind"));
  switch (model.kind) {
    case BaselineKind::item_knn:
    case BaselineKind::user_knn:
      model.similarity = resolve(file.get("similarity"));
      break;
    case BaselineKind::slim_bpr: {
      const Index n = parse_number<Index>("n_items", file.get("n_items"));
      const Matrix& triples = file.block("W");
      std::vector<Eigen::Triplet<double, int>> entries;
      for (Index r = 0; r < triples.rows(); ++r) {
        entries.emplace_back(static_cast<int>(triples(r, 0)), static_cast<int>(triples(r, 1)), triples(r, 2));
      }
      model.weights.resize(n, n);
      model.weights.setFromTriplets(entries.begin(), entries.end());
      break;
    }
    case BaselineKind::pure_svd:
      model.item_factors = file.block("V");
      model.singular_values = file.block("sigma").row(0).transpose();
      break;
  }
  return model;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss,val_metric\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.loss) << ',';
    if (!std::isnan(h.val_metric)) out << format_double(h.val_metric);
    out << '\n';
  }
}

}  // namespace nnmf
