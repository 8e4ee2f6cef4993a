#include "nnmf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace nnmf {

InteractionMatrix::InteractionMatrix(Index n_users, Index n_items) : ratings_(n_users, n_items) {
  ratings_.makeCompressed();
}

InteractionMatrix::InteractionMatrix(SparseMatrix ratings) : ratings_(std::move(ratings)) {
  ratings_.makeCompressed();
}

InteractionMatrix InteractionMatrix::from_interactions(Index n_users, Index n_items,
                                                       std::span<const Interaction> interactions) {
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(interactions.size());
  for (const auto& x : interactions) {
    if (x.user < 0 || x.user >= n_users || x.item < 0 || x.item >= n_items) {
      throw DataError("interaction (" + std::to_string(x.user) + ", " + std::to_string(x.item) +
                      ") outside a " + std::to_string(n_users) + "x" + std::to_string(n_items) + " matrix");
    }
    if (!std::isfinite(x.value)) throw DataError("non-finite interaction value");
    triplets.emplace_back(static_cast<int>(x.user), static_cast<int>(x.item), x.value);
  }
  SparseMatrix m(n_users, n_items);
  // Eigen visits duplicates in input order, so keeping the newer value is last-wins.
  m.setFromTriplets(triplets.begin(), triplets.end(), [](double, double newer) { return newer; });
  return InteractionMatrix(std::move(m));
}

std::span<const int> InteractionMatrix::items_of(Index u) const {
  const int* outer = ratings_.outerIndexPtr();
  return {ratings_.innerIndexPtr() + outer[u], static_cast<std::size_t>(outer[u + 1] - outer[u])};
}

std::span<const double> InteractionMatrix::values_of(Index u) const {
  const int* outer = ratings_.outerIndexPtr();
  return {ratings_.valuePtr() + outer[u], static_cast<std::size_t>(outer[u + 1] - outer[u])};
}

Index InteractionMatrix::row_size(Index u) const {
  const int* outer = ratings_.outerIndexPtr();
  return outer[u + 1] - outer[u];
}

bool InteractionMatrix::contains(Index u, Index i) const {
  auto row = items_of(u);
  return std::binary_search(row.begin(), row.end(), static_cast<int>(i));
}

std::vector<Index> InteractionMatrix::item_popularity() const {
  std::vector<Index> counts(n_items(), 0);
  const int* inner = ratings_.innerIndexPtr();
  for (Index k = 0; k < nnz(); ++k) ++counts[inner[k]];
  return counts;
}

std::vector<Index> InteractionMatrix::user_activity() const {
  std::vector<Index> counts(n_users());
  for (Index u = 0; u < n_users(); ++u) counts[u] = row_size(u);
  return counts;
}

std::vector<Interaction> InteractionMatrix::to_interactions() const {
  std::vector<Interaction> out;
  out.reserve(nnz());
  for (Index u = 0; u < n_users(); ++u) {
    auto items = items_of(u);
    auto values = values_of(u);
    for (std::size_t k = 0; k < items.size(); ++k) out.push_back({u, items[k], values[k]});
  }
  return out;
}

std::uint64_t InteractionMatrix::content_hash() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(n_users())).add(static_cast<std::uint64_t>(n_items()));
  for (const auto& x : to_interactions()) {
    h.add(static_cast<std::uint64_t>(x.user)).add(static_cast<std::uint64_t>(x.item)).add(x.value);
  }
  return h.value();
}

InteractionMatrix LoadedInteractions::to_matrix() const {
  return InteractionMatrix::from_interactions(n_users(), n_items(), interactions);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, std::string_view delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
  return fields;
}

Index intern(std::unordered_map<std::string, Index>& ids, std::vector<std::string>& tokens,
             std::string_view token) {
  auto [it, inserted] = ids.try_emplace(std::string(token), static_cast<Index>(tokens.size()));
  if (inserted) tokens.emplace_back(token);
  return it->second;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

LoadedInteractions load_interactions(const std::filesystem::path& path, const DelimiterSpec& spec) {
  if (spec.delimiter.empty()) throw ConfigError("empty delimiter");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open interaction file " + path.string());

  LoadedInteractions data;
  std::unordered_map<std::string, Index> user_ids, item_ids;
  std::unordered_map<std::uint64_t, std::size_t> seen;  // packed (user, item) -> position
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && spec.header) continue;
    if (line.empty()) continue;
    auto fields = split_fields(line, spec.delimiter);
    if (fields.size() < 3 || fields[0].empty() || fields[1].empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected user, item, value columns");
    }
    double value = 0.0;
    const auto text = fields[2];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed value '" +
                      std::string(text) + "'");
    }
    const Index u = intern(user_ids, data.user_tokens, fields[0]);
    const Index i = intern(item_ids, data.item_tokens, fields[1]);
    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(i);
    auto [it, inserted] = seen.try_emplace(key, data.interactions.size());
    if (inserted) {
      data.interactions.push_back({u, i, value});
    } else {
      data.interactions[it->second].value = value;
    }
  }
  if (data.interactions.empty()) throw DataError("interaction file " + path.string() + " is empty");
  return data;
}

void write_interactions(const std::filesystem::path& path, const LoadedInteractions& data,
                        const DelimiterSpec& spec) {
  auto out = open_output(path);
  if (spec.header) out << "user" << spec.delimiter << "item" << spec.delimiter << "value\n";
  for (const auto& x : data.interactions) {
    out << data.user_tokens.at(x.user) << spec.delimiter << data.item_tokens.at(x.item) << spec.delimiter
        << format_double(x.value) << '\n';
  }
}

void write_index_map(const std::filesystem::path& path, std::span<const std::string> tokens) {
  auto out = open_output(path);
  out << "index,token\n";
  for (std::size_t k = 0; k < tokens.size(); ++k) out << k << ',' << tokens[k] << '\n';
}

std::vector<Interaction> binarize(std::span<const Interaction> interactions, double threshold) {
  std::vector<Interaction> out;
  for (const auto& x : interactions) {
    if (x.value >= threshold) out.push_back({x.user, x.item, 1.0});
  }
  return out;
}

FilterResult core_filter(const InteractionMatrix& matrix, Index min_interactions, FilterMode mode) {
  if (min_interactions < 1) throw ConfigError("min_interactions must be at least 1");
  std::vector<char> user_alive(matrix.n_users(), 1), item_alive(matrix.n_items(), 1);
  const auto entries = matrix.to_interactions();

  while (true) {
    std::vector<Index> user_count(matrix.n_users(), 0), item_count(matrix.n_items(), 0);
    for (const auto& x : entries) {
      if (user_alive[x.user] && item_alive[x.item]) {
        ++user_count[x.user];
        ++item_count[x.item];
      }
    }
    bool changed = false;
    for (Index u = 0; u < matrix.n_users(); ++u) {
      if (user_alive[u] && user_count[u] < min_interactions) user_alive[u] = 0, changed = true;
    }
    for (Index i = 0; i < matrix.n_items(); ++i) {
      if (item_alive[i] && item_count[i] < min_interactions) item_alive[i] = 0, changed = true;
    }
    if (!changed || mode == FilterMode::single_pass) break;
  }

  FilterResult result;
  std::vector<Index> user_map(matrix.n_users(), -1), item_map(matrix.n_items(), -1);
  for (Index u = 0; u < matrix.n_users(); ++u) {
    if (user_alive[u]) {
      user_map[u] = static_cast<Index>(result.kept_users.size());
      result.kept_users.push_back(u);
    }
  }
  for (Index i = 0; i < matrix.n_items(); ++i) {
    if (item_alive[i]) {
      item_map[i] = static_cast<Index>(result.kept_items.size());
      result.kept_items.push_back(i);
    }
  }
  std::vector<Interaction> kept;
  for (const auto& x : entries) {
    if (user_alive[x.user] && item_alive[x.item]) kept.push_back({user_map[x.user], item_map[x.item], x.value});
  }
  if (kept.empty()) {
    throw DataError("core filtering with min_interactions=" + std::to_string(min_interactions) +
                    " left an empty dataset");
  }
  result.matrix = InteractionMatrix::from_interactions(static_cast<Index>(result.kept_users.size()),
                                                       static_cast<Index>(result.kept_items.size()), kept);
  return result;
}

DatasetSplit holdout_split(const InteractionMatrix& matrix, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  auto entries = matrix.to_interactions();
  const auto n = static_cast<Index>(entries.size());
  if (n < 3) throw DataError("holdout split needs at least 3 interactions");

  std::mt19937_64 rng(seed);
  std::shuffle(entries.begin(), entries.end(), rng);

  const auto n_valid = static_cast<Index>(std::floor(static_cast<double>(n) * ratios.validation + 1e-9));
  const auto n_test = static_cast<Index>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));
  const Index n_train = n - n_valid - n_test;

  std::span<const Interaction> all(entries);
  DatasetSplit split;
  split.train = InteractionMatrix::from_interactions(matrix.n_users(), matrix.n_items(), all.subspan(0, n_train));
  split.validation =
      InteractionMatrix::from_interactions(matrix.n_users(), matrix.n_items(), all.subspan(n_train, n_valid));
  split.test = InteractionMatrix::from_interactions(matrix.n_users(), matrix.n_items(),
                                                    all.subspan(n_train + n_valid, n_test));
  return split;
}

InteractionMatrix synthesize_powerlaw(Index n_users, Index n_items, Index n_interactions, double exponent,
                                      std::uint64_t seed) {
  if (n_users < 1 || n_items < 1) throw ConfigError("synthetic dataset needs at least one user and item");
  if (!(exponent > 0)) throw ConfigError("power-law exponent must be positive");
  if (n_interactions < 0 || static_cast<double>(n_interactions) > static_cast<double>(n_users) * n_items) {
    throw ConfigError("requested density exceeds 1");
  }
  std::vector<double> weights(n_items);
  for (Index i = 0; i < n_items; ++i) weights[i] = std::pow(static_cast<double>(i + 1), -exponent);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<Index> pick_item(weights.begin(), weights.end());
  std::uniform_int_distribution<Index> pick_user(0, n_users - 1);

  std::unordered_set<std::uint64_t> taken;
  taken.reserve(static_cast<std::size_t>(n_interactions) * 2);
  std::vector<Interaction> entries;
  entries.reserve(n_interactions);
  while (static_cast<Index>(entries.size()) < n_interactions) {
    const Index u = pick_user(rng);
    const Index i = pick_item(rng);
    const auto key = static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n_items) + static_cast<std::uint64_t>(i);
    if (taken.insert(key).second) entries.push_back({u, i, 1.0});
  }
  return InteractionMatrix::from_interactions(n_users, n_items, entries);
}

void write_matrix(const std::filesystem::path& path, const InteractionMatrix& matrix) {
  auto out = open_output(path);
  for (const auto& x : matrix.to_interactions()) {
    out << x.user << '\t' << x.item << '\t' << format_double(x.value) << '\n';
  }
}

InteractionMatrix read_matrix(const std::filesystem::path& path, Index n_users, Index n_items) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Interaction> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line, "\t");
    Interaction x;
    bool ok = fields.size() == 3;
    if (ok) {
      auto parse = [&](std::string_view f, auto& out) {
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
        return ec == std::errc() && p == f.data() + f.size();
      };
      ok = parse(fields[0], x.user) && parse(fields[1], x.item) && parse(fields[2], x.value);
    }
    if (!ok) throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed record");
    entries.push_back(x);
  }
  return InteractionMatrix::from_interactions(n_users, n_items, entries);
}

}  // namespace nnmf
