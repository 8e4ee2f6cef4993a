#include "nnmf/similarity.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace nnmf {

std::string to_string(Axis axis) { return axis == Axis::user ? "user" : "item"; }

Axis parse_axis(const std::string& text) {
  if (text == "user") return Axis::user;
  if (text == "item") return Axis::item;
  throw ConfigError("unknown axis '" + text + "'");
}

namespace {

struct Candidate {
  double weight;
  int id;
};

// Higher weight first, then smaller id.
bool ranks_before(const Candidate& a, const Candidate& b) {
  return a.weight > b.weight || (a.weight == b.weight && a.id < b.id);
}

}  // namespace

SimilarityMatrix cosine_topk(const InteractionMatrix& matrix, Axis axis, Index k, double shrink) {
  if (!(shrink >= 0) || !std::isfinite(shrink)) throw ConfigError("shrink must be a non-negative number");
  if (matrix.empty()) throw DataError("cannot compute similarities on an empty matrix");

  // Rows of `profiles` are the entity profiles; rows of `transposed` list, for
  // each profile coordinate, the entities touching it.
  const SparseMatrix profiles = axis == Axis::user ? matrix.ratings() : SparseMatrix(matrix.ratings().transpose());
  const SparseMatrix transposed = profiles.transpose();
  const Index n = profiles.rows();
  if (k < 0 || k >= n) {
    throw ConfigError("cannot keep " + std::to_string(k) + " neighbors among " + std::to_string(n) + " entities");
  }

  std::vector<double> norms(n);
  for (Index x = 0; x < n; ++x) norms[x] = std::sqrt(profiles.row(x).squaredNorm());

  std::vector<std::vector<Candidate>> rows(n);
  parallel_for(0, n, [&](Index lo, Index hi) {
    std::vector<double> dots(n, 0.0);
    std::vector<char> marked(n, 0);
    std::vector<int> touched;
    std::vector<Candidate> candidates;
    for (Index x = lo; x < hi; ++x) {
      touched.clear();
      for (SparseMatrix::InnerIterator a(profiles, x); a; ++a) {
        for (SparseMatrix::InnerIterator b(transposed, a.index()); b; ++b) {
          if (b.index() == x) continue;
          if (!marked[b.index()]) marked[b.index()] = 1, touched.push_back(b.index());
          dots[b.index()] += a.value() * b.value();
        }
      }
      candidates.clear();
      for (int y : touched) {
        const double w = dots[y] / (norms[x] * norms[y] + shrink);
        if (w > 0 && std::isfinite(w)) candidates.push_back({w, y});
      }
      for (int y : touched) dots[y] = 0.0, marked[y] = 0;

      const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(), ranks_before);
      candidates.resize(keep);
      candidates.push_back({1.0, static_cast<int>(x)});
      std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
      rows[x] = candidates;
    }
  });

  std::vector<Eigen::Triplet<double, int>> triplets;
  for (Index x = 0; x < n; ++x) {
    for (const auto& c : rows[x]) triplets.emplace_back(static_cast<int>(x), c.id, c.weight);
  }
  SimilarityMatrix s{SparseMatrix(n, n), k};
  s.weights.setFromTriplets(triplets.begin(), triplets.end());
  s.weights.makeCompressed();
  return s;
}

SimilarityMatrix identity_similarity(Index n) {
  if (n < 1) throw ConfigError("identity similarity needs n >= 1");
  SimilarityMatrix s{SparseMatrix(n, n), 0};
  s.weights.setIdentity();
  s.weights.makeCompressed();
  return s;
}

std::string similarity_cache_key(Axis axis, Index k, double shrink, std::uint64_t dataset_hash) {
  Fnv1a h;
  h.add(to_string(axis)).add(static_cast<std::uint64_t>(k)).add(shrink).add(dataset_hash);
  return to_string(axis) + "_k" + std::to_string(k) + "_" + to_hex(h.value());
}

void write_similarity(const std::filesystem::path& path, const SimilarityMatrix& s) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# n=" << s.size() << " k=" << s.k << '\n';
  for (Index r = 0; r < s.size(); ++r) {
    for (SparseMatrix::InnerIterator it(s.weights, r); it; ++it) {
      out << r << ',' << it.index() << ',' << format_double(it.value()) << '\n';
    }
  }
}

SimilarityMatrix read_similarity(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open similarity file " + path.string());
  std::string line;
  Index n = 0, k = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "# n=%td k=%td", &n, &k) != 2 || n < 1) {
    throw DataError(path.string() + ": bad similarity header");
  }
  std::vector<Eigen::Triplet<double, int>> triplets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    int r = 0, c = 0;
    double w = 0;
    auto a = std::from_chars(p, end, r);
    bool ok = a.ec == std::errc() && a.ptr < end && *a.ptr == ',';
    if (ok) {
      auto b = std::from_chars(a.ptr + 1, end, c);
      ok = b.ec == std::errc() && b.ptr < end && *b.ptr == ',';
      if (ok) {
        auto d = std::from_chars(b.ptr + 1, end, w);
        ok = d.ec == std::errc() && d.ptr == end;
      }
    }
    if (!ok || r < 0 || r >= n || c < 0 || c >= n) throw DataError(path.string() + ": malformed triple '" + line + "'");
    triplets.emplace_back(r, c, w);
  }
  SimilarityMatrix s{SparseMatrix(n, n), k};
  s.weights.setFromTriplets(triplets.begin(), triplets.end());
  s.weights.makeCompressed();
  return s;
}

SimilarityMatrix cached_similarity(const std::filesystem::path& dir, const InteractionMatrix& matrix, Axis axis,
                                   Index k, double shrink, std::string* key_out) {
  const Index n = axis == Axis::user ? matrix.n_users() : matrix.n_items();
  if (k == 0) {
    if (key_out) *key_out = "identity";
    return identity_similarity(n);
  }
  const auto key = similarity_cache_key(axis, k, shrink, matrix.content_hash());
  if (key_out) *key_out = key;
  const auto path = dir / (key + ".csv");
  if (std::filesystem::exists(path)) return read_similarity(path);
  auto s = cosine_topk(matrix, axis, k, shrink);
  write_similarity(path, s);
  return s;
}

}  // namespace nnmf
