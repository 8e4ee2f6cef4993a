#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "nnmf/data.hpp"
#include "test_support.hpp"

using namespace nnmf;
using nnmf::testing::TempDir;
using nnmf::testing::write_file;

namespace {

DelimiterSpec comma() { return {",", false}; }

std::set<std::pair<Index, Index>> pairs_of(const InteractionMatrix& m) {
  std::set<std::pair<Index, Index>> out;
  for (const auto& x : m.to_interactions()) out.insert({x.user, x.item});
  return out;
}

double gini(std::vector<Index> counts) {
  std::sort(counts.begin(), counts.end());
  const double n = static_cast<double>(counts.size());
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double weighted = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) weighted += (2.0 * (i + 1) - n - 1) * counts[i];
  return weighted / (n * total);
}

}  // namespace

TEST(LoadInteractions, ParsesAndRemapsInFirstSeenOrder) {
  TempDir dir;
  write_file(dir / "a.csv", "u1,i1,5\nu2,i1,3\n");
  const auto data = load_interactions(dir / "a.csv", comma());
  ASSERT_EQ(data.interactions.size(), 2u);
  EXPECT_EQ(data.n_users(), 2);
  EXPECT_EQ(data.n_items(), 1);
  EXPECT_EQ(data.user_tokens, (std::vector<std::string>{"u1", "u2"}));
  EXPECT_EQ(data.interactions[1], (Interaction{1, 0, 3.0}));
}

TEST(LoadInteractions, DuplicateKeepsLastValue) {
  TempDir dir;
  write_file(dir / "a.csv", "u1,i1,5\nu1,i1,2\n");
  const auto data = load_interactions(dir / "a.csv", comma());
  ASSERT_EQ(data.interactions.size(), 1u);
  EXPECT_EQ(data.interactions[0].value, 2.0);
}

TEST(LoadInteractions, MalformedValueNamesLine) {
  TempDir dir;
  write_file(dir / "a.csv", "u1,i1,abc\n");
  try {
    load_interactions(dir / "a.csv", comma());
    FAIL() << "expected a parse error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos) << e.what();
  }
}

TEST(LoadInteractions, EmptyFileIsAnError) {
  TempDir dir;
  write_file(dir / "a.tsv", "");
  EXPECT_THROW(load_interactions(dir / "a.tsv"), DataError);
}

TEST(LoadInteractions, HeaderAndMultiCharacterDelimiter) {
  TempDir dir;
  write_file(dir / "a.dat", "user::item::rating\n1::10::4\n2::10::5\n1::11::3\n");
  const auto data = load_interactions(dir / "a.dat", {"::", true});
  EXPECT_EQ(data.interactions.size(), 3u);
  EXPECT_EQ(data.n_items(), 2);
}

TEST(LoadInteractions, WriteRoundTripPreservesMultiset) {
  TempDir dir;
  write_file(dir / "a.tsv", "x\tp\t1.5\ny\tq\t2\nx\tq\t-3\ny\tp\t4\n");
  const auto data = load_interactions(dir / "a.tsv");
  write_interactions(dir / "b.tsv", data);
  const auto again = load_interactions(dir / "b.tsv");
  auto key = [](const LoadedInteractions& d) {
    std::multiset<std::tuple<std::string, std::string, double>> s;
    for (const auto& x : d.interactions) s.insert({d.user_tokens[x.user], d.item_tokens[x.item], x.value});
    return s;
  };
  EXPECT_EQ(key(data), key(again));
}

TEST(Binarize, ThresholdKeepsAndSetsToOne) {
  const std::vector<Interaction> ratings{{0, 0, 7}, {0, 1, 5}, {0, 2, 6}};
  const auto kept = binarize(ratings, 6);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0], (Interaction{0, 0, 1}));
  EXPECT_EQ(kept[1], (Interaction{0, 2, 1}));

  const std::vector<Interaction> counts{{0, 0, 1}, {0, 1, 3}};
  EXPECT_EQ(binarize(counts, 1).size(), 2u);

  const std::vector<Interaction> low{{0, 0, 2}, {1, 0, 2}};
  EXPECT_TRUE(binarize(low, 3).empty());
}

TEST(Binarize, IdempotentOnBinaryData) {
  const std::vector<Interaction> xs{{0, 0, 1}, {1, 2, 1}, {2, 1, 1}};
  for (double t : {0.0, 0.5, 1.0}) {
    const auto once = binarize(xs, t);
    EXPECT_EQ(binarize(once, t), once);
  }
}

TEST(CoreFilter, SatisfiedMatrixUnchanged) {
  std::vector<Interaction> xs;
  for (Index u = 0; u < 3; ++u) {
    for (Index i = 0; i < 5; ++i) xs.push_back({u, i, 1});
  }
  const auto m = InteractionMatrix::from_interactions(3, 5, xs);
  // Items have only 3 interactions each, so filter at 3.
  const auto r = core_filter(m, 3);
  EXPECT_EQ(r.matrix.nnz(), 15);
  EXPECT_EQ(r.kept_users.size(), 3u);
}

TEST(CoreFilter, ForcedRemoval) {
  // User 1 has one interaction with item 2, which nobody else touches.
  const std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 1}, {2, 0, 1}, {2, 1, 1}, {1, 2, 1}};
  const auto r = core_filter(InteractionMatrix::from_interactions(3, 3, xs), 2);
  EXPECT_EQ(r.kept_users, (std::vector<Index>{0, 2}));
  EXPECT_EQ(r.kept_items, (std::vector<Index>{0, 1}));
  EXPECT_EQ(r.matrix.nnz(), 4);
}

TEST(CoreFilter, EmptyResultIsAnError) {
  const std::vector<Interaction> xs{{0, 0, 1}};
  EXPECT_THROW(core_filter(InteractionMatrix::from_interactions(1, 1, xs), 2), DataError);
}

TEST(CoreFilter, MatchesBruteForceFixpoint) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto m = nnmf::testing::random_binary(20, 20, 0.2, seed);
    const Index min = 3;
    // Oracle: repeatedly drop rows / columns below min on a dense mask.
    std::vector<std::vector<char>> mask(20, std::vector<char>(20, 0));
    for (const auto& x : m.to_interactions()) mask[x.user][x.item] = 1;
    std::vector<char> user_alive(20, 1), item_alive(20, 1);
    for (bool changed = true; changed;) {
      changed = false;
      for (int u = 0; u < 20; ++u) {
        if (!user_alive[u]) continue;
        int c = 0;
        for (int i = 0; i < 20; ++i) c += mask[u][i] && item_alive[i];
        if (c < min) user_alive[u] = 0, changed = true;
      }
      for (int i = 0; i < 20; ++i) {
        if (!item_alive[i]) continue;
        int c = 0;
        for (int u = 0; u < 20; ++u) c += mask[u][i] && user_alive[u];
        if (c < min) item_alive[i] = 0, changed = true;
      }
    }
    std::set<std::pair<Index, Index>> expected;
    for (int u = 0; u < 20; ++u) {
      for (int i = 0; i < 20; ++i) {
        if (mask[u][i] && user_alive[u] && item_alive[i]) expected.insert({u, i});
      }
    }
    if (expected.empty()) {
      EXPECT_THROW(core_filter(m, min), DataError);
      continue;
    }
    const auto r = core_filter(m, min);
    std::set<std::pair<Index, Index>> got;
    for (const auto& x : r.matrix.to_interactions()) got.insert({r.kept_users[x.user], r.kept_items[x.item]});
    EXPECT_EQ(got, expected) << "seed " << seed;
    // Re-applying is the identity.
    const auto again = core_filter(r.matrix, min);
    EXPECT_EQ(again.matrix.nnz(), r.matrix.nnz());
  }
}

TEST(CoreFilter, SinglePassCanLeaveViolations) {
  // Item 1 is dropped in the first pass, which leaves user 0 with one item.
  const std::vector<Interaction> xs{{0, 0, 1}, {0, 1, 1}, {1, 0, 1}, {1, 2, 1}, {2, 0, 1}, {2, 2, 1}};
  const auto m = InteractionMatrix::from_interactions(3, 3, xs);
  const auto single = core_filter(m, 2, FilterMode::single_pass);
  const auto full = core_filter(m, 2, FilterMode::fixpoint);
  EXPECT_GT(single.matrix.nnz(), full.matrix.nnz());
}

TEST(HoldoutSplit, SizesFollowFloorRule) {
  const auto ten = nnmf::testing::random_binary(1, 10, 1.0, 1);
  auto s = holdout_split(ten, {}, 7);
  EXPECT_EQ(s.train.nnz(), 6);
  EXPECT_EQ(s.validation.nnz(), 2);
  EXPECT_EQ(s.test.nnz(), 2);

  const auto eleven = nnmf::testing::random_binary(1, 11, 1.0, 1);
  s = holdout_split(eleven, {}, 7);
  EXPECT_EQ(s.train.nnz(), 7);
  EXPECT_EQ(s.validation.nnz(), 2);
  EXPECT_EQ(s.test.nnz(), 2);
}

TEST(HoldoutSplit, DeterministicPerSeed) {
  const auto m = nnmf::testing::random_binary(30, 20, 0.3, 3);
  const auto a = holdout_split(m, {}, 11);
  const auto b = holdout_split(m, {}, 11);
  EXPECT_EQ(a.train.to_interactions(), b.train.to_interactions());
  EXPECT_EQ(a.test.to_interactions(), b.test.to_interactions());
  const auto c = holdout_split(m, {}, 12);
  EXPECT_NE(a.test.to_interactions(), c.test.to_interactions());
}

TEST(HoldoutSplit, DisjointAndExhaustive) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto m = nnmf::testing::random_binary(15, 12, 0.1 + 0.02 * static_cast<double>(seed), seed);
    if (m.nnz() < 3) continue;
    const auto s = holdout_split(m, {0.5, 0.3, 0.2}, seed);
    const auto tr = pairs_of(s.train), va = pairs_of(s.validation), te = pairs_of(s.test);
    std::set<std::pair<Index, Index>> all;
    all.insert(tr.begin(), tr.end());
    all.insert(va.begin(), va.end());
    all.insert(te.begin(), te.end());
    EXPECT_EQ(all.size(), tr.size() + va.size() + te.size());
    EXPECT_EQ(all, pairs_of(m));
    EXPECT_EQ(s.train.n_users(), m.n_users());
    EXPECT_EQ(s.test.n_items(), m.n_items());
  }
}

TEST(HoldoutSplit, RejectsTinyInputsAndBadRatios) {
  const auto two = nnmf::testing::random_binary(1, 2, 1.0, 1);
  EXPECT_THROW(holdout_split(two, {}, 1), DataError);
  const auto m = nnmf::testing::random_binary(5, 5, 1.0, 1);
  EXPECT_THROW(holdout_split(m, {0.5, 0.3, 0.3}, 1), ConfigError);
}

TEST(Synthesize, CardinalityAndBinaryValues) {
  const auto m = synthesize_powerlaw(100, 50, 1000, 1.0, 1);
  EXPECT_EQ(m.nnz(), 1000);
  for (const auto& x : m.to_interactions()) EXPECT_EQ(x.value, 1.0);
}

TEST(Synthesize, PopularityCurveNonIncreasingInExpectation) {
  const auto m = synthesize_powerlaw(2000, 50, 20000, 1.0, 1);
  const auto pop = m.item_popularity();
  // Sorting by count reproduces the id order up to sampling noise; the
  // ranked curve itself is non-increasing by construction.
  auto ranked = pop;
  std::sort(ranked.rbegin(), ranked.rend());
  EXPECT_TRUE(std::is_sorted(ranked.rbegin(), ranked.rend()));
  EXPECT_GT(pop.front(), pop.back());
}

TEST(Synthesize, SteeperExponentIsMoreUnequal) {
  const auto steep = synthesize_powerlaw(500, 200, 5000, 1.5, 4);
  const auto flat = synthesize_powerlaw(500, 200, 5000, 0.5, 4);
  EXPECT_GT(gini(steep.item_popularity()), gini(flat.item_popularity()));
}

TEST(Synthesize, DeterministicAndRejectsOverfullDensity) {
  EXPECT_EQ(synthesize_powerlaw(40, 30, 300, 1.0, 9).to_interactions(),
            synthesize_powerlaw(40, 30, 300, 1.0, 9).to_interactions());
  EXPECT_THROW(synthesize_powerlaw(3, 3, 10, 1.0, 1), ConfigError);
}

TEST(MatrixFiles, RoundTrip) {
  TempDir dir;
  const auto m = nnmf::testing::random_binary(9, 7, 0.4, 2);
  write_matrix(dir / "m.tsv", m);
  const auto back = read_matrix(dir / "m.tsv", 9, 7);
  EXPECT_EQ(back.to_interactions(), m.to_interactions());
}

TEST(InteractionMatrix, InvariantsHold) {
  const std::vector<Interaction> xs{{1, 3, 1}, {0, 2, 4}, {1, 0, 2}, {1, 3, 5}};
  const auto m = InteractionMatrix::from_interactions(2, 4, xs);
  EXPECT_EQ(m.nnz(), 3);
  const auto items = m.items_of(1);
  EXPECT_EQ(std::vector<int>(items.begin(), items.end()), (std::vector<int>{0, 3}));
  EXPECT_EQ(m.values_of(1)[1], 5.0);
  EXPECT_THROW(InteractionMatrix::from_interactions(2, 2, std::vector<Interaction>{{0, 2, 1}}), DataError);
}
