#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gtest/gtest.h"
#include "qstate/catalog.hpp"
#include "qstate/errors.hpp"
#include "support.hpp"

namespace qstate {
namespace {

using testing::make_relation;

Database two_table_db() {
  std::vector<Relation> rels{make_relation("R", {{"a", {0, 1, 2, 3, 4, 5, 6, 7}}, {"k", {1, 1, 1, 1, 2, 2, 3, 3}}}),
                             make_relation("S", {{"k", {1, 2, 3}}, {"b", {10, 20, 30}}})};
  return Database(std::move(rels), {{{"R", "k"}, {"S", "k"}}});
}

TEST(StatsTest, BasicSummary) {
  auto st = compute_stats(make_relation("R", {{"a", {3, 1, 4, 1, 5}}}), 4).at("a");
  EXPECT_EQ(st.min, 1);
  EXPECT_EQ(st.max, 5);
  EXPECT_EQ(st.distinct_count, 4u);
  EXPECT_EQ(st.row_count, 5u);
  // width 1 buckets over [1,5]: {1,1} {} {3} {4,5}
  EXPECT_EQ(st.histogram, (std::vector<double>{0.4, 0.0, 0.2, 0.4}));
}

TEST(StatsTest, EmptyRelationHasZeroHistogram) {
  auto st = compute_stats(make_relation("R", {{"a", {}}}), 8).at("a");
  EXPECT_EQ(st.row_count, 0u);
  EXPECT_EQ(st.distinct_count, 0u);
  EXPECT_EQ(st.histogram, std::vector<double>(8, 0.0));
}

TEST(StatsTest, ConstantColumnFillsFirstBucket) {
  auto st = compute_stats(make_relation("R", {{"a", {7, 7, 7}}}), 4).at("a");
  EXPECT_EQ(st.histogram, (std::vector<double>{1, 0, 0, 0}));
}

TEST(StatsTest, ZeroBucketsIsConfigError) {
  EXPECT_THROW(compute_stats(make_relation("R", {{"a", {1}}}), 0), ConfigError);
}

TEST(StatsTest, SkewedColumnMatchesHandBinning) {
  std::mt19937_64 rng(5);
  std::vector<double> v(2000);
  // geometric-ish skew on 0..63
  for (auto& x : v) x = std::min(63.0, std::floor(-8.0 * std::log(1.0 - std::uniform_real_distribution<>(0, 1)(rng))));
  auto st = compute_stats(make_relation("R", {{"a", v}}), 16).at("a");
  std::vector<double> expect(16, 0.0);
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  for (double x : v) {
    auto k = x >= hi ? 15 : static_cast<std::size_t>((x - lo) / (hi - lo) * 16);
    expect[k] += 1.0 / 2000;
  }
  for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(st.histogram[k], expect[k], 1e-12) << k;
}

TEST(StatsTest, HistogramsSumToOneAndValuesStayInRange) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    auto db = testing::random_database(rng, 80);
    for (const auto& rel : db.relations()) {
      if (rel.row_count() == 0) continue;
      for (const auto& [name, st] : compute_stats(rel, 1 + t % 10)) {
        EXPECT_NEAR(std::accumulate(st.histogram.begin(), st.histogram.end(), 0.0), 1.0, 1e-9);
        for (double x : rel.column(name).data) {
          EXPECT_LE(st.min, x);
          EXPECT_GE(st.max, x);
        }
      }
    }
  }
}

TEST(CatalogTest, X0LayoutAndSpotValues) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  auto x0 = build_x0(cat);
  ASSERT_EQ(x0.values.size(), cat.x0_size());
  EXPECT_EQ(x0.values.size(), 4u * (3 + 4));
  // global range [0, 30]; R.a spans 0..7 with 8 distinct over 8 rows
  EXPECT_DOUBLE_EQ(x0.values[0], 0.0);
  EXPECT_DOUBLE_EQ(x0.values[1], 7.0 / 30);
  EXPECT_DOUBLE_EQ(x0.values[2], 1.0);
  // attribute order: R.a, R.k, S.k, S.b
  const std::size_t sb = 3 * 7;
  EXPECT_DOUBLE_EQ(x0.values[sb], 10.0 / 30);
  EXPECT_DOUBLE_EQ(x0.values[sb + 1], 1.0);
  EXPECT_DOUBLE_EQ(x0.values[7 + 2], 3.0 / 8);  // R.k distinct_norm
}

TEST(CatalogTest, X0ChangesOnlyInTheEditedHistogram) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  auto before = build_x0(cat);
  auto& st = cat.mutable_stats({"S", "k"});
  st.histogram = {0.5, 0.5, 0.0, 0.0};
  auto after = build_x0(cat);
  const std::size_t block = 2 * 7;
  for (std::size_t i = 0; i < before.values.size(); ++i) {
    if (i >= block + 3 && i < block + 7) continue;
    EXPECT_EQ(before.values[i], after.values[i]) << i;
  }
  EXPECT_EQ(after.values[block + 3], 0.5);
}

TEST(CatalogTest, X0IsDeterministic) {
  auto db = two_table_db();
  EXPECT_EQ(build_x0(Catalog(db, 8)), build_x0(Catalog(db, 8)));
}

TEST(EncodingTest, SelectionAndJoinSlots) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  ASSERT_EQ(cat.action_size(), 2u * 4 + 1);
  auto sel = encode_action(SelectionAction{"R", {{{"R", "a"}, 3.5}}}, cat);
  EXPECT_EQ(sel.values, (std::vector<double>{1, 0.5, 0, 0, 0, 0, 0, 0, 0}));
  auto join = encode_action(JoinAction{{{"S", "k"}, {"R", "k"}}}, cat);
  EXPECT_EQ(join.values, (std::vector<double>{0, 0, 0, 0, 0, 0, 0, 0, 1}));
}

TEST(EncodingTest, ConjunctiveSelectionSetsEveryAttribute) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  auto enc = encode_action(SelectionAction{"R", {{{"R", "a"}, 7}, {{"R", "k"}, 1}}}, cat);
  EXPECT_EQ(enc.values, (std::vector<double>{1, 1, 1, 0, 0, 0, 0, 0, 0}));
}

TEST(EncodingTest, UnknownAttributeOrJoinIsEncodingError) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  EXPECT_THROW(encode_action(SelectionAction{"R", {{{"R", "zz"}, 1}}}, cat), EncodingError);
  EXPECT_THROW(encode_action(JoinAction{{{"R", "a"}, {"S", "b"}}}, cat), EncodingError);
}

TEST(EncodingTest, DistinctActionsEncodeDistinctly) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  std::vector<Action> actions{SelectionAction{"R", {{{"R", "a"}, 1}}}, SelectionAction{"R", {{{"R", "a"}, 2}}},
                              SelectionAction{"R", {{{"R", "k"}, 2}}}, SelectionAction{"S", {{{"S", "b"}, 20}}},
                              JoinAction{{{"R", "k"}, {"S", "k"}}}};
  for (std::size_t i = 0; i < actions.size(); ++i)
    for (std::size_t j = i + 1; j < actions.size(); ++j)
      EXPECT_NE(encode_action(actions[i], cat), encode_action(actions[j], cat)) << i << " " << j;
}

TEST(ContextTest, InitAndConsume) {
  auto db = two_table_db();
  Catalog cat(db, 4);
  QuerySpec q{{"R", "S"}, {{{"R", "a"}, 0}, {{"S", "b"}, 30}}, {{{"R", "k"}, {"S", "k"}}}};
  auto u = init_context(q, cat);
  // R.a bound at its minimum still reads as pending
  EXPECT_EQ(u.values, (std::vector<double>{kPendingSelectionFloor, 0, 0, 1, 1}));
  auto u1 = apply_action(u, SelectionAction{"R", {q.selections[0]}}, cat);
  EXPECT_EQ(u1.values, (std::vector<double>{0, 0, 0, 1, 1}));
  EXPECT_THROW(apply_action(u1, SelectionAction{"R", {q.selections[0]}}, cat), ContractViolation);
}

TEST(ContextTest, AnyLegalOrderDrainsTheContext) {
  std::mt19937_64 rng(8);
  auto db = testing::random_database(rng, 40);
  Catalog cat(db, 8);
  for (int i = 0; i < 50; ++i) {
    auto q = testing::random_query(rng);
    auto u = init_context(q, cat);
    std::vector<Action> applied;
    for (auto legal = legal_next_actions(q, applied); !legal.empty(); legal = legal_next_actions(q, applied)) {
      const auto& a = legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
      auto next = apply_action(u, a, cat);
      EXPECT_LT(next.nonzero_count(), u.nonzero_count());
      u = next;
      applied.push_back(a);
    }
    EXPECT_TRUE(u.all_zero()) << q.to_string();
  }
}

}  // namespace
}  // namespace qstate
