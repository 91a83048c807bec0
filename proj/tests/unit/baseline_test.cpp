#include <random>

#include "gtest/gtest.h"
#include "qstate/baseline.hpp"
#include "qstate/errors.hpp"
#include "qstate/oracle.hpp"
#include "qstate/util.hpp"
#include "support.hpp"

namespace qstate {
namespace {

using testing::make_relation;

std::vector<double> uniform_column(std::mt19937_64& rng, std::size_t n, int hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = std::uniform_int_distribution<int>(0, hi)(rng);
  return v;
}

class BaselineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(11);
    auto a = uniform_column(rng, 4000, 99);
    auto c = uniform_column(rng, 4000, 99);
    std::vector<double> pk(100), fk = uniform_column(rng, 4000, 99);
    for (int i = 0; i < 100; ++i) pk[i] = i;
    db_ = Database({make_relation("R", {{"a", a}, {"b", a}, {"c", c}, {"fk", fk}}), make_relation("P", {{"id", pk}})},
                   {{{"R", "fk"}, {"P", "id"}}});
    catalog_ = Catalog(db_, 16);
  }

  Database db_;
  Catalog catalog_;
};

TEST_F(BaselineTest, BoundAtMaximumGivesTableSize) {
  BaselineEstimator est(catalog_);
  std::vector<Selection> p{{{"R", "a"}, 99}};
  EXPECT_DOUBLE_EQ(est.estimate_selection("R", p), 4000.0);
  p[0].upper_bound = -1;
  EXPECT_DOUBLE_EQ(est.estimate_selection("R", p), 0.0);
}

TEST_F(BaselineTest, UniformQuarterSelection) {
  BaselineEstimator est(catalog_);
  std::vector<Selection> p{{{"R", "a"}, 24.5}};
  const double truth = static_cast<double>(true_cardinality(db_, {{"R"}, p, {}}));
  EXPECT_NEAR(est.estimate_selection("R", p) / 4000.0, 0.25, 0.02);
  EXPECT_NEAR(est.estimate_selection("R", p), truth, 0.1 * truth);
}

TEST_F(BaselineTest, CorrelatedColumnsAreUnderestimated) {
  BaselineEstimator est(catalog_);
  // b == a, so the true selectivity is 0.5 while independence predicts 0.25
  std::vector<Selection> p{{{"R", "a"}, 49.5}, {{"R", "b"}, 49.5}};
  const double truth = static_cast<double>(true_cardinality(db_, {{"R"}, p, {}}));
  EXPECT_NEAR(truth / 4000.0, 0.5, 0.03);
  EXPECT_NEAR(est.estimate_selection("R", p) / 4000.0, 0.25, 0.02);
}

TEST_F(BaselineTest, KeyForeignKeyJoinGivesForeignKeySide) {
  const auto& pk = catalog_.stats({"P", "id"});
  const auto& fk = catalog_.stats({"R", "fk"});
  EXPECT_DOUBLE_EQ(BaselineEstimator::estimate_join(100, 4000, pk, fk), 4000.0);
  EXPECT_DOUBLE_EQ(BaselineEstimator::estimate_join(0, 4000, pk, fk), 0.0);
  EXPECT_DOUBLE_EQ(BaselineEstimator::estimate_join(100, 0, pk, fk), 0.0);
}

TEST_F(BaselineTest, ZeroDistinctOnBothSidesIsContractViolation) {
  AttributeStats empty;
  EXPECT_THROW(BaselineEstimator::estimate_join(10, 10, empty, empty), ContractViolation);
}

TEST_F(BaselineTest, ForeignPredicateIsSchemaError) {
  BaselineEstimator est(catalog_);
  std::vector<Selection> p{{{"P", "id"}, 3}};
  EXPECT_THROW(est.estimate_selection("R", p), SchemaError);
  std::vector<Selection> q{{{"R", "nope"}, 3}};
  EXPECT_THROW(est.estimate_selection("R", q), SchemaError);
}

TEST_F(BaselineTest, IndependentUniformErrorIsSmall) {
  BaselineEstimator est(catalog_);
  std::mt19937_64 rng(12);
  std::vector<double> errs;
  for (int i = 0; i < 200; ++i) {
    std::vector<Selection> p{{{"R", "a"}, static_cast<double>(std::uniform_int_distribution<int>(10, 99)(rng))},
                             {{"R", "c"}, static_cast<double>(std::uniform_int_distribution<int>(10, 99)(rng))}};
    const double truth = static_cast<double>(true_cardinality(db_, {{"R"}, p, {}}));
    errs.push_back(std::abs(est.estimate_selection("R", p) - truth) / std::max(truth, 1.0));
  }
  EXPECT_LE(median(errs), 1.0 / 16);
}

TEST_F(BaselineTest, EstimatesAreBoundedByCartesianProduct) {
  BaselineEstimator est(catalog_);
  std::mt19937_64 rng(13);
  for (int i = 0; i < 100; ++i) {
    QuerySpec q{{"R", "P"},
                {{{"R", "c"}, static_cast<double>(std::uniform_int_distribution<int>(-5, 105)(rng))},
                 {{"P", "id"}, static_cast<double>(std::uniform_int_distribution<int>(-5, 105)(rng))}},
                {{{"R", "fk"}, {"P", "id"}}}};
    const double e = est.estimate_subquery(q);
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, 4000.0 * 100.0);
  }
}

TEST(HistogramFractionTest, EdgesAndInterpolation) {
  AttributeStats st{.min = 0, .max = 10, .distinct_count = 11, .row_count = 10, .histogram = {0.5, 0.5}};
  EXPECT_EQ(histogram_fraction_below(st, -1), 0.0);
  EXPECT_EQ(histogram_fraction_below(st, 10), 1.0);
  EXPECT_DOUBLE_EQ(histogram_fraction_below(st, 2.5), 0.25);
  EXPECT_DOUBLE_EQ(histogram_fraction_below(st, 7.5), 0.75);
  AttributeStats empty{.histogram = {0, 0}};
  EXPECT_EQ(histogram_fraction_below(empty, 3), 0.0);
}

}  // namespace
}  // namespace qstate
