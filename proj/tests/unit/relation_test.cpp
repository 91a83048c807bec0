#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <unistd.h>

#include "gtest/gtest.h"
#include "qstate/errors.hpp"
#include "qstate/relation.hpp"
#include "support.hpp"

namespace qstate {
namespace {

namespace fs = std::filesystem;

class CsvTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("qstate_csv_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

TEST_F(CsvTest, LoadsNumericColumns) {
  auto rel = load_csv(write("r.csv", "a,b\n1,10\n2,20\n3,30\n"), "R");
  EXPECT_EQ(rel.name(), "R");
  EXPECT_EQ(rel.row_count(), 3u);
  EXPECT_EQ(rel.column("a").data, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(rel.column("b").data, (std::vector<double>{10, 20, 30}));
}

TEST_F(CsvTest, HeaderOnlyGivesEmptyRelation) {
  auto rel = load_csv(write("r.csv", "a,b\n"), "R");
  EXPECT_EQ(rel.row_count(), 0u);
  EXPECT_EQ(rel.columns().size(), 2u);
}

TEST_F(CsvTest, StringsAreDictionaryEncodedByFirstOccurrence) {
  auto rel = load_csv(write("r.csv", "name\nbob\nann\nbob\n"), "R");
  const auto& c = rel.column("name");
  EXPECT_EQ(c.data, (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(c.dictionary, (std::vector<std::string>{"bob", "ann"}));
}

TEST_F(CsvTest, BadNumericValueNamesRowAndColumn) {
  std::vector<AttributeDecl> schema{{"a", AttributeKind::numeric}, {"b", AttributeKind::numeric}};
  try {
    load_csv(write("r.csv", "a,b\n1,2\n3,x\n"), "R", schema);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("row 3, column b"), std::string::npos) << msg;
  }
}

TEST_F(CsvTest, MissingSchemaAttributeIsSchemaError) {
  std::vector<AttributeDecl> schema{{"zzz", AttributeKind::numeric}};
  EXPECT_THROW(load_csv(write("r.csv", "a\n1\n"), "R", schema), SchemaError);
}

TEST_F(CsvTest, DatabaseRoundTrip) {
  std::mt19937_64 rng(3);
  auto db = testing::random_database(rng, 30);
  save_database(db, dir_ / "db");
  auto back = load_database(dir_ / "db");
  ASSERT_EQ(back.relations().size(), db.relations().size());
  for (std::size_t i = 0; i < db.relations().size(); ++i) EXPECT_EQ(back.relations()[i], db.relations()[i]);
  EXPECT_EQ(std::vector<JoinPredicate>(back.join_keys().begin(), back.join_keys().end()),
            std::vector<JoinPredicate>(db.join_keys().begin(), db.join_keys().end()));
}

TEST(RelationTest, RejectsRaggedColumns) {
  EXPECT_THROW(testing::make_relation("R", {{"a", {1, 2}}, {"b", {1}}}), SchemaError);
}

TEST(RelationTest, RejectsDuplicateColumns) {
  EXPECT_THROW(testing::make_relation("R", {{"a", {1}}, {"a", {2}}}), SchemaError);
}

TEST(RelationTest, UnknownNamesAreSchemaErrors) {
  Database db({testing::make_relation("R", {{"a", {1}}})}, {});
  EXPECT_THROW(db.relation("S"), SchemaError);
  EXPECT_THROW(db.column({"R", "b"}), SchemaError);
  EXPECT_THROW(ColumnRef::parse("nodot"), SchemaError);
  EXPECT_EQ(ColumnRef::parse("R.a"), (ColumnRef{"R", "a"}));
}

TEST(RelationTest, JoinKeysMustExist) {
  std::vector<Relation> rels{testing::make_relation("R", {{"a", {1}}})};
  EXPECT_THROW(Database(rels, {{{"R", "a"}, {"S", "b"}}}), SchemaError);
}

TEST(SyntheticTest, FunctionalColumnWithoutNoiseIsExact) {
  RelationSpec spec{"R", 500, {}};
  spec.columns.push_back({.name = "a", .rule = ColumnRule::uniform, .low = 0, .high = 999});
  ColumnSpec b{.name = "b", .rule = ColumnRule::functional};
  b.source = "a";
  spec.columns.push_back(b);
  auto rel = gen_synthetic(spec, 9);
  EXPECT_EQ(rel.column("a").data, rel.column("b").data);
}

TEST(SyntheticTest, DeterministicPerSeed) {
  RelationSpec spec{"R", 200, {}};
  spec.columns.push_back({.name = "a", .rule = ColumnRule::uniform, .low = 0, .high = 50});
  spec.columns.push_back({.name = "z", .rule = ColumnRule::zipf, .low = 0, .zipf_s = 1.0, .zipf_values = 20});
  EXPECT_EQ(gen_synthetic(spec, 5), gen_synthetic(spec, 5));
  EXPECT_NE(gen_synthetic(spec, 5), gen_synthetic(spec, 6));
}

TEST(SyntheticTest, ZipfMostFrequentValueDominates) {
  RelationSpec spec{"R", 1000, {}};
  spec.columns.push_back({.name = "z", .rule = ColumnRule::zipf, .low = 0, .zipf_s = 1.0, .zipf_values = 100});
  auto rel = gen_synthetic(spec, 1);
  std::map<double, int> freq;
  for (double v : rel.column("z").data) ++freq[v];
  int top = 0;
  for (auto& [v, n] : freq) top = std::max(top, n);
  // uniform over 100 values would put about 10 rows on each
  EXPECT_GT(top, 100);
  EXPECT_EQ(freq.begin()->first, 0);
}

TEST(SyntheticTest, ForeignKeysReferenceExistingValues) {
  SyntheticSpec s;
  s.seed = 4;
  s.relations.push_back({"P", 50, {{.name = "id", .rule = ColumnRule::sequence, .low = 100}}});
  ColumnSpec fk{.name = "pid", .rule = ColumnRule::foreign_key, .zipf_s = 1.1};
  fk.reference = {"P", "id"};
  s.relations.push_back({"C", 400, {fk}});
  s.join_keys.push_back({{"P", "id"}, {"C", "pid"}});
  auto db = gen_database(s);
  std::set<double> ids(db.column({"P", "id"}).data.begin(), db.column({"P", "id"}).data.end());
  EXPECT_EQ(ids.size(), 50u);
  for (double v : db.column({"C", "pid"}).data) EXPECT_TRUE(ids.count(v)) << v;
}

TEST(SyntheticTest, UnknownRuleIsConfigError) { EXPECT_THROW(parse_column_rule("gaussian"), ConfigError); }

}  // namespace
}  // namespace qstate
