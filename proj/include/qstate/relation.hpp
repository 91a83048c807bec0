#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qstate {

/// Fully qualified attribute, e.g. `title.production_year`.
struct ColumnRef {
  std::string relation;
  std::string attribute;

  auto operator<=>(const ColumnRef&) const = default;
  std::string to_string() const { return relation + "." + attribute; }
  /// Parses `rel.att`; throws SchemaError when there is no dot.
  static ColumnRef parse(std::string_view text);
};

/// Equi-join predicate `left = right`. Orientation carries no meaning.
struct JoinPredicate {
  ColumnRef left;
  ColumnRef right;

  auto operator<=>(const JoinPredicate&) const = default;
  bool same_as(const JoinPredicate& other) const;
  bool touches(std::string_view relation) const;
  /// The endpoint on `relation`; ContractViolation if not touched.
  const ColumnRef& side(std::string_view relation) const;
  /// The endpoint on the other relation.
  const ColumnRef& opposite(std::string_view relation) const;
  std::string to_string() const { return left.to_string() + " = " + right.to_string(); }
};

struct Column {
  std::string name;
  std::vector<double> data;
  /// Non-empty for dictionary-encoded columns: code i decodes to dictionary[i].
  std::vector<std::string> dictionary;
  bool operator==(const Column&) const = default;
};

/// Immutable in-memory columnar table.
class Relation {
 public:
  Relation() = default;
  Relation(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  std::size_t row_count() const { return row_count_; }
  std::span<const Column> columns() const { return columns_; }
  std::optional<std::size_t> column_index(std::string_view attribute) const;
  bool has_column(std::string_view attribute) const { return column_index(attribute).has_value(); }
  /// Throws SchemaError for unknown attributes.
  const Column& column(std::string_view attribute) const;

  bool operator==(const Relation&) const = default;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

/// A set of relations plus the declared join-key pairs.
class Database {
 public:
  Database() = default;
  Database(std::vector<Relation> relations, std::vector<JoinPredicate> join_keys);

  std::span<const Relation> relations() const { return relations_; }
  std::span<const JoinPredicate> join_keys() const { return join_keys_; }
  const Relation* find(std::string_view name) const;
  /// Throws SchemaError for unknown relations.
  const Relation& relation(std::string_view name) const;
  std::optional<std::size_t> relation_index(std::string_view name) const;
  /// Throws SchemaError if the relation or attribute does not exist.
  const Column& column(const ColumnRef& ref) const;

 private:
  std::vector<Relation> relations_;
  std::vector<JoinPredicate> join_keys_;
};

enum class AttributeKind { automatic, numeric, categorical };

struct AttributeDecl {
  std::string name;
  AttributeKind kind = AttributeKind::automatic;
};

/// Loads a header-first, comma-separated file. An empty schema loads every column.
/// Categorical columns (declared, or non-numeric under `automatic`) are
/// dictionary-encoded by first occurrence.
Relation load_csv(const std::filesystem::path& path, std::string name,
                  std::span<const AttributeDecl> schema = {});
void save_csv(const Relation& relation, const std::filesystem::path& path);

/// Directory layout: `schema.json` plus one CSV per relation.
Database load_database(const std::filesystem::path& dir);
void save_database(const Database& db, const std::filesystem::path& dir);

// --- synthetic data -------------------------------------------------------

enum class ColumnRule {
  uniform,      ///< integers uniform in [low, high]
  zipf,         ///< low + rank, P(rank) ~ 1/(rank+1)^s over `values` ranks
  functional,   ///< round(scale * source + offset) + uniform integer noise in [-noise, noise]
  foreign_key,  ///< values of `reference`, rows chosen Zipf(s) by row position (s = 0: uniform)
  sequence,     ///< low, low+1, ... (primary keys)
};

struct ColumnSpec {
  std::string name;
  ColumnRule rule = ColumnRule::uniform;
  double low = 0;
  double high = 999;
  double zipf_s = 1.0;
  std::size_t zipf_values = 100;
  std::string source;  ///< functional: source column in the same relation
  double scale = 1.0;
  double offset = 0.0;
  double noise = 0.0;
  ColumnRef reference;  ///< foreign_key target
};

struct RelationSpec {
  std::string name;
  std::size_t rows = 0;
  std::vector<ColumnSpec> columns;
};

struct SyntheticSpec {
  std::vector<RelationSpec> relations;
  std::vector<JoinPredicate> join_keys;
  std::uint64_t seed = 0;
};

ColumnRule parse_column_rule(std::string_view name);
std::string_view to_string(ColumnRule rule);

/// Deterministic for a fixed seed. Foreign-key columns need `gen_database`.
Relation gen_synthetic(const RelationSpec& spec, std::uint64_t seed);
/// Generates relations in declaration order so foreign keys can reference earlier ones.
Database gen_database(const SyntheticSpec& spec);

}  // namespace qstate
