#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qstate/query.hpp"
#include "qstate/relation.hpp"

namespace qstate {

constexpr std::size_t kDefaultBuckets = 16;

/// Per-attribute summary. `histogram` holds equi-width bucket frequencies over
/// [min, max]; all zero for an empty relation.
struct AttributeStats {
  double min = 0;
  double max = 0;
  std::size_t distinct_count = 0;
  std::size_t row_count = 0;
  std::vector<double> histogram;

  bool operator==(const AttributeStats&) const = default;
  /// Bucket a value falls into; the maximum lands in the last bucket and a
  /// constant column keeps everything in bucket 0.
  std::size_t bucket_of(double value) const;
};

std::map<std::string, AttributeStats> compute_stats(const Relation& rel, std::size_t buckets);

/// Flat database encoding x0: per attribute [min_norm, max_norm, distinct_norm, hist_0..hist_{B-1}].
struct DatabaseVector {
  std::vector<double> values;
  bool operator==(const DatabaseVector&) const = default;
};

/// Action encoding a_t: per catalog attribute (present_flag, v_norm), then one
/// flag per join predicate of the catalog's predicate set.
struct ActionEncoding {
  std::vector<double> values;
  bool operator==(const ActionEncoding&) const = default;
};

/// Remaining-work vector u_t: per catalog attribute the pending selection's
/// normalized bound (floored at kPendingSelectionFloor), then per join predicate 1 if pending.
struct ContextVector {
  std::vector<double> values;
  bool operator==(const ContextVector&) const = default;
  bool all_zero() const;
  std::size_t nonzero_count() const;
};

/// Smallest value a pending selection slot carries, so that a bound at the
/// attribute minimum is still distinguishable from a consumed slot.
constexpr double kPendingSelectionFloor = 1e-3;

/// Statistics for every attribute of a database and the fixed predicate set:
/// one selection slot per attribute (catalog order) followed by the declared join keys.
class Catalog {
 public:
  Catalog() = default;
  Catalog(const Database& db, std::size_t buckets = kDefaultBuckets);
  /// Builds from precomputed statistics (relation name -> attribute stats).
  Catalog(std::vector<std::string> relation_order, std::map<std::string, std::vector<std::string>> attribute_order,
          std::map<std::string, std::map<std::string, AttributeStats>> stats,
          std::map<std::string, std::size_t> row_counts, std::vector<JoinPredicate> join_keys, std::size_t buckets);

  std::size_t buckets() const { return buckets_; }
  std::span<const ColumnRef> attributes() const { return attributes_; }
  std::span<const JoinPredicate> join_predicates() const { return joins_; }
  std::span<const std::string> relation_names() const { return relations_; }
  std::size_t attribute_count() const { return attributes_.size(); }

  /// Throws SchemaError for unknown attributes / relations.
  const AttributeStats& stats(const ColumnRef& ref) const;
  AttributeStats& mutable_stats(const ColumnRef& ref);
  std::size_t row_count(const std::string& relation) const;
  std::size_t attribute_index(const ColumnRef& ref) const;
  std::optional<std::size_t> find_join(const JoinPredicate& p) const;
  std::optional<std::size_t> relation_index(const std::string& relation) const;

  std::size_t x0_size() const { return attributes_.size() * (3 + buckets_); }
  std::size_t action_size() const { return 2 * attributes_.size() + joins_.size(); }
  std::size_t context_size() const { return attributes_.size() + joins_.size(); }

  /// (v - min) / (max - min) clamped to [0, 1]; a constant domain maps v >= min to 1.
  double normalize_bound(const ColumnRef& ref, double v) const;

 private:
  std::size_t buckets_ = kDefaultBuckets;
  std::vector<std::string> relations_;
  std::vector<ColumnRef> attributes_;
  std::vector<JoinPredicate> joins_;
  std::map<ColumnRef, AttributeStats> stats_;
  std::map<std::string, std::size_t> row_counts_;
};

/// Pure function of the catalog's statistics. min/max are scaled by the global
/// value range over all non-empty attributes; distinct_norm = distinct / rows.
DatabaseVector build_x0(const Catalog& catalog);

/// Throws EncodingError for attributes or join predicates outside the catalog.
ActionEncoding encode_action(const Action& action, const Catalog& catalog);

ContextVector init_context(const QuerySpec& q, const Catalog& catalog);
/// Returns `u` with the action's slot (or slot group) zeroed; ContractViolation
/// if any of those slots is not pending.
ContextVector apply_action(const ContextVector& u, const Action& action, const Catalog& catalog);

}  // namespace qstate
