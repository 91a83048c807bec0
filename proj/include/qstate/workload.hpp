#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qstate/catalog.hpp"
#include "qstate/model.hpp"
#include "qstate/oracle.hpp"
#include "qstate/query.hpp"
#include "qstate/relation.hpp"

namespace qstate {

enum class WorkloadKind {
  selection,       ///< one conjunctive selection over m attributes of `relation`
  selection_join,  ///< that selection followed by one join to `join_with`
  join_tree,       ///< connected k-relation queries, random selections, random legal order
};

WorkloadKind parse_workload_kind(std::string_view name);
std::string_view to_string(WorkloadKind k);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::selection;
  std::string relation;
  /// Selection attributes; empty means the first `m` attributes of `relation`.
  std::vector<std::string> attributes;
  std::size_t m = 2;
  /// selection_join partner; empty picks the first declared join key touching `relation`.
  std::string join_with;
  /// join_tree: relations per query and chance that a non-key attribute gets a selection.
  std::size_t relations_per_query = 3;
  double selection_probability = 0.5;
  std::size_t count = 1000;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  /// ConfigError naming the offending field.
  void validate() const;
  std::size_t train_count() const;
};

struct Workload {
  std::vector<QuerySpec> queries;
  std::vector<std::vector<Action>> sequences;
  std::vector<SequenceExample> examples;
  std::size_t train_count = 0;

  std::span<const SequenceExample> train() const { return std::span(examples).first(train_count); }
  std::span<const SequenceExample> test() const { return std::span(examples).subspan(train_count); }
};

/// Upper bounds are drawn uniformly from each attribute's set of observed values.
/// The first `train_count()` queries form the training split, the rest the test split.
Workload gen_workload(const WorkloadSpec& spec, const Database& db, const Catalog& catalog, CardinalityCache& oracle);

/// Only the queries and action sequences, without oracle labels.
Workload gen_queries(const WorkloadSpec& spec, const Database& db);

}  // namespace qstate
