#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qstate/relation.hpp"

namespace qstate {

/// Ranged filter `column <= upper_bound`.
struct Selection {
  ColumnRef column;
  double upper_bound = 0;

  bool operator==(const Selection&) const = default;
};

/// Conjunctive selection/equi-join query. At most one selection per attribute;
/// join predicates connect distinct member relations and the join graph is connected.
struct QuerySpec {
  std::vector<std::string> relations;
  std::vector<Selection> selections;
  std::vector<JoinPredicate> joins;

  bool operator==(const QuerySpec&) const = default;
  bool empty() const { return relations.empty(); }
  bool contains(std::string_view relation) const;
  std::vector<Selection> selections_on(std::string_view relation) const;
  std::string to_string() const;
};

/// Conjunctive selection over one relation: every pending selection of that relation.
struct SelectionAction {
  std::string relation;
  std::vector<Selection> predicates;

  bool operator==(const SelectionAction&) const = default;
};

struct JoinAction {
  JoinPredicate predicate;

  bool operator==(const JoinAction&) const = default;
};

/// One relational operation a_t.
using Action = std::variant<SelectionAction, JoinAction>;

std::string describe(const Action& action);

/// Checks names against `db` (SchemaError) and structure (ContractViolation).
void validate(const QuerySpec& q, const Database& db);
/// Structural checks only; `require_connected` is false for partial subqueries.
void validate_structure(const QuerySpec& q, bool require_connected = true);
bool join_graph_is_tree(const QuerySpec& q);

/// The operations of `q`: one SelectionAction per relation that carries
/// selections (in relation order), then one JoinAction per join predicate.
std::vector<Action> query_actions(const QuerySpec& q);

/// Left-deep legality with selection pushdown. Given the applied prefix, the
/// legal next operations are
///  - pending selections on relations not yet in the join chain;
///  - pending join predicates with both endpoints' selections consumed that
///    either start the chain (no join applied yet) or connect the chain to
///    exactly one new relation.
/// Requires an acyclic join graph. Result keeps `query_actions` order.
std::vector<Action> legal_next_actions(const QuerySpec& q, std::span<const Action> applied);
/// Throws ContractViolation naming the first illegal step.
void check_legal_prefix(const QuerySpec& q, std::span<const Action> applied);
/// Relations in the join chain after `applied` (query relation order).
std::vector<std::string> joined_relations(const QuerySpec& q, std::span<const Action> applied);

/// Exactly the relations, selections and joins touched by a legal prefix.
QuerySpec subquery_of(const QuerySpec& q, std::span<const Action> applied);

/// The intermediate result produced by the last action of a legal, non-empty
/// prefix: for a selection, the filtered base relation alone; for a join, the
/// whole join chain including the selections pushed below it.
QuerySpec stage_subquery(const QuerySpec& q, std::span<const Action> applied);

}  // namespace qstate
