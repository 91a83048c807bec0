#include "qstate/query.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "qstate/errors.hpp"
#include "qstate/util.hpp"

namespace qstate {

bool QuerySpec::contains(std::string_view relation) const {
  return std::find(relations.begin(), relations.end(), relation) != relations.end();
}

std::vector<Selection> QuerySpec::selections_on(std::string_view relation) const {
  std::vector<Selection> out;
  for (const auto& s : selections)
    if (s.column.relation == relation) out.push_back(s);
  return out;
}

std::string QuerySpec::to_string() const {
  std::string out = "FROM ";
  for (std::size_t i = 0; i < relations.size(); ++i) out += (i ? ", " : "") + relations[i];
  std::string where;
  for (const auto& s : selections)
    where += (where.empty() ? "" : " AND ") + s.column.to_string() + " <= " + format_double(s.upper_bound);
  for (const auto& j : joins) where += (where.empty() ? "" : " AND ") + j.to_string();
  if (!where.empty()) out += " WHERE " + where;
  return out;
}

std::string describe(const Action& action) {
  if (const auto* s = std::get_if<SelectionAction>(&action)) {
    std::string out = "SELECT " + s->relation + " [";
    for (std::size_t i = 0; i < s->predicates.size(); ++i)
      out += (i ? " AND " : "") + s->predicates[i].column.attribute + " <= " +
             format_double(s->predicates[i].upper_bound);
    return out + "]";
  }
  return "JOIN " + std::get<JoinAction>(action).predicate.to_string();
}

namespace {

bool connected(const QuerySpec& q) {
  if (q.relations.empty()) return false;
  std::set<std::string> reached{q.relations.front()};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& j : q.joins) {
      const bool l = reached.count(j.left.relation) > 0;
      const bool r = reached.count(j.right.relation) > 0;
      if (l != r) {
        reached.insert(l ? j.right.relation : j.left.relation);
        grew = true;
      }
    }
  }
  return reached.size() == q.relations.size();
}

}  // namespace

void validate_structure(const QuerySpec& q, bool require_connected) {
  if (q.relations.empty()) {
    if (require_connected) throw ContractViolation("query has no relations");
    if (!q.selections.empty() || !q.joins.empty())
      throw ContractViolation("predicates on a query without relations");
    return;
  }
  std::set<std::string> rels;
  for (const auto& r : q.relations)
    if (!rels.insert(r).second) throw ContractViolation("relation " + r + " listed twice");
  std::set<ColumnRef> filtered;
  for (const auto& s : q.selections) {
    if (!rels.count(s.column.relation))
      throw ContractViolation("selection on " + s.column.to_string() + " outside the query's relations");
    if (!filtered.insert(s.column).second)
      throw ContractViolation("more than one selection on " + s.column.to_string());
  }
  for (std::size_t i = 0; i < q.joins.size(); ++i) {
    const auto& j = q.joins[i];
    if (j.left.relation == j.right.relation)
      throw ContractViolation("join " + j.to_string() + " must reference two distinct relations");
    if (!rels.count(j.left.relation) || !rels.count(j.right.relation))
      throw ContractViolation("join " + j.to_string() + " references a relation outside the query");
    for (std::size_t k = 0; k < i; ++k)
      if (q.joins[k].same_as(j)) throw ContractViolation("duplicate join " + j.to_string());
  }
  if (require_connected && !connected(q))
    throw ContractViolation("join graph of " + q.to_string() + " is not connected");
}

void validate(const QuerySpec& q, const Database& db) {
  for (const auto& r : q.relations) db.relation(r);
  for (const auto& s : q.selections) db.column(s.column);
  for (const auto& j : q.joins) {
    db.column(j.left);
    db.column(j.right);
  }
  validate_structure(q, true);
}

bool join_graph_is_tree(const QuerySpec& q) {
  if (q.relations.empty() || q.joins.size() + 1 != q.relations.size()) return false;
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& j : q.joins)
    if (!pairs.insert(std::minmax(j.left.relation, j.right.relation)).second) return false;
  return connected(q);
}

std::vector<Action> query_actions(const QuerySpec& q) {
  std::vector<Action> out;
  for (const auto& r : q.relations) {
    auto preds = q.selections_on(r);
    if (!preds.empty()) out.emplace_back(SelectionAction{r, std::move(preds)});
  }
  for (const auto& j : q.joins) out.emplace_back(JoinAction{j});
  return out;
}

namespace {

struct PrefixState {
  std::vector<bool> consumed;  // parallel to query_actions(q)
  std::set<std::string> joined;
  bool any_join = false;
};

bool selections_done(const std::vector<Action>& actions, const PrefixState& st,
                     std::string_view relation) {
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (const auto* s = std::get_if<SelectionAction>(&actions[i]); s && s->relation == relation)
      return st.consumed[i];
  return true;
}

bool is_legal(const std::vector<Action>& actions, const PrefixState& st, std::size_t i) {
  if (st.consumed[i]) return false;
  if (const auto* s = std::get_if<SelectionAction>(&actions[i])) return !st.joined.count(s->relation);
  const auto& p = std::get<JoinAction>(actions[i]).predicate;
  if (!selections_done(actions, st, p.left.relation) || !selections_done(actions, st, p.right.relation))
    return false;
  if (!st.any_join) return true;
  return st.joined.count(p.left.relation) + st.joined.count(p.right.relation) == 1;
}

void apply(const std::vector<Action>& actions, PrefixState& st, std::size_t i) {
  st.consumed[i] = true;
  if (const auto* j = std::get_if<JoinAction>(&actions[i])) {
    st.joined.insert(j->predicate.left.relation);
    st.joined.insert(j->predicate.right.relation);
    st.any_join = true;
  }
}

void require_tree(const QuerySpec& q) {
  validate_structure(q, true);
  if (!join_graph_is_tree(q))
    throw ContractViolation("left-deep planning requires an acyclic join graph: " + q.to_string());
}

PrefixState replay(const std::vector<Action>& actions, std::span<const Action> applied) {
  PrefixState st{std::vector<bool>(actions.size(), false), {}, false};
  for (std::size_t step = 0; step < applied.size(); ++step) {
    auto it = std::find(actions.begin(), actions.end(), applied[step]);
    if (it == actions.end())
      throw ContractViolation("step " + std::to_string(step) + ": " + describe(applied[step]) +
                              " is not an operation of the query");
    const auto i = static_cast<std::size_t>(it - actions.begin());
    if (!is_legal(actions, st, i))
      throw ContractViolation("step " + std::to_string(step) + ": " + describe(applied[step]) +
                              " is not legal at this point");
    apply(actions, st, i);
  }
  return st;
}

}  // namespace

std::vector<Action> legal_next_actions(const QuerySpec& q, std::span<const Action> applied) {
  require_tree(q);
  const auto actions = query_actions(q);
  const auto st = replay(actions, applied);
  std::vector<Action> out;
  for (std::size_t i = 0; i < actions.size(); ++i)
    if (is_legal(actions, st, i)) out.push_back(actions[i]);
  return out;
}

void check_legal_prefix(const QuerySpec& q, std::span<const Action> applied) {
  require_tree(q);
  replay(query_actions(q), applied);
}

std::vector<std::string> joined_relations(const QuerySpec& q, std::span<const Action> applied) {
  require_tree(q);
  const auto st = replay(query_actions(q), applied);
  std::vector<std::string> out;
  for (const auto& r : q.relations)
    if (st.joined.count(r)) out.push_back(r);
  return out;
}

QuerySpec subquery_of(const QuerySpec& q, std::span<const Action> applied) {
  check_legal_prefix(q, applied);
  std::set<std::string> touched;
  std::set<std::string> selected;
  std::vector<JoinPredicate> joins;
  for (const auto& a : applied) {
    if (const auto* s = std::get_if<SelectionAction>(&a)) {
      touched.insert(s->relation);
      selected.insert(s->relation);
    } else {
      const auto& p = std::get<JoinAction>(a).predicate;
      touched.insert(p.left.relation);
      touched.insert(p.right.relation);
      joins.push_back(p);
    }
  }
  QuerySpec out;
  for (const auto& r : q.relations)
    if (touched.count(r)) out.relations.push_back(r);
  for (const auto& s : q.selections)
    if (selected.count(s.column.relation)) out.selections.push_back(s);
  for (const auto& j : q.joins)
    if (std::find(joins.begin(), joins.end(), j) != joins.end()) out.joins.push_back(j);
  return out;
}

QuerySpec stage_subquery(const QuerySpec& q, std::span<const Action> applied) {
  if (applied.empty()) throw ContractViolation("stage_subquery needs at least one applied action");
  const auto sub = subquery_of(q, applied);
  if (const auto* s = std::get_if<SelectionAction>(&applied.back()))
    return QuerySpec{{s->relation}, q.selections_on(s->relation), {}};
  QuerySpec chain;
  const auto joined = joined_relations(q, applied);
  chain.relations = joined;
  for (const auto& s : sub.selections)
    if (std::find(joined.begin(), joined.end(), s.column.relation) != joined.end()) chain.selections.push_back(s);
  chain.joins = sub.joins;
  return chain;
}

}  // namespace qstate
