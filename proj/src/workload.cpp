#include "qstate/workload.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "qstate/errors.hpp"

namespace qstate {

WorkloadKind parse_workload_kind(std::string_view name) {
  if (name == "selection") return WorkloadKind::selection;
  if (name == "selection+join" || name == "selection_join") return WorkloadKind::selection_join;
  if (name == "join-tree" || name == "join_tree") return WorkloadKind::join_tree;
  throw ConfigError("workload.kind: unknown kind '" + std::string(name) + "'");
}

std::string_view to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::selection: return "selection";
    case WorkloadKind::selection_join: return "selection+join";
    case WorkloadKind::join_tree: return "join-tree";
  }
  return "?";
}

void WorkloadSpec::validate() const {
  if (count == 0) throw ConfigError("workload.count must be positive");
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("workload.train_fraction must lie in (0, 1)");
  if (kind != WorkloadKind::join_tree) {
    if (relation.empty()) throw ConfigError("workload.relation is required");
    if (attributes.empty() && m == 0) throw ConfigError("workload.m must be at least 1");
  } else {
    if (relations_per_query == 0) throw ConfigError("workload.relations_per_query must be at least 1");
    if (!(selection_probability >= 0 && selection_probability <= 1))
      throw ConfigError("workload.selection_probability must lie in [0, 1]");
  }
}

std::size_t WorkloadSpec::train_count() const {
  return static_cast<std::size_t>(std::floor(static_cast<double>(count) * train_fraction + 1e-9));
}

namespace {

class BoundSampler {
 public:
  explicit BoundSampler(const Database& db) : db_(&db) {}

  double draw(const ColumnRef& ref, std::mt19937_64& rng) {
    auto it = values_.find(ref);
    if (it == values_.end()) {
      const auto& data = db_->column(ref).data;
      std::set<double> distinct(data.begin(), data.end());
      it = values_.emplace(ref, std::vector<double>(distinct.begin(), distinct.end())).first;
    }
    const auto& v = it->second;
    if (v.empty()) throw ConfigError("workload: attribute " + ref.to_string() + " has no values to sample bounds from");
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  }

 private:
  const Database* db_;
  std::map<ColumnRef, std::vector<double>> values_;
};

std::vector<std::string> selection_attributes(const WorkloadSpec& spec, const Relation& rel) {
  if (!spec.attributes.empty()) {
    for (const auto& a : spec.attributes)
      if (!rel.has_column(a)) throw ConfigError("workload.attributes: " + rel.name() + " has no attribute " + a);
    return spec.attributes;
  }
  if (spec.m > rel.columns().size())
    throw ConfigError("workload.m: " + std::to_string(spec.m) + " exceeds the " +
                      std::to_string(rel.columns().size()) + " attributes of " + rel.name());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec.m; ++i) out.push_back(rel.columns()[i].name);
  return out;
}

JoinPredicate partner_join(const WorkloadSpec& spec, const Database& db) {
  for (const auto& j : db.join_keys()) {
    if (!j.touches(spec.relation)) continue;
    const auto other = j.left.relation == spec.relation ? j.right.relation : j.left.relation;
    if (other == spec.relation) continue;
    if (spec.join_with.empty() || other == spec.join_with) return j;
  }
  throw ConfigError("workload.join_with: no declared join key connects " + spec.relation +
                    (spec.join_with.empty() ? std::string() : " and " + spec.join_with));
}

std::set<std::string> key_attributes(const Database& db) {
  std::set<std::string> keys;
  for (const auto& j : db.join_keys()) {
    keys.insert(j.left.to_string());
    keys.insert(j.right.to_string());
  }
  return keys;
}

// Random connected relation subset grown edge by edge; the growth edges become the joins.
QuerySpec random_tree_query(const Database& db, std::size_t k, std::mt19937_64& rng) {
  const auto rels = db.relations();
  if (k > rels.size())
    throw ConfigError("workload.relations_per_query: " + std::to_string(k) + " exceeds the " +
                      std::to_string(rels.size()) + " relations of the database");
  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::set<std::string> chosen{rels[std::uniform_int_distribution<std::size_t>(0, rels.size() - 1)(rng)].name()};
    std::vector<JoinPredicate> joins;
    while (chosen.size() < k) {
      std::vector<JoinPredicate> frontier;
      for (const auto& j : db.join_keys())
        if (chosen.count(j.left.relation) != chosen.count(j.right.relation)) frontier.push_back(j);
      if (frontier.empty()) break;
      const auto& e = frontier[std::uniform_int_distribution<std::size_t>(0, frontier.size() - 1)(rng)];
      chosen.insert(e.left.relation);
      chosen.insert(e.right.relation);
      joins.push_back(e);
    }
    if (chosen.size() < k) continue;
    QuerySpec q;
    for (const auto& r : rels)
      if (chosen.count(r.name())) q.relations.push_back(r.name());
    q.joins = std::move(joins);
    return q;
  }
  throw ConfigError("workload.relations_per_query: the join graph has no connected subset of " + std::to_string(k) +
                    " relations");
}

}  // namespace

Workload gen_queries(const WorkloadSpec& spec, const Database& db) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  BoundSampler bounds(db);
  Workload w;
  w.train_count = spec.train_count();

  if (spec.kind == WorkloadKind::join_tree) {
    const auto keys = key_attributes(db);
    std::bernoulli_distribution pick(spec.selection_probability);
    for (std::size_t i = 0; i < spec.count; ++i) {
      auto q = random_tree_query(db, spec.relations_per_query, rng);
      for (const auto& r : q.relations)
        for (const auto& col : db.relation(r).columns()) {
          ColumnRef ref{r, col.name};
          if (keys.count(ref.to_string())) continue;
          if (pick(rng)) q.selections.push_back({ref, bounds.draw(ref, rng)});
        }
      std::vector<Action> seq;
      for (auto legal = legal_next_actions(q, seq); !legal.empty(); legal = legal_next_actions(q, seq))
        seq.push_back(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
      w.queries.push_back(std::move(q));
      w.sequences.push_back(std::move(seq));
    }
    return w;
  }

  const auto& rel = db.relation(spec.relation);
  const auto attrs = selection_attributes(spec, rel);
  std::optional<JoinPredicate> join;
  if (spec.kind == WorkloadKind::selection_join) join = partner_join(spec, db);

  for (std::size_t i = 0; i < spec.count; ++i) {
    QuerySpec q;
    q.relations.push_back(spec.relation);
    for (const auto& a : attrs) {
      ColumnRef ref{spec.relation, a};
      q.selections.push_back({ref, bounds.draw(ref, rng)});
    }
    std::vector<Action> seq{SelectionAction{spec.relation, q.selections}};
    if (join) {
      q.relations.push_back(join->left.relation == spec.relation ? join->right.relation : join->left.relation);
      q.joins.push_back(*join);
      seq.emplace_back(JoinAction{*join});
    }
    w.queries.push_back(std::move(q));
    w.sequences.push_back(std::move(seq));
  }
  return w;
}

Workload gen_workload(const WorkloadSpec& spec, const Database& db, const Catalog& catalog, CardinalityCache& oracle) {
  auto w = gen_queries(spec, db);
  w.examples.reserve(w.queries.size());
  for (std::size_t i = 0; i < w.queries.size(); ++i)
    w.examples.push_back(make_example(w.queries[i], w.sequences[i], catalog, oracle));
  return w;
}

}  // namespace qstate
