#pragma once

// Helpers shared by the unit and acceptance tests. Nothing here calls into the
// oracle or featurizer under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qstate/query.hpp"
#include "qstate/relation.hpp"

namespace qstate::testing {

inline Relation make_relation(std::string name, std::vector<std::pair<std::string, std::vector<double>>> cols) {
  std::vector<Column> columns;
  for (auto& [n, d] : cols) columns.push_back(Column{n, std::move(d), {}});
  return Relation(std::move(name), std::move(columns));
}

/// Literal nested loops over every combination of rows, one loop per relation.
/// A combination is abandoned as soon as an already-bound predicate fails.
inline std::uint64_t nested_loop_count(const Database& db, const QuerySpec& q) {
  const auto n = q.relations.size();
  std::vector<const Relation*> rels;
  for (const auto& r : q.relations) rels.push_back(&db.relation(r));
  auto pos = [&](const std::string& r) {
    for (std::size_t i = 0; i < n; ++i)
      if (q.relations[i] == r) return i;
    return n;
  };
  std::vector<std::size_t> row(n, 0);
  std::uint64_t count = 0;
  std::function<void(std::size_t)> loop = [&](std::size_t depth) {
    if (depth == n) {
      ++count;
      return;
    }
    for (std::size_t r = 0; r < rels[depth]->row_count(); ++r) {
      row[depth] = r;
      bool ok = true;
      for (const auto& s : q.selections)
        if (pos(s.column.relation) == depth && !(rels[depth]->column(s.column.attribute).data[r] <= s.upper_bound))
          ok = false;
      for (const auto& j : q.joins) {
        const auto a = pos(j.left.relation), b = pos(j.right.relation);
        if (std::max(a, b) != depth) continue;
        if (rels[a]->column(j.left.attribute).data[row[a]] != rels[b]->column(j.right.attribute).data[row[b]])
          ok = false;
      }
      if (ok) loop(depth + 1);
    }
  };
  loop(0);
  return count;
}

/// Three relations R0(k, a, b), R1(k, f, c), R2(f, d) joined R0.k = R1.k and
/// R1.f = R2.f with small key domains so that joins fan out.
inline Database random_database(std::mt19937_64& rng, std::size_t max_rows) {
  std::uniform_int_distribution<std::size_t> rows(0, max_rows);
  std::uniform_int_distribution<int> key(0, 9), val(0, 49);
  auto col = [&](std::size_t n, std::uniform_int_distribution<int>& d) {
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
  };
  const auto n0 = rows(rng), n1 = rows(rng), n2 = rows(rng);
  std::vector<Relation> rels;
  rels.push_back(make_relation("R0", {{"k", col(n0, key)}, {"a", col(n0, val)}, {"b", col(n0, val)}}));
  rels.push_back(make_relation("R1", {{"k", col(n1, key)}, {"f", col(n1, key)}, {"c", col(n1, val)}}));
  rels.push_back(make_relation("R2", {{"f", col(n2, key)}, {"d", col(n2, val)}}));
  std::vector<JoinPredicate> keys{{{"R0", "k"}, {"R1", "k"}}, {{"R1", "f"}, {"R2", "f"}}};
  return Database(std::move(rels), std::move(keys));
}

/// A random connected query over `random_database`, with random upper bounds.
inline QuerySpec random_query(std::mt19937_64& rng) {
  static const std::vector<std::vector<std::string>> shapes{{"R0"}, {"R1"}, {"R2"}, {"R0", "R1"}, {"R1", "R2"},
                                                          {"R0", "R1", "R2"}};
  static const std::vector<std::pair<std::string, std::vector<std::string>>> attrs{
      {"R0", {"k", "a", "b"}}, {"R1", {"k", "f", "c"}}, {"R2", {"f", "d"}}};
  QuerySpec q;
  q.relations = shapes[std::uniform_int_distribution<std::size_t>(0, shapes.size() - 1)(rng)];
  std::bernoulli_distribution coin(0.4);
  std::uniform_int_distribution<int> bound(-1, 50);
  for (const auto& [rel, names] : attrs) {
    if (std::find(q.relations.begin(), q.relations.end(), rel) == q.relations.end()) continue;
    for (const auto& a : names)
      if (coin(rng)) q.selections.push_back({{rel, a}, static_cast<double>(bound(rng))});
  }
  auto has = [&](const char* r) { return std::find(q.relations.begin(), q.relations.end(), r) != q.relations.end(); };
  if (has("R0") && has("R1")) q.joins.push_back({{"R0", "k"}, {"R1", "k"}});
  if (has("R1") && has("R2")) q.joins.push_back({{"R1", "f"}, {"R2", "f"}});
  return q;
}

/// R(k) = {1,1,2}; S(k,f) = {(1,1),(2,1),(2,2)}; T(f) = {1,2,2,2}, chained R.k = S.k, S.f = T.f.
/// |R join S| = 4, |S join T| = 5, |R join S join T| = 6, so the two-join planning
/// problem has returns -log10(5) - log10(7) (R-S first) and -log10(6) - log10(7) (S-T first).
inline Database hand_mdp_database() {
  std::vector<Relation> rels{make_relation("R", {{"k", {1, 1, 2}}}),
                             make_relation("S", {{"k", {1, 2, 2}}, {"f", {1, 1, 2}}}),
                             make_relation("T", {{"f", {1, 2, 2, 2}}})};
  return Database(std::move(rels), {{{"R", "k"}, {"S", "k"}}, {{"S", "f"}, {"T", "f"}}});
}

inline QuerySpec hand_mdp_query() {
  return {{"R", "S", "T"}, {}, {{{"R", "k"}, {"S", "k"}}, {{"S", "f"}, {"T", "f"}}}};
}

/// |a - b| <= rel * max(|a|, |b|) + abs.
inline bool close(double a, double b, double rel, double abs) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs;
}

}  // namespace qstate::testing
