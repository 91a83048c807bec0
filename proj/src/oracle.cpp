#include "qstate/oracle.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <unordered_map>

#include "qstate/errors.hpp"

namespace qstate {

namespace {

using RowIds = std::vector<std::uint32_t>;

constexpr std::size_t kMaterializeLimit = 50'000'000;

RowIds filter_rows(const Relation& rel, const std::vector<Selection>& preds) {
  std::vector<const Column*> cols;
  for (const auto& p : preds) cols.push_back(&rel.column(p.column.attribute));
  RowIds out;
  for (std::size_t r = 0; r < rel.row_count(); ++r) {
    bool keep = true;
    for (std::size_t i = 0; i < preds.size() && keep; ++i) keep = cols[i]->data[r] <= preds[i].upper_bound;
    if (keep) out.push_back(static_cast<std::uint32_t>(r));
  }
  return out;
}

struct KeyHash {
  std::size_t operator()(const std::vector<double>& key) const {
    std::size_t h = 0;
    for (double v : key) h = h * 1000003u ^ std::hash<double>{}(v);
    return h;
  }
};

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    throw CapacityError("cardinality exceeds 64-bit range");
  return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a) throw CapacityError("cardinality exceeds 64-bit range");
  return a + b;
}

// Edge between two relations of the (collapsed) join graph: parallel predicates form a composite key.
struct Edge {
  std::size_t a, b;
  std::vector<std::string> a_cols, b_cols;
};

struct Prepared {
  std::vector<const Relation*> rels;
  std::vector<RowIds> rows;
  std::vector<Edge> edges;
};

Prepared prepare(const Database& db, const QuerySpec& q) {
  Prepared p;
  for (const auto& name : q.relations) {
    p.rels.push_back(&db.relation(name));
    p.rows.push_back(filter_rows(*p.rels.back(), q.selections_on(name)));
  }
  auto index = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(q.relations.begin(), q.relations.end(), name) - q.relations.begin());
  };
  for (const auto& j : q.joins) {
    std::size_t a = index(j.left.relation), b = index(j.right.relation);
    std::string ac = j.left.attribute, bc = j.right.attribute;
    if (a > b) {
      std::swap(a, b);
      std::swap(ac, bc);
    }
    auto it = std::find_if(p.edges.begin(), p.edges.end(), [&](const Edge& e) { return e.a == a && e.b == b; });
    if (it == p.edges.end()) {
      p.edges.push_back({a, b, {ac}, {bc}});
    } else {
      it->a_cols.push_back(ac);
      it->b_cols.push_back(bc);
    }
  }
  return p;
}

// Resolves a composite join key's columns once; `fill` reuses the caller's buffer.
struct KeyColumns {
  std::vector<const std::vector<double>*> cols;
  KeyColumns(const Relation& rel, const std::vector<std::string>& names) {
    for (const auto& c : names) cols.push_back(&rel.column(c).data);
  }
  void fill(std::uint32_t row, std::vector<double>& key) const {
    key.resize(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) key[i] = (*cols[i])[row];
  }
};

// Tree-shaped join graph: weight(row) = product over children of the summed
// child weights sharing the join key; the answer is the root's weight sum.
std::uint64_t count_tree(const Prepared& p) {
  const std::size_t n = p.rels.size();
  std::vector<std::vector<std::pair<std::size_t, const Edge*>>> adj(n);
  for (const auto& e : p.edges) {
    adj[e.a].push_back({e.b, &e});
    adj[e.b].push_back({e.a, &e});
  }
  std::function<std::vector<std::uint64_t>(std::size_t, std::size_t)> weights =
      [&](std::size_t node, std::size_t parent) {
        std::vector<std::uint64_t> w(p.rows[node].size(), 1);
        for (const auto& [child, edge] : adj[node]) {
          if (child == parent) continue;
          const auto child_w = weights(child, node);
          const auto& child_cols = edge->a == child ? edge->a_cols : edge->b_cols;
          const auto& node_cols = edge->a == child ? edge->b_cols : edge->a_cols;
          const KeyColumns child_key(*p.rels[child], child_cols);
          const KeyColumns node_key(*p.rels[node], node_cols);
          std::vector<double> key;
          std::unordered_map<std::vector<double>, std::uint64_t, KeyHash> sums;
          for (std::size_t i = 0; i < p.rows[child].size(); ++i) {
            child_key.fill(p.rows[child][i], key);
            auto& s = sums[key];
            s = checked_add(s, child_w[i]);
          }
          for (std::size_t i = 0; i < p.rows[node].size(); ++i) {
            if (w[i] == 0) continue;
            node_key.fill(p.rows[node][i], key);
            auto it = sums.find(key);
            w[i] = it == sums.end() ? 0 : checked_mul(w[i], it->second);
          }
        }
        return w;
      };
  std::uint64_t total = 0;
  for (auto w : weights(0, n)) total = checked_add(total, w);
  return total;
}

// General join graph: left-deep hash joins over tuples of row ids, joining
// relations in BFS order; predicates closing a cycle filter during the probe.
std::uint64_t count_materialized(const Prepared& p) {
  const std::size_t n = p.rels.size();
  std::vector<std::size_t> order{0};
  std::vector<bool> in(n, false);
  in[0] = true;
  while (order.size() < n) {
    for (const auto& e : p.edges) {
      if (in[e.a] != in[e.b]) {
        const auto next = in[e.a] ? e.b : e.a;
        in[next] = true;
        order.push_back(next);
      }
    }
  }
  std::vector<std::size_t> slot(n, 0);
  for (std::size_t i = 0; i < n; ++i) slot[order[i]] = i;

  std::vector<std::uint32_t> tuples(p.rows[0].begin(), p.rows[0].end());
  std::size_t width = 1;
  for (std::size_t step = 1; step < n; ++step) {
    const auto next = order[step];
    std::vector<std::string> next_cols;
    std::vector<std::pair<std::size_t, std::string>> probe_cols;  // (relation, column)
    for (const auto& e : p.edges) {
      if (e.a == next && slot[e.b] < step) {
        next_cols.insert(next_cols.end(), e.a_cols.begin(), e.a_cols.end());
        for (const auto& c : e.b_cols) probe_cols.push_back({e.b, c});
      } else if (e.b == next && slot[e.a] < step) {
        next_cols.insert(next_cols.end(), e.b_cols.begin(), e.b_cols.end());
        for (const auto& c : e.a_cols) probe_cols.push_back({e.a, c});
      }
    }
    std::unordered_map<std::vector<double>, std::vector<std::uint32_t>, KeyHash> table;
    const KeyColumns next_key(*p.rels[next], next_cols);
    std::vector<double> build_key;
    for (auto r : p.rows[next]) {
      next_key.fill(r, build_key);
      table[build_key].push_back(r);
    }
    std::vector<const std::vector<double>*> probe_data;
    for (const auto& [rel, col] : probe_cols) probe_data.push_back(&p.rels[rel]->column(col).data);
    std::vector<std::uint32_t> out;
    const std::size_t count = tuples.size() / width;
    std::vector<double> key(probe_cols.size());
    for (std::size_t t = 0; t < count; ++t) {
      for (std::size_t k = 0; k < probe_cols.size(); ++k) {
        const auto rel = probe_cols[k].first;
        key[k] = (*probe_data[k])[tuples[t * width + slot[rel]]];
      }
      auto it = table.find(key);
      if (it == table.end()) continue;
      for (auto r : it->second) {
        out.insert(out.end(), tuples.begin() + static_cast<std::ptrdiff_t>(t * width),
                   tuples.begin() + static_cast<std::ptrdiff_t>((t + 1) * width));
        out.push_back(r);
        if (out.size() > kMaterializeLimit) throw CapacityError("intermediate join result too large to materialize");
      }
    }
    tuples = std::move(out);
    ++width;
  }
  return tuples.size() / width;
}

}  // namespace

std::uint64_t true_cardinality(const Database& db, const QuerySpec& q) {
  validate(q, db);
  const auto prepared = prepare(db, q);
  if (prepared.rels.size() == 1) return prepared.rows[0].size();
  if (prepared.edges.size() + 1 == prepared.rels.size()) return count_tree(prepared);
  return count_materialized(prepared);
}

std::uint64_t CardinalityCache::get(const QuerySpec& q) {
  auto key = q.to_string();
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto value = true_cardinality(*db_, q);
  memo_.emplace(std::move(key), value);
  return value;
}

}  // namespace qstate
