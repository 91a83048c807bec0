#include "qstate/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "qstate/errors.hpp"

namespace qstate {

std::size_t AttributeStats::bucket_of(double value) const {
  const auto b = histogram.size();
  if (b == 0 || !(max > min) || value <= min) return 0;
  if (value >= max) return b - 1;
  const auto k = static_cast<std::size_t>((value - min) / (max - min) * static_cast<double>(b));
  return std::min(k, b - 1);
}

std::map<std::string, AttributeStats> compute_stats(const Relation& rel, std::size_t buckets) {
  if (buckets == 0) throw ConfigError("bucket count must be positive");
  std::map<std::string, AttributeStats> out;
  const auto n = rel.row_count();
  for (const auto& col : rel.columns()) {
    AttributeStats st;
    st.row_count = n;
    st.histogram.assign(buckets, 0.0);
    if (n > 0) {
      const auto [lo, hi] = std::minmax_element(col.data.begin(), col.data.end());
      st.min = *lo;
      st.max = *hi;
      st.distinct_count = std::set<double>(col.data.begin(), col.data.end()).size();
      std::vector<std::size_t> counts(buckets, 0);
      for (double v : col.data) ++counts[st.bucket_of(v)];
      for (std::size_t k = 0; k < buckets; ++k)
        st.histogram[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
    }
    out.emplace(col.name, std::move(st));
  }
  return out;
}

bool ContextVector::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::size_t ContextVector::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; }));
}

Catalog::Catalog(const Database& db, std::size_t buckets) : buckets_(buckets) {
  if (buckets == 0) throw ConfigError("bucket count must be positive");
  for (const auto& rel : db.relations()) {
    relations_.push_back(rel.name());
    row_counts_[rel.name()] = rel.row_count();
    auto stats = compute_stats(rel, buckets);
    for (const auto& col : rel.columns()) {
      ColumnRef ref{rel.name(), col.name};
      attributes_.push_back(ref);
      stats_.emplace(ref, std::move(stats.at(col.name)));
    }
  }
  joins_.assign(db.join_keys().begin(), db.join_keys().end());
}

Catalog::Catalog(std::vector<std::string> relation_order, std::map<std::string, std::vector<std::string>> attribute_order,
                 std::map<std::string, std::map<std::string, AttributeStats>> stats,
                 std::map<std::string, std::size_t> row_counts, std::vector<JoinPredicate> join_keys,
                 std::size_t buckets)
    : buckets_(buckets), relations_(std::move(relation_order)), joins_(std::move(join_keys)),
      row_counts_(std::move(row_counts)) {
  for (const auto& r : relations_) {
    if (!row_counts_.count(r)) throw SchemaError("missing row count for " + r);
    for (const auto& a : attribute_order.at(r)) {
      ColumnRef ref{r, a};
      const auto& st = stats.at(r).at(a);
      if (st.histogram.size() != buckets_) throw ShapeError("histogram of " + ref.to_string() + " has wrong size");
      attributes_.push_back(ref);
      stats_.emplace(ref, st);
    }
  }
  for (const auto& j : joins_) {
    attribute_index(j.left);
    attribute_index(j.right);
  }
}

const AttributeStats& Catalog::stats(const ColumnRef& ref) const {
  auto it = stats_.find(ref);
  if (it == stats_.end()) throw SchemaError("catalog has no attribute " + ref.to_string());
  return it->second;
}

AttributeStats& Catalog::mutable_stats(const ColumnRef& ref) {
  auto it = stats_.find(ref);
  if (it == stats_.end()) throw SchemaError("catalog has no attribute " + ref.to_string());
  return it->second;
}

std::size_t Catalog::row_count(const std::string& relation) const {
  auto it = row_counts_.find(relation);
  if (it == row_counts_.end()) throw SchemaError("catalog has no relation " + relation);
  return it->second;
}

std::size_t Catalog::attribute_index(const ColumnRef& ref) const {
  auto it = std::find(attributes_.begin(), attributes_.end(), ref);
  if (it == attributes_.end()) throw SchemaError("catalog has no attribute " + ref.to_string());
  return static_cast<std::size_t>(it - attributes_.begin());
}

std::optional<std::size_t> Catalog::find_join(const JoinPredicate& p) const {
  for (std::size_t i = 0; i < joins_.size(); ++i)
    if (joins_[i].same_as(p)) return i;
  return std::nullopt;
}

std::optional<std::size_t> Catalog::relation_index(const std::string& relation) const {
  auto it = std::find(relations_.begin(), relations_.end(), relation);
  if (it == relations_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - relations_.begin());
}

double Catalog::normalize_bound(const ColumnRef& ref, double v) const {
  const auto& st = stats(ref);
  if (!(st.max > st.min)) return v >= st.min ? 1.0 : 0.0;
  return std::clamp((v - st.min) / (st.max - st.min), 0.0, 1.0);
}

DatabaseVector build_x0(const Catalog& catalog) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& ref : catalog.attributes()) {
    const auto& st = catalog.stats(ref);
    if (st.row_count == 0) continue;
    lo = std::min(lo, st.min);
    hi = std::max(hi, st.max);
  }
  const double span = hi > lo ? hi - lo : 0.0;
  auto scale = [&](double v) { return span > 0 ? std::clamp((v - lo) / span, 0.0, 1.0) : 0.0; };

  DatabaseVector x0;
  x0.values.reserve(catalog.x0_size());
  for (const auto& ref : catalog.attributes()) {
    const auto& st = catalog.stats(ref);
    const bool empty = st.row_count == 0;
    x0.values.push_back(empty ? 0.0 : scale(st.min));
    x0.values.push_back(empty ? 0.0 : scale(st.max));
    x0.values.push_back(empty ? 0.0 : static_cast<double>(st.distinct_count) / static_cast<double>(st.row_count));
    x0.values.insert(x0.values.end(), st.histogram.begin(), st.histogram.end());
  }
  return x0;
}

namespace {

std::size_t checked_attribute(const Catalog& catalog, const ColumnRef& ref) {
  try {
    return catalog.attribute_index(ref);
  } catch (const SchemaError&) {
    throw EncodingError("attribute " + ref.to_string() + " is not in the catalog");
  }
}

std::size_t checked_join(const Catalog& catalog, const JoinPredicate& p) {
  if (auto j = catalog.find_join(p)) return *j;
  throw EncodingError("join " + p.to_string() + " is not in the catalog's predicate set");
}

}  // namespace

ActionEncoding encode_action(const Action& action, const Catalog& catalog) {
  ActionEncoding enc{std::vector<double>(catalog.action_size(), 0.0)};
  if (const auto* s = std::get_if<SelectionAction>(&action)) {
    for (const auto& p : s->predicates) {
      if (p.column.relation != s->relation)
        throw EncodingError("selection on " + s->relation + " carries predicate on " + p.column.to_string());
      const auto i = checked_attribute(catalog, p.column);
      enc.values[2 * i] = 1.0;
      enc.values[2 * i + 1] = catalog.normalize_bound(p.column, p.upper_bound);
    }
  } else {
    const auto j = checked_join(catalog, std::get<JoinAction>(action).predicate);
    enc.values[2 * catalog.attribute_count() + j] = 1.0;
  }
  return enc;
}

ContextVector init_context(const QuerySpec& q, const Catalog& catalog) {
  ContextVector u{std::vector<double>(catalog.context_size(), 0.0)};
  for (const auto& s : q.selections) {
    const auto i = checked_attribute(catalog, s.column);
    u.values[i] = std::max(catalog.normalize_bound(s.column, s.upper_bound), kPendingSelectionFloor);
  }
  for (const auto& j : q.joins) u.values[catalog.attribute_count() + checked_join(catalog, j)] = 1.0;
  return u;
}

ContextVector apply_action(const ContextVector& u, const Action& action, const Catalog& catalog) {
  if (u.values.size() != catalog.context_size()) throw ShapeError("context vector does not match the catalog");
  ContextVector next = u;
  auto consume = [&](std::size_t slot, const std::string& what) {
    if (next.values[slot] == 0.0) throw ContractViolation(what + " is not pending");
    next.values[slot] = 0.0;
  };
  if (const auto* s = std::get_if<SelectionAction>(&action)) {
    if (s->predicates.empty()) throw ContractViolation("selection action on " + s->relation + " has no predicates");
    for (const auto& p : s->predicates) consume(checked_attribute(catalog, p.column), "selection on " + p.column.to_string());
  } else {
    const auto& p = std::get<JoinAction>(action).predicate;
    consume(catalog.attribute_count() + checked_join(catalog, p), "join " + p.to_string());
  }
  return next;
}

}  // namespace qstate
