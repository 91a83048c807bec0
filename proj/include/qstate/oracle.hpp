#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "qstate/query.hpp"
#include "qstate/relation.hpp"

namespace qstate {

/// Exact number of result tuples of `q` over `db` (selections, then all equi-joins).
/// Acyclic join graphs are counted by per-key weight propagation; cyclic ones are
/// materialized with hash joins. Either way the result equals the nested-loop count.
std::uint64_t true_cardinality(const Database& db, const QuerySpec& q);

/// Memoizes `true_cardinality` by the query's canonical text. Not thread-safe.
class CardinalityCache {
 public:
  explicit CardinalityCache(const Database& db) : db_(&db) {}
  std::uint64_t get(const QuerySpec& q);
  std::size_t size() const { return memo_.size(); }

 private:
  const Database* db_;
  std::map<std::string, std::uint64_t> memo_;
};

}  // namespace qstate
