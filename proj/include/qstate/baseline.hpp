#pragma once

#include <span>
#include <string>

#include "qstate/catalog.hpp"
#include "qstate/query.hpp"

namespace qstate {

/// Histogram mass at or below `v`, interpolating linearly inside the bucket that
/// straddles it. 1 at or above the maximum, 0 below the minimum.
double histogram_fraction_below(const AttributeStats& stats, double v);

/// 1-D histograms with uniformity inside buckets, independence across
/// attributes and containment of join key domains.
class BaselineEstimator {
 public:
  explicit BaselineEstimator(const Catalog& catalog) : catalog_(&catalog) {}

  /// |rel| times the product of per-predicate selectivities. SchemaError for unknown attributes.
  double estimate_selection(const std::string& relation, std::span<const Selection> predicates) const;
  /// card_left * card_right / max(distinct_left, distinct_right); 0 if either side is empty.
  static double estimate_join(double card_left, double card_right, const AttributeStats& left,
                              const AttributeStats& right);
  /// Selections estimated per relation, then one containment division per join predicate.
  double estimate_subquery(const QuerySpec& q) const;

  const Catalog& catalog() const { return *catalog_; }

 private:
  const Catalog* catalog_;
};

}  // namespace qstate
