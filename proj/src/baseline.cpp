#include "qstate/baseline.hpp"

#include <algorithm>

#include "qstate/errors.hpp"

namespace qstate {

double histogram_fraction_below(const AttributeStats& st, double v) {
  if (st.row_count == 0 || st.histogram.empty()) return 0.0;
  if (v < st.min) return 0.0;
  if (v >= st.max) return 1.0;
  const auto buckets = st.histogram.size();
  const double width = (st.max - st.min) / static_cast<double>(buckets);
  const auto k = st.bucket_of(v);
  double mass = 0.0;
  for (std::size_t i = 0; i < k; ++i) mass += st.histogram[i];
  const double lo = st.min + static_cast<double>(k) * width;
  mass += st.histogram[k] * std::clamp((v - lo) / width, 0.0, 1.0);
  return std::clamp(mass, 0.0, 1.0);
}

double BaselineEstimator::estimate_selection(const std::string& relation, std::span<const Selection> predicates) const {
  double est = static_cast<double>(catalog_->row_count(relation));
  for (const auto& p : predicates) {
    if (p.column.relation != relation)
      throw SchemaError("predicate on " + p.column.to_string() + " does not belong to " + relation);
    est *= histogram_fraction_below(catalog_->stats(p.column), p.upper_bound);
  }
  return est;
}

double BaselineEstimator::estimate_join(double card_left, double card_right, const AttributeStats& left,
                                        const AttributeStats& right) {
  if (card_left <= 0 || card_right <= 0) return 0.0;
  const auto d = std::max(left.distinct_count, right.distinct_count);
  if (d == 0) throw ContractViolation("join estimate needs a positive distinct count on a non-empty input");
  return card_left * card_right / static_cast<double>(d);
}

double BaselineEstimator::estimate_subquery(const QuerySpec& q) const {
  double est = 1.0;
  for (const auto& r : q.relations) {
    const auto preds = q.selections_on(r);
    est *= estimate_selection(r, preds);
  }
  for (const auto& j : q.joins) {
    if (est <= 0) return 0.0;
    const auto d = std::max(catalog_->stats(j.left).distinct_count, catalog_->stats(j.right).distinct_count);
    if (d == 0) return 0.0;
    est /= static_cast<double>(d);
  }
  return est;
}

}  // namespace qstate
