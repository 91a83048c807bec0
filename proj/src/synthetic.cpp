#include <cmath>
#include <random>

#include "qstate/errors.hpp"
#include "qstate/relation.hpp"
#include "qstate/util.hpp"

namespace qstate {

ColumnRule parse_column_rule(std::string_view name) {
  if (name == "uniform") return ColumnRule::uniform;
  if (name == "zipf") return ColumnRule::zipf;
  if (name == "functional" || name == "fd") return ColumnRule::functional;
  if (name == "foreign_key" || name == "fk") return ColumnRule::foreign_key;
  if (name == "sequence") return ColumnRule::sequence;
  throw ConfigError("unsupported column rule '" + std::string(name) + "'");
}

std::string_view to_string(ColumnRule rule) {
  switch (rule) {
    case ColumnRule::uniform: return "uniform";
    case ColumnRule::zipf: return "zipf";
    case ColumnRule::functional: return "functional";
    case ColumnRule::foreign_key: return "foreign_key";
    case ColumnRule::sequence: return "sequence";
  }
  return "?";
}

namespace {

std::discrete_distribution<std::size_t> zipf_distribution(std::size_t n, double s) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

std::vector<double> generate_column(const ColumnSpec& spec, std::size_t rows,
                                    const std::vector<Column>& earlier, const Database* db,
                                    std::mt19937_64& rng) {
  std::vector<double> out(rows);
  switch (spec.rule) {
    case ColumnRule::uniform: {
      if (spec.high < spec.low) throw ConfigError("column " + spec.name + ": high < low");
      std::uniform_int_distribution<long long> dist(std::llround(spec.low), std::llround(spec.high));
      for (auto& v : out) v = static_cast<double>(dist(rng));
      break;
    }
    case ColumnRule::zipf: {
      if (spec.zipf_values == 0) throw ConfigError("column " + spec.name + ": zipf needs values > 0");
      auto dist = zipf_distribution(spec.zipf_values, spec.zipf_s);
      for (auto& v : out) v = spec.low + static_cast<double>(dist(rng));
      break;
    }
    case ColumnRule::functional: {
      const Column* src = nullptr;
      for (const auto& c : earlier)
        if (c.name == spec.source) src = &c;
      if (src == nullptr)
        throw ConfigError("column " + spec.name + ": functional source '" + spec.source +
                          "' must be an earlier column of the same relation");
      const auto bound = std::llround(spec.noise);
      if (bound < 0) throw ConfigError("column " + spec.name + ": noise must be >= 0");
      std::uniform_int_distribution<long long> noise(-bound, bound);
      for (std::size_t r = 0; r < rows; ++r) {
        double v = std::round(spec.scale * src->data[r] + spec.offset);
        if (bound > 0) v += static_cast<double>(noise(rng));
        out[r] = v;
      }
      break;
    }
    case ColumnRule::foreign_key: {
      if (db == nullptr)
        throw ConfigError("column " + spec.name + ": foreign keys require database-level generation");
      const Relation* target = db->find(spec.reference.relation);
      if (target == nullptr || !target->has_column(spec.reference.attribute))
        throw ConfigError("column " + spec.name + ": unknown reference " + spec.reference.to_string());
      const auto& ref = target->column(spec.reference.attribute).data;
      if (ref.empty()) throw ConfigError("column " + spec.name + ": referenced relation is empty");
      auto dist = zipf_distribution(ref.size(), spec.zipf_s);
      for (auto& v : out) v = ref[dist(rng)];
      break;
    }
    case ColumnRule::sequence: {
      for (std::size_t r = 0; r < rows; ++r) out[r] = spec.low + static_cast<double>(r);
      break;
    }
  }
  return out;
}

Relation generate(const RelationSpec& spec, std::uint64_t seed, const Database* db) {
  if (spec.name.empty()) throw ConfigError("relation spec needs a name");
  std::mt19937_64 rng(seed);
  std::vector<Column> columns;
  for (const auto& cs : spec.columns) {
    auto data = generate_column(cs, spec.rows, columns, db, rng);
    columns.push_back(Column{cs.name, std::move(data), {}});
  }
  return Relation(spec.name, std::move(columns));
}

}  // namespace

Relation gen_synthetic(const RelationSpec& spec, std::uint64_t seed) {
  return generate(spec, seed, nullptr);
}

Database gen_database(const SyntheticSpec& spec) {
  std::vector<Relation> relations;
  for (const auto& rs : spec.relations) {
    Database partial(relations, {});
    relations.push_back(generate(rs, derive_seed(spec.seed, "relation:" + rs.name), &partial));
  }
  return Database(std::move(relations), spec.join_keys);
}

}  // namespace qstate
