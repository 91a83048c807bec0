#include "qstate/relation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "qstate/errors.hpp"
#include "qstate/util.hpp"

namespace qstate {

ColumnRef ColumnRef::parse(std::string_view text) {
  const auto dot = text.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == text.size())
    throw SchemaError("expected <relation>.<attribute>, got '" + std::string(text) + "'");
  return {std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
}

bool JoinPredicate::same_as(const JoinPredicate& other) const {
  return (left == other.left && right == other.right) ||
         (left == other.right && right == other.left);
}

bool JoinPredicate::touches(std::string_view relation) const {
  return left.relation == relation || right.relation == relation;
}

const ColumnRef& JoinPredicate::side(std::string_view relation) const {
  if (left.relation == relation) return left;
  if (right.relation == relation) return right;
  throw ContractViolation("join " + to_string() + " does not touch " + std::string(relation));
}

const ColumnRef& JoinPredicate::opposite(std::string_view relation) const {
  if (left.relation == relation) return right;
  if (right.relation == relation) return left;
  throw ContractViolation("join " + to_string() + " does not touch " + std::string(relation));
}

Relation::Relation(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  if (name_.empty()) throw SchemaError("relation name must not be empty");
  row_count_ = columns_.empty() ? 0 : columns_.front().data.size();
  std::set<std::string, std::less<>> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("relation " + name_ + ": empty attribute name");
    if (!seen.insert(c.name).second)
      throw SchemaError("relation " + name_ + ": duplicate attribute " + c.name);
    if (c.data.size() != row_count_)
      throw SchemaError("relation " + name_ + ": column " + c.name + " has " +
                        std::to_string(c.data.size()) + " rows, expected " +
                        std::to_string(row_count_));
    for (double v : c.data)
      if (!std::isfinite(v)) throw NumericError("relation " + name_ + ": non-finite value in " + c.name);
  }
}

std::optional<std::size_t> Relation::column_index(std::string_view attribute) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == attribute) return i;
  return std::nullopt;
}

const Column& Relation::column(std::string_view attribute) const {
  if (auto i = column_index(attribute)) return columns_[*i];
  throw SchemaError("relation " + name_ + " has no attribute " + std::string(attribute));
}

Database::Database(std::vector<Relation> relations, std::vector<JoinPredicate> join_keys)
    : relations_(std::move(relations)), join_keys_(std::move(join_keys)) {
  std::set<std::string, std::less<>> names;
  for (const auto& r : relations_)
    if (!names.insert(r.name()).second) throw SchemaError("duplicate relation " + r.name());
  for (std::size_t i = 0; i < join_keys_.size(); ++i) {
    const auto& jk = join_keys_[i];
    column(jk.left);
    column(jk.right);
    if (jk.left.relation == jk.right.relation)
      throw SchemaError("join key " + jk.to_string() + " must connect two distinct relations");
    for (std::size_t j = 0; j < i; ++j)
      if (join_keys_[j].same_as(jk)) throw SchemaError("duplicate join key " + jk.to_string());
  }
}

const Relation* Database::find(std::string_view name) const {
  for (const auto& r : relations_)
    if (r.name() == name) return &r;
  return nullptr;
}

const Relation& Database::relation(std::string_view name) const {
  if (const auto* r = find(name)) return *r;
  throw SchemaError("unknown relation " + std::string(name));
}

std::optional<std::size_t> Database::relation_index(std::string_view name) const {
  for (std::size_t i = 0; i < relations_.size(); ++i)
    if (relations_[i].name() == name) return i;
  return std::nullopt;
}

const Column& Database::column(const ColumnRef& ref) const {
  return relation(ref.relation).column(ref.attribute);
}

// --- CSV -------------------------------------------------------------------

namespace {

// Splits one CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r' || i + 1 != line.size()) {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("row " + std::to_string(line_no) + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace

Relation load_csv(const std::filesystem::path& path, std::string name,
                  std::span<const AttributeDecl> schema) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_record(line, 1);

  std::vector<AttributeDecl> decls(schema.begin(), schema.end());
  if (decls.empty())
    for (const auto& h : header) decls.push_back({h, AttributeKind::automatic});

  std::vector<std::size_t> source_index;
  for (const auto& d : decls) {
    auto it = std::find(header.begin(), header.end(), d.name);
    if (it == header.end())
      throw SchemaError(path.string() + ": declared attribute " + d.name + " not in header");
    source_index.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<std::vector<std::string>> raw(decls.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto fields = split_record(line, line_no);
    if (fields.size() != header.size())
      throw ParseError(path.string() + ": row " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    for (std::size_t c = 0; c < decls.size(); ++c) raw[c].push_back(fields[source_index[c]]);
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < decls.size(); ++c) {
    Column col{decls[c].name, {}, {}};
    col.data.reserve(raw[c].size());
    bool categorical = decls[c].kind == AttributeKind::categorical;
    if (decls[c].kind == AttributeKind::automatic) {
      double tmp;
      categorical = !std::all_of(raw[c].begin(), raw[c].end(),
                                 [&](const std::string& s) { return is_blank(s) || parse_double(s, tmp); });
    }
    std::unordered_map<std::string, double> codes;
    for (std::size_t r = 0; r < raw[c].size(); ++r) {
      const auto& s = raw[c][r];
      // Data rows start on line 2.
      const std::string where = path.string() + ": row " + std::to_string(r + 2) + ", column " + decls[c].name;
      if (is_blank(s)) throw ParseError(where + ": empty value (NULLs are not supported)");
      if (categorical) {
        auto [it, inserted] = codes.try_emplace(s, static_cast<double>(col.dictionary.size()));
        if (inserted) col.dictionary.push_back(s);
        col.data.push_back(it->second);
      } else {
        double v;
        if (!parse_double(s, v)) throw ParseError(where + ": '" + s + "' is not numeric");
        col.data.push_back(v);
      }
    }
    columns.push_back(std::move(col));
  }
  return Relation(std::move(name), std::move(columns));
}

void save_csv(const Relation& relation, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw SchemaError("cannot write " + path.string());
  const auto cols = relation.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c].name;
  out << '\n';
  for (std::size_t r = 0; r < relation.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << format_double(cols[c].data[r]);
    out << '\n';
  }
}

Database load_database(const std::filesystem::path& dir) {
  std::ifstream in(dir / "schema.json");
  if (!in) throw SchemaError("cannot open " + (dir / "schema.json").string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("schema.json: " + std::string(e.what()));
  }
  std::vector<Relation> relations;
  try {
    for (const auto& r : doc.at("relations")) {
      const auto name = r.at("name").get<std::string>();
      const auto file = r.value("file", name + ".csv");
      std::vector<AttributeDecl> decls;
      if (r.contains("attributes")) {
        for (const auto& a : r.at("attributes")) {
          if (a.is_string()) {
            decls.push_back({a.get<std::string>(), AttributeKind::automatic});
          } else {
            const auto kind = a.value("type", std::string("auto"));
            AttributeKind k = AttributeKind::automatic;
            if (kind == "numeric") k = AttributeKind::numeric;
            else if (kind == "categorical") k = AttributeKind::categorical;
            else if (kind != "auto") throw SchemaError("unknown attribute type " + kind);
            decls.push_back({a.at("name").get<std::string>(), k});
          }
        }
      }
      relations.push_back(load_csv(dir / file, name, decls));
    }
    std::vector<JoinPredicate> keys;
    for (const auto& jk : doc.value("join_keys", nlohmann::json::array()))
      keys.push_back({ColumnRef::parse(jk.at(0).get<std::string>()),
                      ColumnRef::parse(jk.at(1).get<std::string>())});
    return Database(std::move(relations), std::move(keys));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema.json: " + std::string(e.what()));
  }
}

void save_database(const Database& db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json doc;
  doc["relations"] = nlohmann::ordered_json::array();
  for (const auto& r : db.relations()) {
    save_csv(r, dir / (r.name() + ".csv"));
    nlohmann::ordered_json attrs = nlohmann::ordered_json::array();
    for (const auto& c : r.columns()) attrs.push_back(c.name);
    doc["relations"].push_back({{"name", r.name()}, {"file", r.name() + ".csv"}, {"attributes", attrs}});
  }
  doc["join_keys"] = nlohmann::ordered_json::array();
  for (const auto& jk : db.join_keys()) doc["join_keys"].push_back({jk.left.to_string(), jk.right.to_string()});
  std::ofstream out(dir / "schema.json");
  out << doc.dump(2) << '\n';
}

}  // namespace qstate
