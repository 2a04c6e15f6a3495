#include "pvd/relation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_set>

#include "pvd/errors.hpp"

namespace pvd {

bool Column::has_nulls() const {
  return std::any_of(nulls_.begin(), nulls_.end(), [](std::uint8_t n) { return n != 0; });
}

Value Column::get(std::size_t row) const {
  if (is_null(row)) return Value::null();
  switch (type_) {
    case ColumnType::Int64: return Value(ints_[row]);
    case ColumnType::Float64: return Value(floats_[row]);
    case ColumnType::String: return Value(strings_[row]);
    case ColumnType::Bool: return Value(bools_[row] != 0);
  }
  return Value::null();
}

void Column::mark_null(bool null) {
  if (null && nulls_.size() < size_) nulls_.assign(size_, 0);
  if (null || !nulls_.empty()) nulls_.push_back(null ? 1 : 0);
  ++size_;
}

void Column::push_back(const Value& v) {
  if (v.is_null()) {
    push_null();
    return;
  }
  if (v.type() != type_)
    throw TypeError("cannot store " + std::string(to_string(v.type())) + " in " +
                    std::string(to_string(type_)) + " column");
  switch (type_) {
    case ColumnType::Int64: ints_.push_back(v.as_int()); break;
    case ColumnType::Float64: floats_.push_back(v.as_float()); break;
    case ColumnType::String: strings_.push_back(v.as_string()); break;
    case ColumnType::Bool: bools_.push_back(v.as_bool() ? 1 : 0); break;
  }
  mark_null(false);
}

void Column::push_null() {
  switch (type_) {
    case ColumnType::Int64: ints_.push_back(0); break;
    case ColumnType::Float64: floats_.push_back(0.0); break;
    case ColumnType::String: strings_.emplace_back(); break;
    case ColumnType::Bool: bools_.push_back(0); break;
  }
  mark_null(true);
}

void Column::reserve(std::size_t n) {
  switch (type_) {
    case ColumnType::Int64: ints_.reserve(n); break;
    case ColumnType::Float64: floats_.reserve(n); break;
    case ColumnType::String: strings_.reserve(n); break;
    case ColumnType::Bool: bools_.reserve(n); break;
  }
}

void Column::append_from(const Column& src, std::size_t row) {
  bool null = src.is_null(row);
  switch (type_) {
    case ColumnType::Int64: ints_.push_back(src.ints_[row]); break;
    case ColumnType::Float64: floats_.push_back(src.floats_[row]); break;
    case ColumnType::String: strings_.push_back(src.strings_[row]); break;
    case ColumnType::Bool: bools_.push_back(src.bools_[row]); break;
  }
  mark_null(null);
}

Relation::Relation(std::string name, Schema schema, std::vector<Column> columns)
    : name_(std::move(name)), schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size()) throw SchemaMismatch("column count differs from schema");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < schema_.size(); ++i) {
    if (!seen.insert(schema_[i].name).second)
      throw SchemaMismatch("duplicate column '" + schema_[i].name + "' in " + name_);
    if (columns_[i].type() != schema_[i].type)
      throw SchemaMismatch("column '" + schema_[i].name + "' storage type differs from schema");
  }
  row_count_ = columns_.empty() ? 0 : columns_[0].size();
  for (const auto& c : columns_)
    if (c.size() != row_count_) throw SchemaMismatch("columns of " + name_ + " have unequal length");
}

Relation::Relation(std::string name, Schema schema)
    : Relation(name, schema, [&] {
        std::vector<Column> cols;
        for (const auto& s : schema) cols.emplace_back(s.type);
        return cols;
      }()) {}

std::optional<std::size_t> Relation::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < schema_.size(); ++i)
    if (schema_[i].name == name) return i;
  return std::nullopt;
}

std::size_t Relation::column_index(const std::string& name) const {
  if (auto i = find_column(name)) return *i;
  throw UnknownColumn(name);
}

std::vector<Value> Relation::row(std::size_t r) const {
  std::vector<Value> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.get(r));
  return out;
}

Relation Relation::renamed(std::string name) const {
  Relation copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

Column Column::gather(std::span<const std::size_t> rows) const {
  Column c(type_);
  auto pick = [&](const auto& from, auto& to) {
    to.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) to[i] = from[rows[i]];
  };
  switch (type_) {
    case ColumnType::Int64: pick(ints_, c.ints_); break;
    case ColumnType::Float64: pick(floats_, c.floats_); break;
    case ColumnType::String: pick(strings_, c.strings_); break;
    case ColumnType::Bool: pick(bools_, c.bools_); break;
  }
  if (has_nulls()) pick(nulls_, c.nulls_);
  c.size_ = rows.size();
  return c;
}

Relation Relation::gather(std::span<const std::size_t> rows) const {
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const auto& src : columns_) cols.push_back(src.gather(rows));
  return Relation(name_, schema_, std::move(cols));
}

RelationBuilder::RelationBuilder(std::string name, Schema schema)
    : name_(std::move(name)), schema_(std::move(schema)) {
  for (const auto& s : schema_) columns_.emplace_back(s.type);
}

void RelationBuilder::add_row(const std::vector<Value>& row) {
  if (row.size() != columns_.size()) throw SchemaMismatch("row arity differs from schema");
  for (std::size_t i = 0; i < row.size(); ++i) columns_[i].push_back(row[i]);
}

Relation RelationBuilder::finish() && { return Relation(std::move(name_), std::move(schema_), std::move(columns_)); }

double nominal_width(ColumnType t) {
  switch (t) {
    case ColumnType::Int64:
    case ColumnType::Float64: return 8.0;
    case ColumnType::Bool: return 1.0;
    case ColumnType::String: return 4.0;
  }
  return 8.0;
}

StatsMap compute_stats(const Relation& rel) {
  StatsMap out;
  for (std::size_t c = 0; c < rel.column_count(); ++c) {
    const Column& col = rel.columns()[c];
    ColumnStats s;
    std::unordered_set<Value> distinct;
    double string_bytes = 0.0;
    std::size_t non_null = 0;
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (col.is_null(r)) {
        ++s.null_count;
        continue;
      }
      ++non_null;
      Value v = col.get(r);
      if (col.type() == ColumnType::String) string_bytes += static_cast<double>(v.as_string().size());
      if (!s.min || compare(v, *s.min) < 0) s.min = v;
      if (!s.max || compare(v, *s.max) > 0) s.max = v;
      distinct.insert(std::move(v));
    }
    s.distinct_count = distinct.size();
    s.width_bytes = nominal_width(col.type());
    if (col.type() == ColumnType::String && non_null > 0) s.width_bytes += string_bytes / static_cast<double>(non_null);
    out.emplace(rel.schema()[c].name, std::move(s));
  }
  return out;
}

DatabaseStats compute_stats(const Database& db) {
  DatabaseStats out;
  for (const auto& [name, rel] : db) out.emplace(name, RelationStats{rel->row_count(), compute_stats(*rel)});
  return out;
}

namespace {

bool row_less(const Relation& rel, std::size_t a, std::size_t b) {
  for (const auto& col : rel.columns()) {
    Value va = col.get(a), vb = col.get(b);
    if (canonical_less(va, vb)) return true;
    if (canonical_less(vb, va)) return false;
  }
  return false;
}

}  // namespace

Relation canonicalize(const Relation& rel) {
  std::vector<std::size_t> order(rel.row_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row_less(rel, a, b); });
  return rel.gather(order);
}

bool relations_equal(const Relation& a, const Relation& b, double float_rel_tol) {
  if (a.schema() != b.schema() || a.row_count() != b.row_count()) return false;
  for (std::size_t c = 0; c < a.column_count(); ++c) {
    const Column& ca = a.columns()[c];
    const Column& cb = b.columns()[c];
    for (std::size_t r = 0; r < a.row_count(); ++r) {
      if (ca.is_null(r) != cb.is_null(r)) return false;
      if (ca.is_null(r)) continue;
      if (ca.type() == ColumnType::Float64) {
        double x = ca.floats()[r], y = cb.floats()[r];
        if (x == y) continue;
        double scale = std::max(std::abs(x), std::abs(y));
        if (!(std::abs(x - y) <= float_rel_tol * scale)) return false;
      } else if (!(ca.get(r) == cb.get(r))) {
        return false;
      }
    }
  }
  return true;
}

void encode_relation(ByteWriter& out, const Relation& rel) {
  out.str(rel.name());
  out.u32(static_cast<std::uint32_t>(rel.column_count()));
  out.u64(rel.row_count());
  for (std::size_t c = 0; c < rel.column_count(); ++c) {
    const auto& spec = rel.schema()[c];
    const Column& col = rel.columns()[c];
    out.str(spec.name);
    out.u8(static_cast<std::uint8_t>(spec.type));
    bool nulls = col.has_nulls();
    out.u8(nulls ? 1 : 0);
    if (nulls)
      for (std::size_t r = 0; r < col.size(); ++r) out.u8(col.is_null(r) ? 1 : 0);
    for (std::size_t r = 0; r < col.size(); ++r) {
      switch (spec.type) {
        case ColumnType::Int64: out.i64(col.ints()[r]); break;
        case ColumnType::Float64: out.f64(col.floats()[r]); break;
        case ColumnType::String: out.str(col.strings()[r]); break;
        case ColumnType::Bool: out.u8(col.bools()[r]); break;
      }
    }
  }
}

Relation decode_relation(ByteReader& in) {
  std::string name = in.str();
  std::uint32_t ncols = in.u32();
  std::uint64_t nrows = in.u64();
  Schema schema;
  std::vector<Column> cols;
  for (std::uint32_t c = 0; c < ncols; ++c) {
    std::string cname = in.str();
    std::uint8_t tag = in.u8();
    if (tag > 3) throw Error("bad column type tag in payload");
    auto type = static_cast<ColumnType>(tag);
    std::vector<std::uint8_t> nulls;
    if (in.u8() != 0) {
      nulls.resize(nrows);
      for (auto& n : nulls) n = in.u8();
    }
    Column col(type);
    col.reserve(nrows);
    for (std::uint64_t r = 0; r < nrows; ++r) {
      Value v;
      switch (type) {
        case ColumnType::Int64: v = Value(in.i64()); break;
        case ColumnType::Float64: v = Value(in.f64()); break;
        case ColumnType::String: v = Value(in.str()); break;
        case ColumnType::Bool: v = Value(in.u8() != 0); break;
      }
      if (!nulls.empty() && nulls[r]) col.push_null();
      else col.push_back(v);
    }
    schema.push_back({std::move(cname), type});
    cols.push_back(std::move(col));
  }
  return Relation(std::move(name), std::move(schema), std::move(cols));
}

std::size_t encoded_size(const Relation& rel) {
  std::size_t n = 4 + rel.name().size() + 4 + 8;
  for (std::size_t c = 0; c < rel.column_count(); ++c) {
    const Column& col = rel.columns()[c];
    n += 4 + rel.schema()[c].name.size() + 2;
    if (col.has_nulls()) n += col.size();
    switch (col.type()) {
      case ColumnType::Int64:
      case ColumnType::Float64: n += 8 * col.size(); break;
      case ColumnType::Bool: n += col.size(); break;
      case ColumnType::String:
        for (const auto& s : col.strings()) n += 4 + s.size();
        break;
    }
  }
  return n;
}

std::uint64_t relation_digest(const Relation& rel) {
  ByteWriter w;
  // Name excluded: the digest identifies content, not the label.
  Relation unnamed = rel.renamed("");
  encode_relation(w, unnamed);
  Fnv1a h;
  h.update(std::span<const std::uint8_t>(w.buffer()));
  return h.digest();
}

}  // namespace pvd
