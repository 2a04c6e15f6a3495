#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvd/bytes.hpp"
#include "pvd/value.hpp"

namespace pvd {

struct ColumnSpec {
  std::string name;
  ColumnType type;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

using Schema = std::vector<ColumnSpec>;

/// Typed column storage with an optional null mask.
class Column {
 public:
  explicit Column(ColumnType type) : type_(type) {}

  ColumnType type() const { return type_; }
  std::size_t size() const { return size_; }

  bool is_null(std::size_t row) const { return !nulls_.empty() && nulls_[row] != 0; }
  bool has_nulls() const;
  Value get(std::size_t row) const;

  /// Appends a value; TypeError if the value's type differs from the column's.
  void push_back(const Value& v);
  void push_null();
  void reserve(std::size_t n);

  /// Appends row `row` of `src` (same type).
  void append_from(const Column& src, std::size_t row);
  /// New column holding the given rows, in order.
  Column gather(std::span<const std::size_t> rows) const;

  const std::vector<std::int64_t>& ints() const { return ints_; }
  const std::vector<double>& floats() const { return floats_; }
  const std::vector<std::string>& strings() const { return strings_; }
  const std::vector<std::uint8_t>& bools() const { return bools_; }
  /// 1 per null row; empty when the column never held a null.
  const std::vector<std::uint8_t>& null_mask() const { return nulls_; }

 private:
  void mark_null(bool null);

  ColumnType type_;
  std::size_t size_ = 0;
  std::vector<std::int64_t> ints_;
  std::vector<double> floats_;
  std::vector<std::string> strings_;
  std::vector<std::uint8_t> bools_;
  std::vector<std::uint8_t> nulls_;  // empty until the first null
};

/// Immutable column-oriented table.
class Relation {
 public:
  Relation(std::string name, Schema schema, std::vector<Column> columns);
  /// Empty relation with the given schema.
  Relation(std::string name, Schema schema);

  const std::string& name() const { return name_; }
  const Schema& schema() const { return schema_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return schema_.size(); }

  std::optional<std::size_t> find_column(const std::string& name) const;
  /// UnknownColumn if absent.
  std::size_t column_index(const std::string& name) const;
  const Column& column(const std::string& name) const { return columns_[column_index(name)]; }

  Value at(std::size_t row, std::size_t col) const { return columns_[col].get(row); }
  std::vector<Value> row(std::size_t r) const;

  Relation renamed(std::string name) const;
  /// Rows in the given order (indices may repeat).
  Relation gather(std::span<const std::size_t> rows) const;

 private:
  std::string name_;
  Schema schema_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
};

using RelationPtr = std::shared_ptr<const Relation>;
using Database = std::map<std::string, RelationPtr>;

/// Row-wise builder for relations.
class RelationBuilder {
 public:
  RelationBuilder(std::string name, Schema schema);
  void add_row(const std::vector<Value>& row);
  Column& column(std::size_t i) { return columns_[i]; }
  Relation finish() &&;

 private:
  std::string name_;
  Schema schema_;
  std::vector<Column> columns_;
};

struct ColumnStats {
  std::size_t distinct_count = 0;
  std::optional<Value> min;
  std::optional<Value> max;
  std::size_t null_count = 0;
  double width_bytes = 0.0;
};

using StatsMap = std::map<std::string, ColumnStats>;

/// Exact statistics from a full scan.
StatsMap compute_stats(const Relation& rel);

/// Statistics for every relation in a database, keyed relation → column.
struct RelationStats {
  std::size_t row_count = 0;
  StatsMap columns;
};
using DatabaseStats = std::map<std::string, RelationStats>;
DatabaseStats compute_stats(const Database& db);

/// Nominal width of a value of this type in bytes (strings: length prefix only).
double nominal_width(ColumnType t);

/// Rows sorted by the full tuple under canonical_less.
Relation canonicalize(const Relation& rel);

/// Same schema and row count; ints, strings and bools equal exactly; floats
/// within `float_rel_tol` relative difference.
bool relations_equal(const Relation& a, const Relation& b, double float_rel_tol = 1e-9);

/// Stable content digest over schema and cells.
std::uint64_t relation_digest(const Relation& rel);

/// Flat little-endian encoding used inside structure payloads and for
/// transfer-size accounting.
void encode_relation(ByteWriter& out, const Relation& rel);
Relation decode_relation(ByteReader& in);
std::size_t encoded_size(const Relation& rel);

/// Loads a CSV file with a header row. Empty unquoted cells are null.
Relation load_csv(const std::filesystem::path& path, const std::string& name, const Schema& schema);

/// Parses one cell of CSV text to a value of type `t`.
std::optional<Value> parse_cell(std::string_view text, ColumnType t);

/// Writes a relation as CSV (header row; nulls as empty cells).
void write_csv(const std::filesystem::path& path, const Relation& rel);

}  // namespace pvd
