#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace pvd {

enum class ColumnType : std::uint8_t { Int64 = 0, Float64 = 1, String = 2, Bool = 3 };

std::string_view to_string(ColumnType t);
std::optional<ColumnType> parse_column_type(std::string_view s);

/// A scalar cell: int64 | float64 | string | bool | null.
///
/// Ordering comparisons are only defined between two non-null values of the
/// same type; anything else raises TypeError. canonical_less() is the total
/// order used for output normalization (null < int < float < string < bool,
/// then by value).
class Value {
 public:
  using Storage = std::variant<std::monostate, std::int64_t, double, std::string, bool>;

  Value() = default;
  Value(std::int64_t v) : v_(v) {}
  Value(int v) : v_(static_cast<std::int64_t>(v)) {}
  Value(double v) : v_(v) {}
  Value(std::string v) : v_(std::move(v)) {}
  Value(const char* v) : v_(std::string(v)) {}
  Value(bool v) : v_(v) {}

  static Value null() { return Value(); }

  bool is_null() const { return std::holds_alternative<std::monostate>(v_); }
  /// Type of a non-null value. Undefined for null.
  ColumnType type() const;

  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }

  /// Numeric view of an int64 or float64 value.
  double as_number() const;
  bool is_numeric() const {
    return std::holds_alternative<std::int64_t>(v_) || std::holds_alternative<double>(v_);
  }

  const Storage& storage() const { return v_; }

  /// Exact structural equality (same type, same value; null == null).
  friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }

  std::string to_string() const;

 private:
  Storage v_;
};

/// Three-way comparison of two same-typed non-null values; TypeError otherwise.
int compare(const Value& a, const Value& b);

/// Total order over all values including null and mixed types.
bool canonical_less(const Value& a, const Value& b);

enum class CompareOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CompareOp op);
std::optional<CompareOp> parse_compare_op(std::string_view s);

/// Predicate semantics: false whenever either side is null.
bool apply_compare(const Value& lhs, CompareOp op, const Value& rhs);

}  // namespace pvd

template <>
struct std::hash<pvd::Value> {
  std::size_t operator()(const pvd::Value& v) const noexcept;
};
