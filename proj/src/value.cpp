#include "pvd/value.hpp"

#include <cmath>
#include <sstream>

#include "pvd/errors.hpp"

namespace pvd {

std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::Int64: return "int64";
    case ColumnType::Float64: return "float64";
    case ColumnType::String: return "string";
    case ColumnType::Bool: return "bool";
  }
  return "?";
}

std::optional<ColumnType> parse_column_type(std::string_view s) {
  if (s == "int64") return ColumnType::Int64;
  if (s == "float64") return ColumnType::Float64;
  if (s == "string") return ColumnType::String;
  if (s == "bool") return ColumnType::Bool;
  return std::nullopt;
}

ColumnType Value::type() const {
  switch (v_.index()) {
    case 1: return ColumnType::Int64;
    case 2: return ColumnType::Float64;
    case 3: return ColumnType::String;
    case 4: return ColumnType::Bool;
    default: throw TypeError("null value has no type");
  }
}

double Value::as_number() const {
  if (auto* i = std::get_if<std::int64_t>(&v_)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v_)) return *d;
  throw TypeError("value " + to_string() + " is not numeric");
}

std::string Value::to_string() const {
  std::ostringstream os;
  switch (v_.index()) {
    case 0: return "null";
    case 1: os << as_int(); break;
    case 2: os.precision(17); os << as_float(); break;
    case 3: os << '"' << as_string() << '"'; break;
    case 4: os << (as_bool() ? "true" : "false"); break;
  }
  return os.str();
}

int compare(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) throw TypeError("comparison with null");
  if (a.storage().index() != b.storage().index())
    throw TypeError("cannot compare " + std::string(to_string(a.type())) + " with " +
                    std::string(to_string(b.type())));
  switch (a.storage().index()) {
    case 1: return a.as_int() < b.as_int() ? -1 : (a.as_int() > b.as_int() ? 1 : 0);
    case 2: return a.as_float() < b.as_float() ? -1 : (a.as_float() > b.as_float() ? 1 : 0);
    case 3: {
      int c = a.as_string().compare(b.as_string());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    default: return static_cast<int>(a.as_bool()) - static_cast<int>(b.as_bool());
  }
}

bool canonical_less(const Value& a, const Value& b) {
  std::size_t ia = a.storage().index(), ib = b.storage().index();
  if (ia != ib) return ia < ib;
  if (ia == 0) return false;
  if (ia == 2) {
    // Total order for doubles (NaN last).
    double x = a.as_float(), y = b.as_float();
    if (std::isnan(x)) return false;
    if (std::isnan(y)) return true;
    return x < y;
  }
  return compare(a, b) < 0;
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

std::optional<CompareOp> parse_compare_op(std::string_view s) {
  if (s == "=" || s == "==") return CompareOp::Eq;
  if (s == "!=" || s == "<>") return CompareOp::Ne;
  if (s == "<") return CompareOp::Lt;
  if (s == "<=") return CompareOp::Le;
  if (s == ">") return CompareOp::Gt;
  if (s == ">=") return CompareOp::Ge;
  return std::nullopt;
}

bool apply_compare(const Value& lhs, CompareOp op, const Value& rhs) {
  if (lhs.is_null() || rhs.is_null()) return false;
  int c = compare(lhs, rhs);
  switch (op) {
    case CompareOp::Eq: return c == 0;
    case CompareOp::Ne: return c != 0;
    case CompareOp::Lt: return c < 0;
    case CompareOp::Le: return c <= 0;
    case CompareOp::Gt: return c > 0;
    case CompareOp::Ge: return c >= 0;
  }
  return false;
}

}  // namespace pvd

std::size_t std::hash<pvd::Value>::operator()(const pvd::Value& v) const noexcept {
  std::size_t seed = v.storage().index() * 0x9e3779b97f4a7c15ULL;
  switch (v.storage().index()) {
    case 1: return seed ^ std::hash<std::int64_t>{}(v.as_int());
    case 2: return seed ^ std::hash<double>{}(v.as_float());
    case 3: return seed ^ std::hash<std::string>{}(v.as_string());
    case 4: return seed ^ static_cast<std::size_t>(v.as_bool());
    default: return seed;
  }
}
