#include <charconv>
#include <fstream>
#include <sstream>

#include "pvd/errors.hpp"
#include "pvd/relation.hpp"

namespace pvd {

namespace {

struct Cell {
  std::string text;
  bool quoted = false;
};

// RFC 4180 record splitter. Returns false at end of input.
bool read_record(std::istream& in, std::vector<Cell>& out) {
  out.clear();
  int ch = in.peek();
  if (ch == EOF) return false;
  Cell cur;
  bool in_quotes = false;
  while (true) {
    ch = in.get();
    if (ch == EOF) {
      out.push_back(std::move(cur));
      return true;
    }
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          cur.text.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        cur.text.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      cur.quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur = Cell{};
    } else if (c == '\r') {
      // swallow; '\n' terminates
    } else if (c == '\n') {
      out.push_back(std::move(cur));
      return true;
    } else {
      cur.text.push_back(c);
    }
  }
}

}  // namespace

std::optional<Value> parse_cell(std::string_view text, ColumnType t) {
  switch (t) {
    case ColumnType::Int64: {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) return std::nullopt;
      return Value(v);
    }
    case ColumnType::Float64: {
      // from_chars for double is available in libstdc++ 11.
      double v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || p != text.data() + text.size() || text.empty()) return std::nullopt;
      return Value(v);
    }
    case ColumnType::Bool:
      if (text == "true" || text == "1" || text == "TRUE" || text == "True") return Value(true);
      if (text == "false" || text == "0" || text == "FALSE" || text == "False") return Value(false);
      return std::nullopt;
    case ColumnType::String: return Value(std::string(text));
  }
  return std::nullopt;
}

Relation load_csv(const std::filesystem::path& path, const std::string& name, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Cell> cells;
  if (!read_record(in, cells)) throw SchemaMismatch(path.string() + ": missing header row");
  if (cells.size() != schema.size())
    throw SchemaMismatch(path.string() + ": header has " + std::to_string(cells.size()) + " columns, expected " +
                         std::to_string(schema.size()));
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (cells[i].text != schema[i].name)
      throw SchemaMismatch(path.string() + ": header column " + std::to_string(i) + " is '" + cells[i].text +
                           "', expected '" + schema[i].name + "'");

  RelationBuilder builder(name, schema);
  std::size_t row = 0;
  std::vector<Value> values(schema.size());
  while (read_record(in, cells)) {
    ++row;
    if (cells.size() == 1 && cells[0].text.empty() && !cells[0].quoted) continue;  // blank line
    if (cells.size() != schema.size())
      throw ParseError(row, cells.size() < schema.size() ? schema[cells.size()].name : schema.back().name,
                       "expected " + std::to_string(schema.size()) + " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const Cell& cell = cells[c];
      if (cell.text.empty() && !cell.quoted) {
        values[c] = Value::null();
        continue;
      }
      auto v = parse_cell(cell.text, schema[c].type);
      if (!v) {
        std::string reason = schema[c].type == ColumnType::Bool ? "not a boolean" : "non-numeric";
        throw ParseError(row, schema[c].name, reason + " value '" + cell.text + "'");
      }
      values[c] = std::move(*v);
    }
    builder.add_row(values);
  }
  return std::move(builder).finish();
}

namespace {

std::string csv_escape(const std::string& s) {
  bool needs = s.empty() || s.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const Relation& rel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t c = 0; c < rel.column_count(); ++c) out << (c ? "," : "") << csv_escape(rel.schema()[c].name);
  out << '\n';
  std::ostringstream num;
  num.precision(17);
  for (std::size_t r = 0; r < rel.row_count(); ++r) {
    for (std::size_t c = 0; c < rel.column_count(); ++c) {
      if (c) out << ',';
      const Column& col = rel.columns()[c];
      if (col.is_null(r)) continue;
      switch (col.type()) {
        case ColumnType::Int64: out << col.ints()[r]; break;
        case ColumnType::Float64:
          num.str("");
          num << col.floats()[r];
          out << num.str();
          break;
        case ColumnType::String: out << csv_escape(col.strings()[r]); break;
        case ColumnType::Bool: out << (col.bools()[r] ? "true" : "false"); break;
      }
    }
    out << '\n';
  }
}

}  // namespace pvd
