#include "pvd/structures.hpp"

#include <algorithm>
#include <type_traits>
#include <string_view>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "pvd/errors.hpp"
#include "pvd/oracle.hpp"

namespace pvd {

std::string_view to_string(StructureFamily f) {
  switch (f) {
    case StructureFamily::BaseScan: return "BaseScan";
    case StructureFamily::HashIndex: return "HashIndex";
    case StructureFamily::SortedRangeIndex: return "SortedRangeIndex";
    case StructureFamily::PrefixSumCube: return "PrefixSumCube";
  }
  return "?";
}

std::optional<StructureFamily> parse_structure_family(std::string_view s) {
  for (auto f : {StructureFamily::BaseScan, StructureFamily::HashIndex, StructureFamily::SortedRangeIndex,
                 StructureFamily::PrefixSumCube})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

namespace {

std::string atom_text(const Atom& a) {
  std::string s = a.column + std::string(to_string(a.op));
  s += a.choice ? "$" + a.choice->id : a.constant.to_string();
  return s;
}

std::string join_atoms(const Predicate& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "&" : "") + atom_text(p[i]);
  return s;
}

}  // namespace

std::string StructureKind::describe() const {
  std::ostringstream os;
  os << to_string(family);
  switch (family) {
    case StructureFamily::BaseScan: break;
    case StructureFamily::HashIndex:
    case StructureFamily::SortedRangeIndex: os << "(" << column << ";" << join_atoms(probe) << ")"; break;
    case StructureFamily::PrefixSumCube: {
      os << "(dims=";
      for (std::size_t i = 0; i < dims.size(); ++i) {
        os << (i ? "," : "") << dims[i].column << (dims[i].group_key ? "*" : "");
        if (!dims[i].atoms.empty()) os << "[" << join_atoms(dims[i].atoms) << "]";
      }
      os << ";keys=";
      for (std::size_t i = 0; i < group_keys.size(); ++i) os << (i ? "," : "") << group_keys[i];
      os << ";aggs=";
      for (std::size_t i = 0; i < aggregates.size(); ++i)
        os << (i ? "," : "") << to_string(aggregates[i].func) << "(" << aggregates[i].column.value_or("*") << ")->"
           << aggregates[i].as;
      os << ")";
      break;
    }
  }
  return os.str();
}

std::set<std::string> StructureKind::eval_choices() const {
  std::set<std::string> out;
  for (const auto& a : probe)
    if (a.choice) out.insert(a.choice->id);
  for (const auto& d : dims)
    for (const auto& a : d.atoms)
      if (a.choice) out.insert(a.choice->id);
  return out;
}

// ---- payload encoding helpers ----------------------------------------------

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'V', 'D', 'S'};
constexpr std::uint16_t kPayloadVersion = 1;

enum ArrayTag : std::uint8_t { kIntPrefix = 0, kFloatPlain = 1, kDdPrefix = 2, kIntPlain = 3 };

std::size_t tag_width(std::uint8_t tag) { return tag == kDdPrefix ? 16 : 8; }

void write_header(ByteWriter& w, StructureFamily f, std::uint32_t dims, std::uint32_t arrays, std::uint64_t fp,
                  std::uint64_t cells) {
  for (auto b : kMagic) w.u8(b);
  w.u16(kPayloadVersion);
  w.u16(static_cast<std::uint16_t>(f));
  w.u32(dims);
  w.u32(arrays);
  w.u64(fp);
  w.u64(cells);
}

void encode_value(ByteWriter& w, const Value& v) {
  w.u8(static_cast<std::uint8_t>(v.storage().index()));
  switch (v.storage().index()) {
    case 1: w.i64(v.as_int()); break;
    case 2: w.f64(v.as_float()); break;
    case 3: w.str(v.as_string()); break;
    case 4: w.u8(v.as_bool() ? 1 : 0); break;
    default: break;
  }
}

Value decode_value(ByteReader& r) {
  switch (r.u8()) {
    case 0: return Value::null();
    case 1: return Value(r.i64());
    case 2: return Value(r.f64());
    case 3: return Value(r.str());
    case 4: return Value(r.u8() != 0);
    default: throw Error("bad value tag in payload");
  }
}

std::uint64_t fingerprint_of(const StructureKind& kind, const Relation& input, const Binding& baked) {
  Fnv1a h;
  h.update_u64(relation_digest(input));
  h.update(kind.describe());
  for (const auto& [k, v] : baked) {
    h.update(k);
    h.update(v.to_string());
  }
  return h.digest();
}

// Double-double accumulation keeps range sums of float prefix arrays accurate
// after inclusion-exclusion.
struct DD {
  double hi = 0, lo = 0;
};

DD two_sum(double a, double b) {
  double s = a + b;
  double bb = s - a;
  double err = (a - (s - bb)) + (b - bb);
  return {s, err};
}

DD dd_add(DD a, DD b) {
  DD s = two_sum(a.hi, b.hi);
  double lo = s.lo + a.lo + b.lo;
  double hi = s.hi + lo;
  return {hi, lo - (hi - s.hi)};
}

DD dd_neg(DD a) { return {-a.hi, -a.lo}; }

std::size_t null_prefix(const Column& c) {
  std::size_t n = 0;
  while (n < c.size() && c.is_null(n)) ++n;
  return n;
}

// Row order by one column: nulls first, then ascending, stable.
std::vector<std::size_t> sorted_order(const Relation& rel, std::size_t col) {
  std::vector<std::size_t> order(rel.row_count());
  std::iota(order.begin(), order.end(), 0);
  const Column& c = rel.columns()[col];
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return canonical_less(c.get(a), c.get(b)); });
  return order;
}

// Index of first element in [begin,end) of sorted column not less than v (upper=false) or greater than v.
std::size_t bound(const Column& c, std::size_t begin, std::size_t end, const Value& v, bool upper) {
  while (begin < end) {
    std::size_t mid = begin + (end - begin) / 2;
    int cmp = compare(c.get(mid), v);
    if (upper ? cmp <= 0 : cmp < 0) begin = mid + 1;
    else end = mid;
  }
  return begin;
}

Value atom_operand(const Atom& a, const Binding& b) {
  if (!a.choice) return a.constant;
  auto it = b.find(a.choice->id);
  if (it == b.end()) throw UnboundChoice(a.choice->id);
  return it->second;
}

enum class Role : std::uint8_t { RowCount, NonNull, IntSum, FloatSum, Min, Max };

struct CubeLayout {
  // Per aggregate: (value array, non-null array); count(*) uses array 0 for both.
  std::vector<std::pair<std::size_t, std::size_t>> agg_arrays;
  std::vector<std::uint8_t> tags;
  std::vector<Role> roles;
  std::vector<std::size_t> source_columns;  // per array; unused for RowCount
};

CubeLayout cube_layout(const StructureKind& kind, const Relation& input) {
  CubeLayout l;
  auto add = [&](std::uint8_t tag, Role role, std::size_t col) {
    l.tags.push_back(tag);
    l.roles.push_back(role);
    l.source_columns.push_back(col);
    return l.tags.size() - 1;
  };
  add(kIntPrefix, Role::RowCount, 0);
  for (const auto& a : kind.aggregates) {
    if (!a.column) {
      if (a.func != AggFunc::Count) throw TypeError("aggregate needs a column");
      l.agg_arrays.emplace_back(0, 0);
      continue;
    }
    std::size_t col = input.column_index(*a.column);
    ColumnType t = input.schema()[col].type;
    if (a.func == AggFunc::Count) {
      std::size_t nn = add(kIntPrefix, Role::NonNull, col);
      l.agg_arrays.emplace_back(nn, nn);
      continue;
    }
    if (t != ColumnType::Int64 && t != ColumnType::Float64)
      throw TypeError("cube measure '" + *a.column + "' must be numeric");
    bool is_int = t == ColumnType::Int64;
    std::size_t v;
    std::size_t nn;
    if (a.func == AggFunc::Min || a.func == AggFunc::Max) {
      v = add(is_int ? kIntPlain : kFloatPlain, a.func == AggFunc::Min ? Role::Min : Role::Max, col);
      nn = add(kIntPlain, Role::NonNull, col);
    } else {
      v = add(is_int ? kIntPrefix : kDdPrefix, is_int ? Role::IntSum : Role::FloatSum, col);
      nn = add(kIntPrefix, Role::NonNull, col);
    }
    l.agg_arrays.emplace_back(v, nn);
  }
  return l;
}

}  // namespace

// ---- decoded forms ---------------------------------------------------------

struct BuiltStructure::Decoded {
  StructureFamily family = StructureFamily::BaseScan;
  std::shared_ptr<const Relation> rel;
  std::size_t rel_offset = 0;
  std::unordered_map<Value, std::pair<std::size_t, std::size_t>> directory;
  std::size_t first_non_null = 0;

  struct Axis {
    ColumnType type = ColumnType::Int64;
    bool has_null = false;
    std::vector<Value> values;  // non-null, ascending
    std::size_t cardinality() const { return values.size() + (has_null ? 1 : 0); }
  };
  std::vector<Axis> axes;
  std::vector<std::size_t> strides;
  std::size_t cells = 0;
  std::vector<std::uint8_t> tags;
  std::vector<std::size_t> offsets;
  std::vector<std::pair<std::size_t, std::size_t>> agg_arrays;
  const std::uint8_t* base = nullptr;
};

namespace {

using Decoded = BuiltStructure::Decoded;

std::shared_ptr<const Decoded> decode(const StructureKind& kind, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error("structure payload has a bad header");
  ByteReader r(bytes, 4);
  if (r.u16() != kPayloadVersion) throw Error("unsupported structure payload version");
  auto family = static_cast<StructureFamily>(r.u16());
  if (family != kind.family) throw Error("payload family does not match structure kind");
  std::uint32_t ndims = r.u32();
  std::uint32_t narrays = r.u32();
  r.u64();  // fingerprint
  std::uint64_t cells = r.u64();

  auto d = std::make_shared<Decoded>();
  d->family = family;
  switch (family) {
    case StructureFamily::BaseScan:
      d->rel_offset = r.position();
      d->rel = std::make_shared<const Relation>(decode_relation(r));
      break;
    case StructureFamily::HashIndex: {
      std::uint64_t entries = r.u64();
      for (std::uint64_t i = 0; i < entries; ++i) {
        Value key = decode_value(r);
        std::uint64_t start = r.u64(), count = r.u64();
        d->directory.emplace(std::move(key), std::make_pair(start, count));
      }
      d->rel_offset = r.position();
      d->rel = std::make_shared<const Relation>(decode_relation(r));
      break;
    }
    case StructureFamily::SortedRangeIndex:
      d->first_non_null = r.u64();
      d->rel_offset = r.position();
      d->rel = std::make_shared<const Relation>(decode_relation(r));
      break;
    case StructureFamily::PrefixSumCube: {
      if (ndims != kind.dims.size()) throw Error("cube payload dimension count differs from kind");
      for (std::uint32_t i = 0; i < ndims; ++i) {
        Decoded::Axis ax;
        ax.type = static_cast<ColumnType>(r.u8());
        ax.has_null = r.u8() != 0;
        std::uint64_t n = r.u64();
        for (std::uint64_t k = 0; k < n; ++k) ax.values.push_back(decode_value(r));
        d->axes.push_back(std::move(ax));
      }
      d->strides.assign(ndims, 1);
      std::size_t total = 1;
      for (std::size_t i = ndims; i-- > 0;) {
        d->strides[i] = total;
        total *= d->axes[i].cardinality();
      }
      if (ndims == 0) total = 1;
      if (total != cells) throw Error("cube payload cell count mismatch");
      d->cells = cells;
      for (std::uint32_t a = 0; a < narrays; ++a) {
        std::uint8_t tag = r.u8();
        d->tags.push_back(tag);
        d->offsets.push_back(r.position());
        r.skip(cells * tag_width(tag));
      }
      // Rebuild the aggregate → array mapping from the kind and tag sequence.
      std::size_t next = 1;
      for (const auto& a : kind.aggregates) {
        if (!a.column) {
          d->agg_arrays.emplace_back(0, 0);
        } else if (a.func == AggFunc::Count) {
          d->agg_arrays.emplace_back(next, next);
          next += 1;
        } else {
          d->agg_arrays.emplace_back(next, next + 1);
          next += 2;
        }
      }
      if (next != narrays) throw Error("cube payload array count differs from kind");
      d->base = bytes.data();
      break;
    }
  }
  return d;
}

}  // namespace

BuiltStructure BuiltStructure::from_payload(StructureKind kind, std::vector<std::uint8_t> payload, Binding baked) {
  BuiltStructure s;
  s.payload_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(payload));
  s.decoded_ = decode(kind, *s.payload_);
  s.kind_ = std::move(kind);
  s.baked_ = std::move(baked);
  return s;
}

std::uint64_t BuiltStructure::fingerprint() const {
  return static_cast<std::uint64_t>(load_i64(payload_->data() + 16));
}

// ---- build -----------------------------------------------------------------

namespace {

std::vector<std::uint8_t> build_relation_payload(StructureFamily f, const Relation& rel, std::uint64_t fp) {
  ByteWriter w;
  write_header(w, f, 0, 0, fp, 0);
  encode_relation(w, rel);
  return w.take();
}

struct CubeAxes {
  std::vector<std::size_t> columns;
  std::vector<Decoded::Axis> axes;
  std::vector<std::vector<std::uint32_t>> codes;  // per axis, per row; null rows get slot 0
  std::vector<std::size_t> strides;
  std::size_t cells = 1;
};

template <typename T, typename Get>
void typed_axis(const Column& c, Decoded::Axis& ax, std::vector<std::uint32_t>& codes, Get get) {
  std::vector<T> vals;
  vals.reserve(c.size());
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (c.is_null(r)) ax.has_null = true;
    else vals.push_back(get(r));
  }
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  std::uint32_t off = ax.has_null ? 1 : 0;
  std::unordered_map<T, std::uint32_t> index;
  index.reserve(vals.size());
  for (std::size_t k = 0; k < vals.size(); ++k) index.emplace(vals[k], static_cast<std::uint32_t>(k) + off);
  codes.resize(c.size());
  for (std::size_t r = 0; r < c.size(); ++r) codes[r] = c.is_null(r) ? 0 : index.at(get(r));
  ax.values.reserve(vals.size());
  for (const auto& v : vals) {
    if constexpr (std::is_same_v<T, std::string_view>) ax.values.emplace_back(std::string(v));
    else ax.values.emplace_back(v);
  }
}

void generic_axis(const Column& c, Decoded::Axis& ax, std::vector<std::uint32_t>& codes) {
  std::vector<Value> vals;
  vals.reserve(c.size());
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (c.is_null(r)) ax.has_null = true;
    else vals.push_back(c.get(r));
  }
  std::sort(vals.begin(), vals.end(), canonical_less);
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  std::uint32_t off = ax.has_null ? 1 : 0;
  std::unordered_map<Value, std::uint32_t> index;
  for (std::size_t k = 0; k < vals.size(); ++k) index.emplace(vals[k], static_cast<std::uint32_t>(k) + off);
  codes.resize(c.size());
  for (std::size_t r = 0; r < c.size(); ++r) codes[r] = c.is_null(r) ? 0 : index.at(c.get(r));
  ax.values = std::move(vals);
}

CubeAxes cube_axes(const StructureKind& kind, const Relation& input, std::size_t cap) {
  CubeAxes ca;
  for (const auto& dim : kind.dims) {
    std::size_t col = input.column_index(dim.column);
    ca.columns.push_back(col);
    const Column& c = input.columns()[col];
    Decoded::Axis ax;
    ax.type = c.type();
    auto& codes = ca.codes.emplace_back();
    if (c.type() == ColumnType::Int64)
      typed_axis<std::int64_t>(c, ax, codes, [&](std::size_t r) { return c.ints()[r]; });
    else if (c.type() == ColumnType::String)
      typed_axis<std::string_view>(c, ax, codes, [&](std::size_t r) { return std::string_view(c.strings()[r]); });
    else
      generic_axis(c, ax, codes);
    ca.axes.push_back(std::move(ax));
  }
  std::size_t total = 1;
  bool overflow = false;
  for (const auto& ax : ca.axes) {
    std::size_t n = ax.cardinality();
    if (n != 0 && total > std::numeric_limits<std::size_t>::max() / n) overflow = true;
    else total *= n;
  }
  if (overflow) throw CapExceeded(std::numeric_limits<std::size_t>::max(), cap);
  if (total > cap) throw CapExceeded(total, cap);
  ca.cells = total;
  ca.strides.assign(ca.axes.size(), 1);
  std::size_t s = 1;
  for (std::size_t i = ca.axes.size(); i-- > 0;) {
    ca.strides[i] = s;
    s *= ca.axes[i].cardinality();
  }
  return ca;
}

std::vector<std::uint8_t> build_cube(const StructureKind& kind, const Relation& input, std::uint64_t fp,
                                     std::size_t cap) {
  CubeAxes ca = cube_axes(kind, input, cap);
  CubeLayout layout = cube_layout(kind, input);
  std::size_t narr = layout.tags.size();
  std::size_t cells = ca.cells;

  std::vector<std::vector<std::int64_t>> ints(narr);
  std::vector<std::vector<double>> floats(narr);
  std::vector<std::vector<DD>> dds(narr);
  for (std::size_t a = 0; a < narr; ++a) {
    switch (layout.tags[a]) {
      case kIntPrefix:
      case kIntPlain: ints[a].assign(cells, 0); break;
      case kFloatPlain: floats[a].assign(cells, 0.0); break;
      case kDdPrefix: dds[a].assign(cells, DD{}); break;
    }
  }
  for (std::size_t r = 0; r < input.row_count(); ++r) {
    std::size_t cell = 0;
    for (std::size_t i = 0; i < ca.axes.size(); ++i) {
      cell += ca.codes[i][r] * ca.strides[i];
    }
    ints[0][cell] += 1;
    for (std::size_t a = 1; a < narr; ++a) {
      const Column& c = input.columns()[layout.source_columns[a]];
      if (c.is_null(r)) continue;
      switch (layout.roles[a]) {
        case Role::RowCount:
        case Role::NonNull: ints[a][cell] += 1; break;
        case Role::IntSum: ints[a][cell] += c.ints()[r]; break;
        case Role::FloatSum: dds[a][cell] = dd_add(dds[a][cell], DD{c.floats()[r], 0.0}); break;
        case Role::Min:
        case Role::Max: {
          // The paired non-null array (a + 1) is still zero for the first value in this cell.
          bool first = ints[a + 1][cell] == 0;
          bool want_min = layout.roles[a] == Role::Min;
          if (layout.tags[a] == kIntPlain) {
            std::int64_t v = c.ints()[r];
            if (first || (want_min ? v < ints[a][cell] : v > ints[a][cell])) ints[a][cell] = v;
          } else {
            double v = c.floats()[r];
            if (first || (want_min ? v < floats[a][cell] : v > floats[a][cell])) floats[a][cell] = v;
          }
          break;
        }
      }
    }
  }

  // Inclusive prefix along every axis for prefix-tagged arrays.
  for (std::size_t a = 0; a < narr; ++a) {
    std::uint8_t tag = layout.tags[a];
    if (tag != kIntPrefix && tag != kDdPrefix) continue;
    for (std::size_t axis = 0; axis < ca.axes.size(); ++axis) {
      std::size_t stride = ca.strides[axis];
      std::size_t card = ca.axes[axis].cardinality();
      for (std::size_t cell = 0; cell < cells; ++cell) {
        if ((cell / stride) % card == 0) continue;
        if (tag == kIntPrefix) ints[a][cell] += ints[a][cell - stride];
        else dds[a][cell] = dd_add(dds[a][cell], dds[a][cell - stride]);
      }
    }
  }

  ByteWriter w;
  write_header(w, StructureFamily::PrefixSumCube, static_cast<std::uint32_t>(ca.axes.size()),
               static_cast<std::uint32_t>(narr), fp, cells);
  for (const auto& ax : ca.axes) {
    w.u8(static_cast<std::uint8_t>(ax.type));
    w.u8(ax.has_null ? 1 : 0);
    w.u64(ax.values.size());
    for (const auto& v : ax.values) encode_value(w, v);
  }
  for (std::size_t a = 0; a < narr; ++a) {
    w.u8(layout.tags[a]);
    for (std::size_t cell = 0; cell < cells; ++cell) {
      switch (layout.tags[a]) {
        case kIntPrefix:
        case kIntPlain: w.i64(ints[a][cell]); break;
        case kFloatPlain: w.f64(floats[a][cell]); break;
        case kDdPrefix:
          w.f64(dds[a][cell].hi);
          w.f64(dds[a][cell].lo);
          break;
      }
    }
  }
  return w.take();
}

}  // namespace

std::size_t cube_cell_count(const StructureKind& kind, const Relation& input) {
  return cube_axes(kind, input, std::numeric_limits<std::size_t>::max()).cells;
}

BuiltStructure build(const StructureKind& kind, const Relation& input, const Binding& baked, std::size_t cell_cap) {
  std::uint64_t fp = fingerprint_of(kind, input, baked);
  std::vector<std::uint8_t> payload;
  switch (kind.family) {
    case StructureFamily::BaseScan: payload = build_relation_payload(kind.family, input, fp); break;
    case StructureFamily::HashIndex: {
      std::size_t col = input.column_index(kind.column);
      auto order = sorted_order(input, col);
      Relation sorted = input.gather(order);
      const Column& c = sorted.columns()[col];
      std::vector<std::tuple<Value, std::size_t, std::size_t>> dir;
      for (std::size_t r = null_prefix(c); r < c.size();) {
        std::size_t end = r + 1;
        Value v = c.get(r);
        while (end < c.size() && c.get(end) == v) ++end;
        dir.emplace_back(std::move(v), r, end - r);
        r = end;
      }
      ByteWriter w;
      write_header(w, kind.family, 1, 0, fp, 0);
      w.u64(dir.size());
      for (const auto& [v, start, count] : dir) {
        encode_value(w, v);
        w.u64(start);
        w.u64(count);
      }
      encode_relation(w, sorted);
      payload = w.take();
      break;
    }
    case StructureFamily::SortedRangeIndex: {
      std::size_t col = input.column_index(kind.column);
      Relation sorted = input.gather(sorted_order(input, col));
      ByteWriter w;
      write_header(w, kind.family, 1, 0, fp, 0);
      w.u64(null_prefix(sorted.columns()[col]));
      encode_relation(w, sorted);
      payload = w.take();
      break;
    }
    case StructureFamily::PrefixSumCube: payload = build_cube(kind, input, fp, cell_cap); break;
  }
  return BuiltStructure::from_payload(kind, std::move(payload), baked);
}

// ---- eval ------------------------------------------------------------------

namespace {

Relation eval_cube(const StructureKind& kind, const Decoded& d, const Binding& b) {
  std::size_t nd = d.axes.size();
  // Output schema: group keys then aggregates.
  Schema schema;
  std::vector<std::size_t> key_axes;
  for (const auto& k : kind.group_keys) {
    for (std::size_t i = 0; i < nd; ++i)
      if (kind.dims[i].column == k) {
        key_axes.push_back(i);
        schema.push_back({k, d.axes[i].type});
      }
  }
  for (std::size_t g = 0; g < kind.aggregates.size(); ++g) {
    const auto& a = kind.aggregates[g];
    ColumnType t = ColumnType::Int64;
    if (a.func == AggFunc::Avg) t = ColumnType::Float64;
    else if (a.func != AggFunc::Count) {
      std::uint8_t tag = d.tags[d.agg_arrays[g].first];
      t = (tag == kDdPrefix || tag == kFloatPlain) ? ColumnType::Float64 : ColumnType::Int64;
    }
    schema.push_back({a.as, t});
  }

  // Per-axis index ranges [lo, hi] from the bound atoms.
  std::vector<std::int64_t> lo(nd), hi(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    const auto& ax = d.axes[i];
    lo[i] = 0;
    hi[i] = static_cast<std::int64_t>(ax.cardinality()) - 1;
    if (kind.dims[i].atoms.empty()) continue;
    auto off = static_cast<std::int64_t>(ax.has_null ? 1 : 0);
    lo[i] = std::max(lo[i], off);
    for (const auto& a : kind.dims[i].atoms) {
      Value v = atom_operand(a, b);
      if (v.is_null()) {
        hi[i] = -1;
        continue;
      }
      auto lb = [&] {
        return static_cast<std::int64_t>(std::lower_bound(ax.values.begin(), ax.values.end(), v,
                                                          [](const Value& x, const Value& y) { return compare(x, y) < 0; }) -
                                         ax.values.begin());
      };
      auto ub = [&] {
        return static_cast<std::int64_t>(std::upper_bound(ax.values.begin(), ax.values.end(), v,
                                                          [](const Value& x, const Value& y) { return compare(x, y) < 0; }) -
                                         ax.values.begin());
      };
      if (!ax.values.empty() && v.type() != ax.type) throw TypeError("cube probe type differs from axis type");
      switch (a.op) {
        case CompareOp::Ge: lo[i] = std::max(lo[i], off + lb()); break;
        case CompareOp::Gt: lo[i] = std::max(lo[i], off + ub()); break;
        case CompareOp::Le: hi[i] = std::min(hi[i], off + ub() - 1); break;
        case CompareOp::Lt: hi[i] = std::min(hi[i], off + lb() - 1); break;
        case CompareOp::Eq:
          lo[i] = std::max(lo[i], off + lb());
          hi[i] = std::min(hi[i], off + ub() - 1);
          break;
        case CompareOp::Ne: throw Error("cube axes cannot answer '!=' atoms");
      }
    }
  }
  RelationBuilder out("cube", schema);
  if (d.cells == 0) return std::move(out).finish();
  for (std::size_t i = 0; i < nd; ++i)
    if (lo[i] > hi[i]) return std::move(out).finish();

  const std::uint8_t* base = d.base;
  auto int_at = [&](std::size_t arr, std::size_t cell) { return load_i64(base + d.offsets[arr] + 8 * cell); };
  auto f64_at = [&](std::size_t arr, std::size_t cell) { return load_f64(base + d.offsets[arr] + 8 * cell); };
  auto dd_at = [&](std::size_t arr, std::size_t cell) {
    const std::uint8_t* p = base + d.offsets[arr] + 16 * cell;
    return DD{load_f64(p), load_f64(p + 8)};
  };

  std::vector<std::int64_t> blo(nd), bhi(nd);
  const std::size_t corners = std::size_t{1} << nd;
  // Prefix-array range sum over the box [blo, bhi] by inclusion-exclusion.
  auto box_int = [&](std::size_t arr) {
    std::int64_t total = 0;
    for (std::size_t mask = 0; mask < corners; ++mask) {
      std::size_t cell = 0;
      bool skip = false;
      for (std::size_t i = 0; i < nd; ++i) {
        std::int64_t c = (mask >> i) & 1 ? blo[i] - 1 : bhi[i];
        if (c < 0) {
          skip = true;
          break;
        }
        cell += static_cast<std::size_t>(c) * d.strides[i];
      }
      if (skip) continue;
      std::int64_t v = int_at(arr, cell);
      total += (std::popcount(mask) & 1) ? -v : v;
    }
    return total;
  };
  auto box_dd = [&](std::size_t arr) {
    DD total;
    for (std::size_t mask = 0; mask < corners; ++mask) {
      std::size_t cell = 0;
      bool skip = false;
      for (std::size_t i = 0; i < nd; ++i) {
        std::int64_t c = (mask >> i) & 1 ? blo[i] - 1 : bhi[i];
        if (c < 0) {
          skip = true;
          break;
        }
        cell += static_cast<std::size_t>(c) * d.strides[i];
      }
      if (skip) continue;
      DD v = dd_at(arr, cell);
      total = dd_add(total, (std::popcount(mask) & 1) ? dd_neg(v) : v);
    }
    return total.hi + total.lo;
  };
  // Plain arrays: visit every cell in the box.
  auto box_extreme = [&](std::size_t arr, std::size_t nn_arr, bool want_min) -> Value {
    std::vector<std::int64_t> idx(blo);
    Value best;
    while (true) {
      std::size_t cell = 0;
      for (std::size_t i = 0; i < nd; ++i) cell += static_cast<std::size_t>(idx[i]) * d.strides[i];
      if (int_at(nn_arr, cell) > 0) {
        Value v = d.tags[arr] == kIntPlain ? Value(int_at(arr, cell)) : Value(f64_at(arr, cell));
        if (best.is_null() || (want_min ? compare(v, best) < 0 : compare(v, best) > 0)) best = std::move(v);
      }
      std::size_t i = nd;
      while (i-- > 0) {
        if (++idx[i] <= bhi[i]) break;
        idx[i] = blo[i];
      }
      if (i == static_cast<std::size_t>(-1)) break;
    }
    return best;
  };

  std::vector<std::int64_t> key_idx(key_axes.size());
  for (std::size_t k = 0; k < key_axes.size(); ++k) key_idx[k] = lo[key_axes[k]];
  std::vector<Value> row;
  while (true) {
    blo = lo;
    bhi = hi;
    for (std::size_t k = 0; k < key_axes.size(); ++k) blo[key_axes[k]] = bhi[key_axes[k]] = key_idx[k];
    std::int64_t rows = box_int(0);
    if (rows > 0) {
      row.clear();
      for (std::size_t k = 0; k < key_axes.size(); ++k) {
        const auto& ax = d.axes[key_axes[k]];
        std::int64_t idx = key_idx[k] - (ax.has_null ? 1 : 0);
        row.push_back(idx < 0 ? Value::null() : ax.values[static_cast<std::size_t>(idx)]);
      }
      for (std::size_t g = 0; g < kind.aggregates.size(); ++g) {
        const auto& a = kind.aggregates[g];
        auto [va, na] = d.agg_arrays[g];
        if (a.func == AggFunc::Count) {
          row.emplace_back(va == 0 ? rows : box_int(va));
          continue;
        }
        if (a.func == AggFunc::Min || a.func == AggFunc::Max) {
          row.push_back(box_extreme(va, na, a.func == AggFunc::Min));
          continue;
        }
        std::int64_t nonnull = box_int(na);
        if (nonnull == 0) {
          row.push_back(Value::null());
          continue;
        }
        bool is_int = d.tags[va] == kIntPrefix;
        if (a.func == AggFunc::Sum) {
          if (is_int) row.emplace_back(box_int(va));
          else row.emplace_back(box_dd(va));
        } else {
          double sum = is_int ? static_cast<double>(box_int(va)) : box_dd(va);
          row.emplace_back(sum / static_cast<double>(nonnull));
        }
      }
      out.add_row(row);
    }
    std::size_t k = key_axes.size();
    while (k-- > 0) {
      if (++key_idx[k] <= hi[key_axes[k]]) break;
      key_idx[k] = lo[key_axes[k]];
    }
    if (k == static_cast<std::size_t>(-1)) break;
  }
  return std::move(out).finish();
}

}  // namespace

Relation eval(const BuiltStructure& s, const Binding& b) {
  for (const auto& [id, v] : s.baked()) {
    auto it = b.find(id);
    if (it != b.end() && !(it->second == v))
      throw StaleStructure("structure was built for " + id + "=" + v.to_string() + ", binding has " +
                           it->second.to_string());
  }
  const Decoded& d = s.decoded();
  const StructureKind& kind = s.kind();
  switch (kind.family) {
    case StructureFamily::BaseScan: return *d.rel;
    case StructureFamily::HashIndex: {
      Value v = atom_operand(kind.probe.at(0), b);
      if (!v.is_null() && d.rel->row_count() > 0 && v.type() != d.rel->column(kind.column).type())
        throw TypeError("hash probe type differs from key column");
      auto it = v.is_null() ? d.directory.end() : d.directory.find(v);
      std::vector<std::size_t> rows;
      if (it != d.directory.end()) {
        rows.resize(it->second.second);
        std::iota(rows.begin(), rows.end(), it->second.first);
      }
      return d.rel->gather(rows);
    }
    case StructureFamily::SortedRangeIndex: {
      const Column& c = d.rel->column(kind.column);
      std::size_t begin = d.first_non_null, end = c.size();
      for (const auto& a : kind.probe) {
        Value v = atom_operand(a, b);
        if (v.is_null()) {
          end = begin;
          continue;
        }
        switch (a.op) {
          case CompareOp::Ge: begin = std::max(begin, bound(c, d.first_non_null, c.size(), v, false)); break;
          case CompareOp::Gt: begin = std::max(begin, bound(c, d.first_non_null, c.size(), v, true)); break;
          case CompareOp::Le: end = std::min(end, bound(c, d.first_non_null, c.size(), v, true)); break;
          case CompareOp::Lt: end = std::min(end, bound(c, d.first_non_null, c.size(), v, false)); break;
          case CompareOp::Eq:
            begin = std::max(begin, bound(c, d.first_non_null, c.size(), v, false));
            end = std::min(end, bound(c, d.first_non_null, c.size(), v, true));
            break;
          case CompareOp::Ne: throw Error("range index cannot answer '!=' atoms");
        }
      }
      std::vector<std::size_t> rows;
      for (std::size_t r = begin; r < end; ++r) rows.push_back(r);
      return d.rel->gather(rows);
    }
    case StructureFamily::PrefixSumCube: return eval_cube(kind, d, b);
  }
  throw Error("unknown structure family");
}

// ---- match -----------------------------------------------------------------

namespace {

bool is_range_op(CompareOp op) {
  return op == CompareOp::Lt || op == CompareOp::Le || op == CompareOp::Gt || op == CompareOp::Ge;
}

bool contains_choice_node(const PlanNode& n) {
  if (n.kind == NodeKind::Choice) return true;
  for (const auto& c : n.children)
    if (contains_choice_node(*c)) return true;
  return false;
}

bool contains_unbounded_join(const PlanNode& n) {
  if (n.kind == NodeKind::Join && !n.max_fanout) return true;
  for (const auto& c : n.children)
    if (contains_unbounded_join(*c)) return true;
  return false;
}

template <typename Fn>
void visit(const PlanNode& n, const PlanNode* parent, bool under_choice, Fn&& fn) {
  fn(n, parent, under_choice);
  for (const auto& c : n.children) visit(*c, &n, under_choice || n.kind == NodeKind::Choice, fn);
}

// Filter chain rooted at `top`: all atoms, plus the first non-Filter node.
std::pair<Predicate, const PlanNode*> filter_chain(const PlanNode& top) {
  Predicate atoms;
  const PlanNode* cur = &top;
  while (cur->kind == NodeKind::Filter) {
    atoms.insert(atoms.end(), cur->predicate.begin(), cur->predicate.end());
    cur = &cur->input();
  }
  return {atoms, cur};
}

void match_basescan(const ChoicePlan& plan, std::vector<MatchResult>& out) {
  visit(*plan.root(), nullptr, false, [&](const PlanNode& n, const PlanNode*, bool under_choice) {
    if (n.kind != NodeKind::Scan || under_choice) return;
    MatchResult m;
    m.matched_node = n.id;
    m.kind.family = StructureFamily::BaseScan;
    m.build_input = scan(n.relation);
    out.push_back(std::move(m));
  });
}

void match_index(StructureFamily family, const ChoicePlan& plan, std::vector<MatchResult>& out) {
  visit(*plan.root(), nullptr, false, [&](const PlanNode& n, const PlanNode* parent, bool under_choice) {
    if (n.kind != NodeKind::Filter || under_choice) return;
    if (parent && parent->kind == NodeKind::Filter) return;  // only chain tops
    auto [atoms, base] = filter_chain(n);
    if (base->kind != NodeKind::Scan) return;
    std::vector<std::string> seen;
    for (const auto& a : atoms) {
      if (!a.choice) continue;
      bool eligible = family == StructureFamily::HashIndex ? a.op == CompareOp::Eq : is_range_op(a.op);
      if (!eligible || std::find(seen.begin(), seen.end(), a.column) != seen.end()) continue;
      seen.push_back(a.column);
      MatchResult m;
      m.matched_node = n.id;
      m.kind.family = family;
      m.kind.column = a.column;
      for (const auto& other : atoms) {
        bool probe = family == StructureFamily::HashIndex ? &other == &a
                                                          : other.column == a.column && is_range_op(other.op);
        (probe ? m.kind.probe : m.residual).push_back(other);
      }
      m.build_input = scan(base->relation);
      m.eval_choices = m.kind.eval_choices();
      out.push_back(std::move(m));
    }
  });
}

bool cube_measure_ok(const Aggregate& a, const Schema& in) {
  if (!a.column) return a.func == AggFunc::Count;
  auto it = std::find_if(in.begin(), in.end(), [&](const ColumnSpec& c) { return c.name == *a.column; });
  if (it == in.end()) return false;
  if (a.func == AggFunc::Count) return true;
  return it->type == ColumnType::Int64 || it->type == ColumnType::Float64;
}

void match_cube(const ChoicePlan& plan, const SchemaMap& sources, std::vector<MatchResult>& out) {
  visit(*plan.root(), nullptr, false, [&](const PlanNode& n, const PlanNode*, bool under_choice) {
    if (n.kind != NodeKind::GroupByAgg || under_choice) return;
    Predicate atoms;
    const PlanNode* cur = &n.input();
    while (cur->kind == NodeKind::Filter || cur->kind == NodeKind::Project) {
      if (cur->kind == NodeKind::Filter) atoms.insert(atoms.end(), cur->predicate.begin(), cur->predicate.end());
      cur = &cur->input();
    }
    const PlanNode* base = cur;
    if (contains_choice_node(*base)) return;
    Schema in;
    try {
      in = infer_schema(*base, sources);
    } catch (const Error&) {
      return;
    }
    for (const auto& a : n.aggregates)
      if (!cube_measure_ok(a, in)) return;

    // Interval-domain choices become cube axes; everything else filters the build input.
    Predicate prefilter;
    std::vector<CubeDim> dims;
    for (const auto& k : n.keys) dims.push_back(CubeDim{k, true, {}});
    for (const auto& a : atoms) {
      bool axis = a.choice && a.choice->domain.is_interval() && a.op != CompareOp::Ne;
      if (!axis) {
        prefilter.push_back(a);
        continue;
      }
      auto it = std::find_if(dims.begin(), dims.end(), [&](const CubeDim& d) { return d.column == a.column; });
      if (it == dims.end()) dims.push_back(CubeDim{a.column, false, {a}});
      else it->atoms.push_back(a);
    }
    MatchResult m;
    m.matched_node = n.id;
    m.kind.family = StructureFamily::PrefixSumCube;
    m.kind.dims = std::move(dims);
    m.kind.group_keys = n.keys;
    m.kind.aggregates = n.aggregates;
    m.build_input = prefilter.empty() ? PlanPtr(std::make_shared<PlanNode>(*base)) : filter(
        std::make_shared<PlanNode>(*base), prefilter);
    m.build_choices = choices_under(*m.build_input);
    m.eval_choices = m.kind.eval_choices();
    m.has_unbounded_join = contains_unbounded_join(*base);
    out.push_back(std::move(m));
  });
}

}  // namespace

std::vector<MatchResult> match(StructureFamily family, const ChoicePlan& plan, const SchemaMap& sources) {
  std::vector<MatchResult> out;
  if (!plan.root()) return out;
  switch (family) {
    case StructureFamily::BaseScan: match_basescan(plan, out); break;
    case StructureFamily::HashIndex:
    case StructureFamily::SortedRangeIndex: match_index(family, plan, out); break;
    case StructureFamily::PrefixSumCube: match_cube(plan, sources, out); break;
  }
  return out;
}

std::vector<MatchResult> match_all(const ChoicePlan& plan, const SchemaMap& sources) {
  std::vector<MatchResult> out;
  for (auto f : {StructureFamily::BaseScan, StructureFamily::HashIndex, StructureFamily::SortedRangeIndex,
                 StructureFamily::PrefixSumCube}) {
    auto ms = match(f, plan, sources);
    out.insert(out.end(), std::make_move_iterator(ms.begin()), std::make_move_iterator(ms.end()));
  }
  return out;
}

// ---- estimate --------------------------------------------------------------

StructureEstimate estimate(const StructureKind& kind, const StatsMap& stats, std::size_t row_count,
                           const Calibration& cal) {
  auto need = [&](const std::string& c) -> const ColumnStats& {
    auto it = stats.find(c);
    if (it == stats.end()) throw MissingStats(c);
    return it->second;
  };
  double rows = static_cast<double>(row_count);
  double width = 0.0;
  for (const auto& [name, s] : stats) width += s.width_bytes;
  double log_rows = std::log2(std::max(rows, 2.0));
  StructureEstimate e;
  auto relation_bytes = [&] { return static_cast<std::size_t>(std::ceil(rows * width)); };

  switch (kind.family) {
    case StructureFamily::BaseScan:
      e.build_ms = 0.0;
      e.eval_ms = rows * cal.c_scan;
      e.eval_rows = row_count;
      e.size_bytes = kHeaderBytes + relation_bytes();
      break;
    case StructureFamily::HashIndex: {
      const ColumnStats& k = need(kind.column);
      double expected = k.distinct_count ? rows / static_cast<double>(k.distinct_count) : 0.0;
      e.build_ms = rows * cal.c_hash;
      e.eval_ms = expected * cal.c_probe;
      e.eval_rows = static_cast<std::size_t>(std::ceil(expected));
      e.size_bytes = kHeaderBytes + relation_bytes() +
                     static_cast<std::size_t>(std::ceil(static_cast<double>(k.distinct_count) * (k.width_bytes + 17)));
      break;
    }
    case StructureFamily::SortedRangeIndex: {
      need(kind.column);
      // Choice-bound ranges can span the whole column: worst-case selectivity 1.
      double selectivity = 1.0;
      e.build_ms = rows * log_rows * cal.c_sort;
      e.eval_ms = log_rows * cal.c_probe + selectivity * rows * cal.c_scan;
      e.eval_rows = row_count;
      e.size_bytes = kHeaderBytes + 8 + relation_bytes();
      break;
    }
    case StructureFamily::PrefixSumCube: {
      double cells = 1.0, groups = 1.0, dict_bytes = 0.0, filter_cells = 1.0;
      for (const auto& d : kind.dims) {
        const ColumnStats& s = need(d.column);
        double card = static_cast<double>(s.distinct_count + (s.null_count ? 1 : 0));
        cells *= card;
        if (d.group_key) groups *= card;
        else filter_cells *= card;
        dict_bytes += card * (s.width_bytes + 1);
      }
      if (row_count == 0) cells = groups = 0.0;
      double cell_bytes = 8.0;
      bool plain = false;
      for (const auto& a : kind.aggregates) {
        if (!a.column) continue;
        if (a.func == AggFunc::Count) {
          cell_bytes += 8;
          continue;
        }
        need(*a.column);
        if (a.func == AggFunc::Min || a.func == AggFunc::Max) plain = true;
        // Float sums use double-double cells; the width cannot be known from stats, assume the wider.
        cell_bytes += (a.func == AggFunc::Sum || a.func == AggFunc::Avg) ? 24 : 16;
      }
      double d = static_cast<double>(kind.dims.size());
      e.cells = static_cast<std::size_t>(cells);
      e.build_ms = (rows + cells) * cal.c_cell;
      e.eval_ms = groups * std::pow(2.0, d) * cal.c_cell;
      if (plain) e.eval_ms += groups * filter_cells * cal.c_cell;
      e.eval_rows = static_cast<std::size_t>(std::min(groups, std::max(rows, 0.0)));
      e.size_bytes = kHeaderBytes + static_cast<std::size_t>(std::ceil(dict_bytes + cells * cell_bytes));
      break;
    }
  }
  return e;
}

// ---- persistence & test hooks ----------------------------------------------

void save_structure(const std::filesystem::path& path, const BuiltStructure& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  auto bytes = s.payload();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

BuiltStructure load_structure(const std::filesystem::path& path, const StructureKind& kind, const Binding& baked) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return BuiltStructure::from_payload(kind, std::move(bytes), baked);
}

BuiltStructure corrupt_for_testing(const BuiltStructure& s) {
  std::vector<std::uint8_t> bytes(s.payload().begin(), s.payload().end());
  const Decoded& d = s.decoded();
  if (s.kind().family == StructureFamily::PrefixSumCube) {
    for (std::size_t cell = 0; cell < d.cells; ++cell) {
      std::uint8_t* p = bytes.data() + d.offsets[0] + 8 * cell;
      store_i64(p, load_i64(p) * 2);
    }
  } else {
    // Perturb a non-key column of the embedded relation.
    Relation rel = *d.rel;
    std::vector<Column> cols = rel.columns();
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (rel.schema()[c].name == s.kind().column) continue;
      Column changed(cols[c].type());
      for (std::size_t r = 0; r < cols[c].size(); ++r) {
        Value v = cols[c].get(r);
        if (!v.is_null()) {
          switch (v.type()) {
            case ColumnType::Int64: v = Value(v.as_int() + 1); break;
            case ColumnType::Float64: v = Value(v.as_float() + 1.0); break;
            case ColumnType::String: v = Value(v.as_string() + "~"); break;
            case ColumnType::Bool: v = Value(!v.as_bool()); break;
          }
        }
        changed.push_back(v);
      }
      cols[c] = std::move(changed);
      break;
    }
    ByteWriter w;
    w.raw(std::span<const std::uint8_t>(bytes.data(), d.rel_offset));
    encode_relation(w, Relation(rel.name(), rel.schema(), std::move(cols)));
    bytes = w.take();
  }
  return BuiltStructure::from_payload(s.kind(), std::move(bytes), s.baked());
}

}  // namespace pvd
