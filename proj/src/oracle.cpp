#include "pvd/oracle.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "pvd/errors.hpp"

namespace pvd {

namespace {

struct TupleHash {
  std::size_t operator()(const std::vector<Value>& t) const noexcept {
    std::size_t h = 0x84222325;
    for (const auto& v : t) h = h * 1099511628211ULL ^ std::hash<Value>{}(v);
    return h;
  }
};

bool tuple_less(const std::vector<Value>& a, const std::vector<Value>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), canonical_less);
}

// Branch-free over raw pointers so the common no-null case vectorizes.
template <typename T, typename Cmp>
void filter_typed(const std::vector<T>& data, const Column& col, const T& rhs, Cmp cmp, std::vector<std::uint8_t>& keep) {
  const std::size_t n = data.size();
  const T* d = data.data();
  std::uint8_t* k = keep.data();
  const std::uint8_t* nulls = col.null_mask().empty() ? nullptr : col.null_mask().data();
  if (!nulls) {
    for (std::size_t r = 0; r < n; ++r) k[r] &= static_cast<std::uint8_t>(cmp(d[r], rhs));
  } else {
    for (std::size_t r = 0; r < n; ++r) k[r] &= static_cast<std::uint8_t>((nulls[r] == 0) & cmp(d[r], rhs));
  }
}

template <typename T>
void filter_op(const std::vector<T>& data, const Column& col, const T& rhs, CompareOp op, std::vector<std::uint8_t>& keep) {
  switch (op) {
    case CompareOp::Eq: filter_typed(data, col, rhs, std::equal_to<T>{}, keep); break;
    case CompareOp::Ne: filter_typed(data, col, rhs, std::not_equal_to<T>{}, keep); break;
    case CompareOp::Lt: filter_typed(data, col, rhs, std::less<T>{}, keep); break;
    case CompareOp::Le: filter_typed(data, col, rhs, std::less_equal<T>{}, keep); break;
    case CompareOp::Gt: filter_typed(data, col, rhs, std::greater<T>{}, keep); break;
    case CompareOp::Ge: filter_typed(data, col, rhs, std::greater_equal<T>{}, keep); break;
  }
}

}  // namespace

std::vector<std::size_t> select_rows(const Relation& rel, const Predicate& pred) {
  std::vector<std::uint8_t> keep(rel.row_count(), 1);
  for (const auto& a : pred) {
    if (a.choice) throw UnboundChoice(a.choice->id);
    const Column& col = rel.column(a.column);
    if (a.constant.is_null()) {
      std::fill(keep.begin(), keep.end(), 0);  // nothing equals or orders against null
      continue;
    }
    if (a.constant.type() != col.type())
      throw TypeError("predicate compares " + std::string(to_string(col.type())) + " column '" + a.column + "' with " +
                      a.constant.to_string());
    switch (col.type()) {
      case ColumnType::Int64: filter_op(col.ints(), col, a.constant.as_int(), a.op, keep); break;
      case ColumnType::Float64: filter_op(col.floats(), col, a.constant.as_float(), a.op, keep); break;
      case ColumnType::String: filter_op(col.strings(), col, a.constant.as_string(), a.op, keep); break;
      case ColumnType::Bool:
        filter_op(col.bools(), col, static_cast<std::uint8_t>(a.constant.as_bool() ? 1 : 0), a.op, keep);
        break;
    }
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < keep.size(); ++r)
    if (keep[r]) rows.push_back(r);
  return rows;
}

Relation apply_predicate(const Relation& rel, const Predicate& pred) {
  if (pred.empty()) return rel;
  auto rows = select_rows(rel, pred);
  return rel.gather(rows);
}

Relation project_columns(const Relation& rel, const std::vector<std::string>& columns) {
  Schema schema;
  std::vector<Column> cols;
  for (const auto& c : columns) {
    std::size_t i = rel.column_index(c);
    schema.push_back(rel.schema()[i]);
    cols.push_back(rel.columns()[i]);
  }
  return Relation(rel.name(), std::move(schema), std::move(cols));
}

ColumnType aggregate_type(AggFunc f, ColumnType in) {
  switch (f) {
    case AggFunc::Count: return ColumnType::Int64;
    case AggFunc::Avg: return ColumnType::Float64;
    case AggFunc::Sum:
      if (in != ColumnType::Int64 && in != ColumnType::Float64) throw TypeError("sum over non-numeric column");
      return in;
    case AggFunc::Min:
    case AggFunc::Max: return in;
  }
  return in;
}

Relation group_aggregate(const Relation& rel, const std::vector<std::string>& keys, const std::vector<Aggregate>& aggs) {
  std::vector<std::size_t> key_idx;
  for (const auto& k : keys) key_idx.push_back(rel.column_index(k));
  std::vector<std::optional<std::size_t>> agg_idx;
  Schema schema;
  for (std::size_t k : key_idx) schema.push_back(rel.schema()[k]);
  for (const auto& a : aggs) {
    if (a.column) {
      std::size_t i = rel.column_index(*a.column);
      if ((a.func == AggFunc::Sum || a.func == AggFunc::Avg) && rel.schema()[i].type != ColumnType::Int64 &&
          rel.schema()[i].type != ColumnType::Float64)
        throw TypeError(std::string(to_string(a.func)) + " over non-numeric column '" + *a.column + "'");
      agg_idx.push_back(i);
      schema.push_back({a.as, aggregate_type(a.func, rel.schema()[i].type)});
    } else {
      if (a.func != AggFunc::Count) throw TypeError(std::string(to_string(a.func)) + " needs a column");
      agg_idx.push_back(std::nullopt);
      schema.push_back({a.as, ColumnType::Int64});
    }
  }

  struct Acc {
    std::int64_t count = 0;   // rows (count(*)) or non-null inputs
    std::int64_t isum = 0;
    double fsum = 0.0;
    Value best;               // min/max
  };
  std::unordered_map<std::vector<Value>, std::size_t, TupleHash> index;
  std::vector<std::vector<Value>> group_keys;
  std::vector<std::vector<Acc>> accs;

  std::vector<Value> key;
  for (std::size_t r = 0; r < rel.row_count(); ++r) {
    std::size_t g = 0;
    if (key_idx.empty()) {
      if (accs.empty()) {
        group_keys.emplace_back();
        accs.emplace_back(aggs.size());
      }
    } else {
      key.clear();
      for (std::size_t k : key_idx) key.push_back(rel.columns()[k].get(r));
      auto [it, fresh] = index.try_emplace(key, group_keys.size());
      if (fresh) {
        group_keys.push_back(key);
        accs.emplace_back(aggs.size());
      }
      g = it->second;
    }
    auto& row_accs = accs[g];
    for (std::size_t a = 0; a < aggs.size(); ++a) {
      Acc& acc = row_accs[a];
      if (!agg_idx[a]) {
        ++acc.count;
        continue;
      }
      const Column& col = rel.columns()[*agg_idx[a]];
      if (col.is_null(r)) continue;
      ++acc.count;
      switch (aggs[a].func) {
        case AggFunc::Count: break;
        case AggFunc::Sum:
        case AggFunc::Avg:
          if (col.type() == ColumnType::Int64) acc.isum += col.ints()[r];
          else acc.fsum += col.floats()[r];
          break;
        case AggFunc::Min: {
          Value v = col.get(r);
          if (acc.best.is_null() || compare(v, acc.best) < 0) acc.best = std::move(v);
          break;
        }
        case AggFunc::Max: {
          Value v = col.get(r);
          if (acc.best.is_null() || compare(v, acc.best) > 0) acc.best = std::move(v);
          break;
        }
      }
    }
  }

  std::vector<std::size_t> order(group_keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return tuple_less(group_keys[a], group_keys[b]); });

  RelationBuilder out(rel.name(), schema);
  std::vector<Value> row;
  for (std::size_t g : order) {
    row = group_keys[g];
    for (std::size_t a = 0; a < aggs.size(); ++a) {
      const Acc& acc = accs[g][a];
      bool is_int = agg_idx[a] && rel.columns()[*agg_idx[a]].type() == ColumnType::Int64;
      switch (aggs[a].func) {
        case AggFunc::Count: row.emplace_back(acc.count); break;
        case AggFunc::Sum:
          if (acc.count == 0) row.push_back(Value::null());
          else if (is_int) row.emplace_back(acc.isum);
          else row.emplace_back(acc.fsum);
          break;
        case AggFunc::Avg:
          if (acc.count == 0) row.push_back(Value::null());
          else row.emplace_back((is_int ? static_cast<double>(acc.isum) : acc.fsum) / static_cast<double>(acc.count));
          break;
        case AggFunc::Min:
        case AggFunc::Max: row.push_back(acc.best); break;
      }
    }
    out.add_row(row);
  }
  return std::move(out).finish();
}

Relation hash_join(const Relation& left, const Relation& right, const std::vector<std::pair<std::string, std::string>>& on) {
  std::vector<std::size_t> lk, rk;
  for (const auto& [l, r] : on) {
    lk.push_back(left.column_index(l));
    rk.push_back(right.column_index(r));
    if (left.schema()[lk.back()].type != right.schema()[rk.back()].type)
      throw TypeError("join key types differ for " + l + "=" + r);
  }
  std::unordered_map<std::vector<Value>, std::vector<std::size_t>, TupleHash> table;
  std::vector<Value> key;
  auto make_key = [&](const Relation& rel, const std::vector<std::size_t>& idx, std::size_t row) {
    key.clear();
    for (std::size_t c : idx) {
      if (rel.columns()[c].is_null(row)) return false;
      key.push_back(rel.columns()[c].get(row));
    }
    return true;
  };
  for (std::size_t r = 0; r < right.row_count(); ++r)
    if (make_key(right, rk, r)) table[key].push_back(r);

  std::vector<std::size_t> lrows, rrows;
  for (std::size_t l = 0; l < left.row_count(); ++l) {
    if (!make_key(left, lk, l)) continue;
    auto it = table.find(key);
    if (it == table.end()) continue;
    for (std::size_t r : it->second) {
      lrows.push_back(l);
      rrows.push_back(r);
    }
  }
  Relation lg = left.gather(lrows), rg = right.gather(rrows);
  Schema schema = lg.schema();
  std::vector<Column> cols = lg.columns();
  for (std::size_t c = 0; c < rg.column_count(); ++c) {
    schema.push_back(rg.schema()[c]);
    cols.push_back(rg.columns()[c]);
  }
  return Relation(left.name() + "_" + right.name(), std::move(schema), std::move(cols));
}

RelationPtr evaluate(const PlanNode& plan, const Database& db, const Overrides& overrides) {
  if (plan.id >= 0) {
    auto it = overrides.find(plan.id);
    if (it != overrides.end()) return it->second;
  }
  switch (plan.kind) {
    case NodeKind::Scan: {
      auto it = db.find(plan.relation);
      if (it == db.end()) throw UnknownRelation(plan.relation);
      return it->second;
    }
    case NodeKind::Filter: {
      auto in = evaluate(plan.input(), db, overrides);
      return std::make_shared<const Relation>(apply_predicate(*in, plan.predicate));
    }
    case NodeKind::Project: {
      auto in = evaluate(plan.input(), db, overrides);
      return std::make_shared<const Relation>(project_columns(*in, plan.columns));
    }
    case NodeKind::GroupByAgg: {
      auto in = evaluate(plan.input(), db, overrides);
      return std::make_shared<const Relation>(group_aggregate(*in, plan.keys, plan.aggregates));
    }
    case NodeKind::Join: {
      auto l = evaluate(*plan.children[0], db, overrides);
      auto r = evaluate(*plan.children[1], db, overrides);
      return std::make_shared<const Relation>(hash_join(*l, *r, plan.join_on));
    }
    case NodeKind::Choice: throw UnboundChoice(plan.choice_id);
  }
  throw Error("unknown plan node");
}

Relation oracle_eval(const PlanNode& plan, const Database& db) { return canonicalize(*evaluate(plan, db)); }

}  // namespace pvd
