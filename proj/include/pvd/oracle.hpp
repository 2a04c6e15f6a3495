#pragma once

#include <map>

#include "pvd/plan.hpp"
#include "pvd/relation.hpp"

namespace pvd {

/// Node id → precomputed output, substituted during evaluation.
using Overrides = std::map<int, RelationPtr>;

/// Naive bottom-up evaluation of a choice-free plan. Output order is the
/// operators' natural order; use oracle_eval for the canonical form.
/// UnboundChoice on remaining choices; TypeError on ill-typed predicates.
RelationPtr evaluate(const PlanNode& plan, const Database& db, const Overrides& overrides = {});

/// Ground-truth evaluation: evaluate() followed by canonicalize().
Relation oracle_eval(const PlanNode& plan, const Database& db);

/// Rows of `rel` satisfying every atom (atoms must be choice-free).
Relation apply_predicate(const Relation& rel, const Predicate& pred);

/// Row indices of `rel` satisfying every atom.
std::vector<std::size_t> select_rows(const Relation& rel, const Predicate& pred);

Relation project_columns(const Relation& rel, const std::vector<std::string>& columns);

Relation group_aggregate(const Relation& rel, const std::vector<std::string>& keys,
                         const std::vector<Aggregate>& aggs);

Relation hash_join(const Relation& left, const Relation& right,
                   const std::vector<std::pair<std::string, std::string>>& on);

/// Output type of an aggregate over an input column of type `in` (ignored for count).
ColumnType aggregate_type(AggFunc f, ColumnType in);

}  // namespace pvd
