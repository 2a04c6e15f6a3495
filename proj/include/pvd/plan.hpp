#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pvd/relation.hpp"
#include "pvd/value.hpp"

namespace pvd {

/// Finite domain of a choice: an enumerated value list, or a numeric interval
/// discretized by an explicit step.
class Domain {
 public:
  static Domain values(std::vector<Value> vs);
  static Domain interval(Value lo, Value hi, Value step);

  bool is_interval() const { return interval_; }
  std::size_t size() const;
  Value at(std::size_t i) const;
  Value first() const { return at(0); }
  bool contains(const Value& v) const;
  /// Type shared by every domain value; nullopt if empty or mixed.
  std::optional<ColumnType> value_type() const;

  const std::vector<Value>& enumerated() const { return values_; }
  const Value& lo() const { return lo_; }
  const Value& hi() const { return hi_; }
  const Value& step() const { return step_; }

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  bool interval_ = false;
  std::vector<Value> values_;
  Value lo_, hi_, step_;
};

struct LiteralChoice {
  std::string id;
  Domain domain;
  friend bool operator==(const LiteralChoice&, const LiteralChoice&) = default;
};

/// `column op operand`, where the operand is a constant or a literal choice.
struct Atom {
  std::string column;
  CompareOp op = CompareOp::Eq;
  Value constant;
  std::optional<LiteralChoice> choice;

  bool has_choice() const { return choice.has_value(); }
  friend bool operator==(const Atom&, const Atom&) = default;
};

/// Conjunction of atoms.
using Predicate = std::vector<Atom>;

enum class AggFunc : std::uint8_t { Count, Sum, Min, Max, Avg };
std::string_view to_string(AggFunc f);
std::optional<AggFunc> parse_agg_func(std::string_view s);

struct Aggregate {
  AggFunc func = AggFunc::Count;
  std::optional<std::string> column;  // nullopt: count(*)
  std::string as;
  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

enum class NodeKind : std::uint8_t { Scan, Filter, Project, GroupByAgg, Join, Choice };
std::string_view to_string(NodeKind k);

struct PlanNode;
using PlanPtr = std::shared_ptr<const PlanNode>;

/// One logical operator. Children: Filter/Project/GroupByAgg have one input;
/// Join has (left, right); Choice has its alternatives.
struct PlanNode {
  NodeKind kind = NodeKind::Scan;
  int id = -1;  // preorder index within the view plan; -1 for synthesized nodes

  std::string relation;                                      // Scan
  Predicate predicate;                                       // Filter
  std::vector<std::string> columns;                          // Project
  std::vector<std::string> keys;                             // GroupByAgg
  std::vector<Aggregate> aggregates;                         // GroupByAgg
  std::vector<std::pair<std::string, std::string>> join_on;  // Join (left col, right col)
  std::optional<std::int64_t> max_fanout;                    // Join; nullopt = unbounded
  std::string choice_id;                                     // Choice
  std::vector<PlanPtr> children;

  const PlanNode& input() const { return *children.at(0); }
};

PlanPtr scan(std::string relation);
PlanPtr filter(PlanPtr input, Predicate pred);
PlanPtr project(PlanPtr input, std::vector<std::string> columns);
PlanPtr group_by(PlanPtr input, std::vector<std::string> keys, std::vector<Aggregate> aggs);
PlanPtr join(PlanPtr left, PlanPtr right, std::vector<std::pair<std::string, std::string>> on,
             std::optional<std::int64_t> max_fanout);
PlanPtr choose(std::string id, std::vector<PlanPtr> alternatives);

Atom atom(std::string column, CompareOp op, Value constant);
Atom atom(std::string column, CompareOp op, std::string choice_id, Domain domain);

/// Structural equality of two plan trees (ids ignored).
bool same_structure(const PlanNode& a, const PlanNode& b);

/// A view's logical plan. Construction assigns preorder node ids.
class ChoicePlan {
 public:
  ChoicePlan() = default;
  explicit ChoicePlan(PlanPtr root);

  const PlanPtr& root() const { return root_; }
  const PlanNode* find(int id) const;
  /// Ids on the path from the root to `id` (inclusive), root first.
  std::vector<int> path_to(int id) const;
  std::size_t node_count() const { return count_; }

 private:
  PlanPtr root_;
  std::size_t count_ = 0;
};

enum class InteractionKind : std::uint8_t { Continuous, Discrete };

struct Interaction {
  std::string name;
  std::vector<std::string> bound_choices;
  InteractionKind kind = InteractionKind::Discrete;
  double latency_bound_ms = 0.0;
  std::string view;
};

struct Source {
  std::string name;
  std::string csv_path;
  Schema schema;
};

struct View {
  std::string name;
  ChoicePlan plan;
};

/// `lower <= upper` validity constraint between two literal choices.
struct RangeConstraint {
  std::string lower;
  std::string upper;
};

struct InterfaceSpec {
  std::vector<Source> sources;
  std::vector<View> views;
  std::vector<Interaction> interactions;
  std::vector<RangeConstraint> range_constraints;

  const View* find_view(const std::string& name) const;
  const Interaction* find_interaction(const std::string& name) const;
  const Source* find_source(const std::string& name) const;
};

/// choice id → value; subplan choices map to the int64 alternative index.
using Binding = std::map<std::string, Value>;

enum class ChoiceKind : std::uint8_t { Literal, Subplan };

/// A choice as it appears in a view plan.
struct ChoiceInfo {
  std::string id;
  ChoiceKind kind = ChoiceKind::Literal;
  Domain domain;  // subplan choices: interval [0, n-1] step 1
  std::string view;
  int node = -1;  // Filter node (literal) or Choice node (subplan)
  std::string column;  // literal choices: compared column
};

/// Every choice in the plan, in preorder, keyed by nothing (duplicates kept).
std::vector<ChoiceInfo> collect_choices(const ChoicePlan& plan, const std::string& view);
/// Every choice in the spec keyed by id (first occurrence wins).
std::map<std::string, ChoiceInfo> spec_choices(const InterfaceSpec& spec);

/// Literal choice ids referenced anywhere under `node`.
std::set<std::string> choices_under(const PlanNode& node);

// ---- validation ------------------------------------------------------------

enum class DiagCode : std::uint8_t {
  UnknownRelation,
  UnknownColumn,
  UnknownView,
  DanglingChoice,
  DuplicateChoice,
  UnboundChoice,
  DomainTypeMismatch,
  EmptyDomain,
  TypeMismatch,
  NonPositiveLatency,
  EmptyInteraction,
  DuplicateName,
  BadRangeConstraint,
  SchemaMismatch,
};
std::string_view to_string(DiagCode c);

struct Diagnostic {
  DiagCode code;
  std::string subject;
  std::string message;
};

std::vector<Diagnostic> validate_spec(const InterfaceSpec& spec);

using SchemaMap = std::map<std::string, Schema>;
SchemaMap source_schemas(const InterfaceSpec& spec);

/// Output schema of a plan node. Choice nodes take the first alternative.
/// Throws UnknownRelation / UnknownColumn / TypeError on ill-formed plans.
Schema infer_schema(const PlanNode& node, const SchemaMap& sources);

// ---- binding ---------------------------------------------------------------

/// Substitutes literal choices and selects subplan alternatives. Node ids of
/// retained nodes are preserved.
PlanPtr bind(const PlanNode& plan, const Binding& b);
PlanPtr bind(const ChoicePlan& plan, const Binding& b);

/// bind() plus the spec's range constraints (InvalidRange).
PlanPtr bind(const InterfaceSpec& spec, const std::string& view, const Binding& b);

bool satisfies_constraints(const InterfaceSpec& spec, const Binding& b);

/// Every choice at its domain's first value.
Binding default_binding(const InterfaceSpec& spec);

inline constexpr std::size_t kDefaultBindingCap = 1'000'000;

/// Cross product of the interaction's choice domains (odometer order, last
/// bound choice fastest), other choices at their defaults, filtered by range
/// constraints. DomainExplosion if the raw product exceeds `cap`.
std::vector<Binding> enumerate_bindings(const InterfaceSpec& spec, const Interaction& interaction,
                                        std::size_t cap = kDefaultBindingCap);

/// Joint cross product over every choice appearing in a view.
std::vector<Binding> enumerate_view_bindings(const InterfaceSpec& spec, const std::string& view,
                                             std::size_t cap = kDefaultBindingCap);

/// Seeded uniform sample (with replacement) over the valid joint bindings of a view.
std::vector<Binding> sample_view_bindings(const InterfaceSpec& spec, const std::string& view, std::size_t n,
                                          std::uint64_t seed);

/// Seeded uniform sample over the interaction's choices, others at defaults.
std::vector<Binding> sample_bindings(const InterfaceSpec& spec, const Interaction& interaction, std::size_t n,
                                     std::uint64_t seed);

struct NodeRef {
  std::string view;
  int node = -1;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

/// For each choice, the nodes at or above it (everything whose output can
/// change when the choice changes).
std::map<std::string, std::set<NodeRef>> choice_dependencies(const InterfaceSpec& spec);

}  // namespace pvd
