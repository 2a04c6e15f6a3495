#include "pvd/plan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "pvd/errors.hpp"

namespace pvd {

// ---- Domain ----------------------------------------------------------------

Domain Domain::values(std::vector<Value> vs) {
  Domain d;
  d.values_ = std::move(vs);
  return d;
}

Domain Domain::interval(Value lo, Value hi, Value step) {
  if (!lo.is_numeric() || !hi.is_numeric() || !step.is_numeric())
    throw TypeError("interval domain bounds must be numeric");
  if (lo.type() != hi.type() || lo.type() != step.type()) throw TypeError("interval domain mixes int64 and float64");
  if (step.as_number() <= 0) throw TypeError("interval domain step must be positive");
  Domain d;
  d.interval_ = true;
  d.lo_ = std::move(lo);
  d.hi_ = std::move(hi);
  d.step_ = std::move(step);
  return d;
}

std::size_t Domain::size() const {
  if (!interval_) return values_.size();
  if (lo_.type() == ColumnType::Int64) {
    if (hi_.as_int() < lo_.as_int()) return 0;
    return static_cast<std::size_t>((hi_.as_int() - lo_.as_int()) / step_.as_int()) + 1;
  }
  double span = hi_.as_float() - lo_.as_float();
  if (span < 0) return 0;
  return static_cast<std::size_t>(std::floor(span / step_.as_float() + 1e-9)) + 1;
}

Value Domain::at(std::size_t i) const {
  if (i >= size()) throw OutOfDomain("<domain>", "index " + std::to_string(i));
  if (!interval_) return values_[i];
  if (lo_.type() == ColumnType::Int64) return Value(lo_.as_int() + static_cast<std::int64_t>(i) * step_.as_int());
  return Value(lo_.as_float() + static_cast<double>(i) * step_.as_float());
}

bool Domain::contains(const Value& v) const {
  if (v.is_null()) return false;
  if (!interval_) return std::find(values_.begin(), values_.end(), v) != values_.end();
  if (v.type() != lo_.type()) return false;
  if (lo_.type() == ColumnType::Int64) {
    std::int64_t x = v.as_int();
    return x >= lo_.as_int() && x <= hi_.as_int() && (x - lo_.as_int()) % step_.as_int() == 0;
  }
  double k = (v.as_float() - lo_.as_float()) / step_.as_float();
  double r = std::round(k);
  return std::abs(k - r) <= 1e-9 && r >= 0 && static_cast<std::size_t>(r) < size();
}

std::optional<ColumnType> Domain::value_type() const {
  if (interval_) return lo_.type();
  if (values_.empty()) return std::nullopt;
  std::optional<ColumnType> t;
  for (const auto& v : values_) {
    if (v.is_null()) return std::nullopt;
    if (t && *t != v.type()) return std::nullopt;
    t = v.type();
  }
  return t;
}

// ---- names -----------------------------------------------------------------

std::string_view to_string(AggFunc f) {
  switch (f) {
    case AggFunc::Count: return "count";
    case AggFunc::Sum: return "sum";
    case AggFunc::Min: return "min";
    case AggFunc::Max: return "max";
    case AggFunc::Avg: return "avg";
  }
  return "?";
}

std::optional<AggFunc> parse_agg_func(std::string_view s) {
  if (s == "count") return AggFunc::Count;
  if (s == "sum") return AggFunc::Sum;
  if (s == "min") return AggFunc::Min;
  if (s == "max") return AggFunc::Max;
  if (s == "avg") return AggFunc::Avg;
  return std::nullopt;
}

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Scan: return "scan";
    case NodeKind::Filter: return "filter";
    case NodeKind::Project: return "project";
    case NodeKind::GroupByAgg: return "groupby";
    case NodeKind::Join: return "join";
    case NodeKind::Choice: return "choice";
  }
  return "?";
}

std::string_view to_string(DiagCode c) {
  switch (c) {
    case DiagCode::UnknownRelation: return "UnknownRelation";
    case DiagCode::UnknownColumn: return "UnknownColumn";
    case DiagCode::UnknownView: return "UnknownView";
    case DiagCode::DanglingChoice: return "DanglingChoice";
    case DiagCode::DuplicateChoice: return "DuplicateChoice";
    case DiagCode::UnboundChoice: return "UnboundChoice";
    case DiagCode::DomainTypeMismatch: return "DomainTypeMismatch";
    case DiagCode::EmptyDomain: return "EmptyDomain";
    case DiagCode::TypeMismatch: return "TypeMismatch";
    case DiagCode::NonPositiveLatency: return "NonPositiveLatency";
    case DiagCode::EmptyInteraction: return "EmptyInteraction";
    case DiagCode::DuplicateName: return "DuplicateName";
    case DiagCode::BadRangeConstraint: return "BadRangeConstraint";
    case DiagCode::SchemaMismatch: return "SchemaMismatch";
  }
  return "?";
}

// ---- builders --------------------------------------------------------------

namespace {

std::shared_ptr<PlanNode> make(NodeKind k) {
  auto n = std::make_shared<PlanNode>();
  n->kind = k;
  return n;
}

}  // namespace

PlanPtr scan(std::string relation) {
  auto n = make(NodeKind::Scan);
  n->relation = std::move(relation);
  return n;
}

PlanPtr filter(PlanPtr input, Predicate pred) {
  auto n = make(NodeKind::Filter);
  n->predicate = std::move(pred);
  n->children.push_back(std::move(input));
  return n;
}

PlanPtr project(PlanPtr input, std::vector<std::string> columns) {
  auto n = make(NodeKind::Project);
  n->columns = std::move(columns);
  n->children.push_back(std::move(input));
  return n;
}

PlanPtr group_by(PlanPtr input, std::vector<std::string> keys, std::vector<Aggregate> aggs) {
  auto n = make(NodeKind::GroupByAgg);
  n->keys = std::move(keys);
  n->aggregates = std::move(aggs);
  n->children.push_back(std::move(input));
  return n;
}

PlanPtr join(PlanPtr left, PlanPtr right, std::vector<std::pair<std::string, std::string>> on,
             std::optional<std::int64_t> max_fanout) {
  auto n = make(NodeKind::Join);
  n->join_on = std::move(on);
  n->max_fanout = max_fanout;
  n->children.push_back(std::move(left));
  n->children.push_back(std::move(right));
  return n;
}

PlanPtr choose(std::string id, std::vector<PlanPtr> alternatives) {
  auto n = make(NodeKind::Choice);
  n->choice_id = std::move(id);
  n->children = std::move(alternatives);
  return n;
}

Atom atom(std::string column, CompareOp op, Value constant) {
  Atom a;
  a.column = std::move(column);
  a.op = op;
  a.constant = std::move(constant);
  return a;
}

Atom atom(std::string column, CompareOp op, std::string choice_id, Domain domain) {
  Atom a;
  a.column = std::move(column);
  a.op = op;
  a.choice = LiteralChoice{std::move(choice_id), std::move(domain)};
  return a;
}

bool same_structure(const PlanNode& a, const PlanNode& b) {
  if (a.kind != b.kind || a.relation != b.relation || a.predicate != b.predicate || a.columns != b.columns ||
      a.keys != b.keys || a.aggregates != b.aggregates || a.join_on != b.join_on || a.max_fanout != b.max_fanout ||
      a.choice_id != b.choice_id || a.children.size() != b.children.size())
    return false;
  for (std::size_t i = 0; i < a.children.size(); ++i)
    if (!same_structure(*a.children[i], *b.children[i])) return false;
  return true;
}

// ---- ChoicePlan ------------------------------------------------------------

namespace {

PlanPtr renumber(const PlanNode& n, int& next) {
  auto copy = std::make_shared<PlanNode>(n);
  copy->id = next++;
  for (auto& c : copy->children) c = renumber(*c, next);
  return copy;
}

const PlanNode* find_node(const PlanNode& n, int id) {
  if (n.id == id) return &n;
  for (const auto& c : n.children)
    if (const PlanNode* hit = find_node(*c, id)) return hit;
  return nullptr;
}

bool path_walk(const PlanNode& n, int id, std::vector<int>& path) {
  path.push_back(n.id);
  if (n.id == id) return true;
  for (const auto& c : n.children)
    if (path_walk(*c, id, path)) return true;
  path.pop_back();
  return false;
}

}  // namespace

ChoicePlan::ChoicePlan(PlanPtr root) {
  if (!root) return;
  int next = 0;
  root_ = renumber(*root, next);
  count_ = static_cast<std::size_t>(next);
}

const PlanNode* ChoicePlan::find(int id) const { return root_ ? find_node(*root_, id) : nullptr; }

std::vector<int> ChoicePlan::path_to(int id) const {
  std::vector<int> path;
  if (root_ && path_walk(*root_, id, path)) return path;
  return {};
}

// ---- InterfaceSpec ---------------------------------------------------------

const View* InterfaceSpec::find_view(const std::string& name) const {
  for (const auto& v : views)
    if (v.name == name) return &v;
  return nullptr;
}

const Interaction* InterfaceSpec::find_interaction(const std::string& name) const {
  for (const auto& i : interactions)
    if (i.name == name) return &i;
  return nullptr;
}

const Source* InterfaceSpec::find_source(const std::string& name) const {
  for (const auto& s : sources)
    if (s.name == name) return &s;
  return nullptr;
}

// ---- choices ---------------------------------------------------------------

namespace {

void collect(const PlanNode& n, const std::string& view, std::vector<ChoiceInfo>& out) {
  if (n.kind == NodeKind::Filter) {
    for (const auto& a : n.predicate) {
      if (!a.choice) continue;
      out.push_back(ChoiceInfo{a.choice->id, ChoiceKind::Literal, a.choice->domain, view, n.id, a.column});
    }
  } else if (n.kind == NodeKind::Choice) {
    Domain d = Domain::interval(Value(std::int64_t{0}), Value(static_cast<std::int64_t>(n.children.size()) - 1),
                                Value(std::int64_t{1}));
    out.push_back(ChoiceInfo{n.choice_id, ChoiceKind::Subplan, d, view, n.id, {}});
  }
  for (const auto& c : n.children) collect(*c, view, out);
}

void choices_under_impl(const PlanNode& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Filter)
    for (const auto& a : n.predicate)
      if (a.choice) out.insert(a.choice->id);
  if (n.kind == NodeKind::Choice) out.insert(n.choice_id);
  for (const auto& c : n.children) choices_under_impl(*c, out);
}

}  // namespace

std::vector<ChoiceInfo> collect_choices(const ChoicePlan& plan, const std::string& view) {
  std::vector<ChoiceInfo> out;
  if (plan.root()) collect(*plan.root(), view, out);
  return out;
}

std::map<std::string, ChoiceInfo> spec_choices(const InterfaceSpec& spec) {
  std::map<std::string, ChoiceInfo> out;
  for (const auto& v : spec.views)
    for (auto& c : collect_choices(v.plan, v.name)) out.emplace(c.id, std::move(c));
  return out;
}

std::set<std::string> choices_under(const PlanNode& node) {
  std::set<std::string> out;
  choices_under_impl(node, out);
  return out;
}

// ---- schema inference ------------------------------------------------------

SchemaMap source_schemas(const InterfaceSpec& spec) {
  SchemaMap out;
  for (const auto& s : spec.sources) out.emplace(s.name, s.schema);
  return out;
}

namespace {

const ColumnSpec* lookup(const Schema& s, const std::string& name) {
  for (const auto& c : s)
    if (c.name == name) return &c;
  return nullptr;
}

bool numeric(ColumnType t) { return t == ColumnType::Int64 || t == ColumnType::Float64; }

// Shared walker for validation (collecting diagnostics) and inference (throwing).
class SchemaChecker {
 public:
  SchemaChecker(const SchemaMap& sources, std::vector<Diagnostic>* diags) : sources_(sources), diags_(diags) {}

  std::optional<Schema> check(const PlanNode& n) {
    switch (n.kind) {
      case NodeKind::Scan: {
        auto it = sources_.find(n.relation);
        if (it == sources_.end()) {
          report(DiagCode::UnknownRelation, n.relation, "scan of undeclared relation '" + n.relation + "'",
                 [&] { throw UnknownRelation(n.relation); });
          return std::nullopt;
        }
        return it->second;
      }
      case NodeKind::Filter: {
        auto in = check(n.input());
        if (!in) return std::nullopt;
        for (const auto& a : n.predicate) check_atom(a, *in);
        return in;
      }
      case NodeKind::Project: {
        auto in = check(n.input());
        if (!in) return std::nullopt;
        Schema out;
        for (const auto& c : n.columns) {
          const ColumnSpec* cs = column(*in, c);
          if (cs) out.push_back(*cs);
        }
        return out;
      }
      case NodeKind::GroupByAgg: {
        auto in = check(n.input());
        if (!in) return std::nullopt;
        Schema out;
        for (const auto& k : n.keys)
          if (const ColumnSpec* cs = column(*in, k)) out.push_back(*cs);
        for (const auto& agg : n.aggregates) {
          ColumnType t = ColumnType::Int64;
          if (agg.column) {
            const ColumnSpec* cs = column(*in, *agg.column);
            if (!cs) continue;
            if ((agg.func == AggFunc::Sum || agg.func == AggFunc::Avg) && !numeric(cs->type))
              report(DiagCode::TypeMismatch, *agg.column,
                     std::string(to_string(agg.func)) + " over non-numeric column '" + *agg.column + "'",
                     [&] { throw TypeError(std::string(to_string(agg.func)) + " over non-numeric column"); });
            if (agg.func == AggFunc::Sum) t = cs->type;
            else if (agg.func == AggFunc::Avg) t = ColumnType::Float64;
            else if (agg.func == AggFunc::Min || agg.func == AggFunc::Max) t = cs->type;
          } else if (agg.func != AggFunc::Count) {
            report(DiagCode::TypeMismatch, agg.as, std::string(to_string(agg.func)) + " needs a column",
                   [&] { throw TypeError(std::string(to_string(agg.func)) + " needs a column"); });
          }
          if (lookup(out, agg.as))
            report(DiagCode::DuplicateName, agg.as, "duplicate output column '" + agg.as + "'",
                   [&] { throw SchemaMismatch("duplicate output column '" + agg.as + "'"); });
          out.push_back({agg.as, t});
        }
        return out;
      }
      case NodeKind::Join: {
        auto l = check(*n.children.at(0));
        auto r = check(*n.children.at(1));
        if (!l || !r) return std::nullopt;
        for (const auto& [lc, rc] : n.join_on) {
          const ColumnSpec* a = column(*l, lc);
          const ColumnSpec* b = column(*r, rc);
          if (a && b && a->type != b->type)
            report(DiagCode::TypeMismatch, lc + "=" + rc, "join key types differ",
                   [&] { throw TypeError("join key types differ for " + lc + "=" + rc); });
        }
        Schema out = *l;
        for (const auto& c : *r) {
          if (lookup(out, c.name)) {
            report(DiagCode::DuplicateName, c.name, "join output repeats column '" + c.name + "'",
                   [&] { throw SchemaMismatch("join output repeats column '" + c.name + "'"); });
            continue;
          }
          out.push_back(c);
        }
        return out;
      }
      case NodeKind::Choice: {
        if (n.children.empty()) {
          report(DiagCode::EmptyDomain, n.choice_id, "subplan choice without alternatives",
                 [&] { throw SchemaMismatch("subplan choice '" + n.choice_id + "' has no alternatives"); });
          return std::nullopt;
        }
        std::optional<Schema> first;
        for (const auto& alt : n.children) {
          auto s = check(*alt);
          if (!s) continue;
          if (!first) first = s;
          else if (*first != *s)
            report(DiagCode::SchemaMismatch, n.choice_id, "alternatives of '" + n.choice_id + "' differ in schema",
                   [&] { throw SchemaMismatch("alternatives of '" + n.choice_id + "' differ in schema"); });
        }
        return first;
      }
    }
    return std::nullopt;
  }

 private:
  template <typename Thrower>
  void report(DiagCode code, const std::string& subject, const std::string& msg, Thrower thrower) {
    if (diags_) diags_->push_back({code, subject, msg});
    else thrower();
  }

  const ColumnSpec* column(const Schema& s, const std::string& name) {
    const ColumnSpec* cs = lookup(s, name);
    if (!cs) report(DiagCode::UnknownColumn, name, "unknown column '" + name + "'", [&] { throw UnknownColumn(name); });
    return cs;
  }

  void check_atom(const Atom& a, const Schema& in) {
    const ColumnSpec* cs = column(in, a.column);
    if (!cs) return;
    if (a.choice) {
      const Domain& d = a.choice->domain;
      if (d.size() == 0) {
        report(DiagCode::EmptyDomain, a.choice->id, "choice '" + a.choice->id + "' has an empty domain",
               [&] { throw OutOfDomain(a.choice->id, "<empty domain>"); });
        return;
      }
      auto t = d.value_type();
      if (!t || *t != cs->type)
        report(DiagCode::DomainTypeMismatch, a.choice->id,
               "domain of '" + a.choice->id + "' does not match " + std::string(to_string(cs->type)) + " column '" +
                   a.column + "'",
               [&] { throw TypeError("domain of '" + a.choice->id + "' does not match column type"); });
    } else if (a.constant.is_null() || a.constant.type() != cs->type) {
      report(DiagCode::TypeMismatch, a.column, "literal " + a.constant.to_string() + " does not match column '" +
                                                   a.column + "'",
             [&] { throw TypeError("literal " + a.constant.to_string() + " does not match column '" + a.column + "'"); });
    }
  }

  const SchemaMap& sources_;
  std::vector<Diagnostic>* diags_;
};

}  // namespace

Schema infer_schema(const PlanNode& node, const SchemaMap& sources) {
  SchemaChecker checker(sources, nullptr);
  auto s = checker.check(node);
  if (!s) throw SchemaMismatch("cannot infer schema");
  return *s;
}

// ---- validation ------------------------------------------------------------

std::vector<Diagnostic> validate_spec(const InterfaceSpec& spec) {
  std::vector<Diagnostic> diags;
  auto dup_check = [&](const auto& items, const std::string& what) {
    std::set<std::string> seen;
    for (const auto& item : items)
      if (!seen.insert(item.name).second)
        diags.push_back({DiagCode::DuplicateName, item.name, "duplicate " + what + " '" + item.name + "'"});
  };
  dup_check(spec.sources, "source");
  dup_check(spec.views, "view");
  dup_check(spec.interactions, "interaction");

  SchemaMap schemas = source_schemas(spec);
  std::map<std::string, std::string> choice_view;
  std::map<std::string, ChoiceInfo> all;
  for (const auto& v : spec.views) {
    if (!v.plan.root()) {
      diags.push_back({DiagCode::SchemaMismatch, v.name, "view '" + v.name + "' has no plan"});
      continue;
    }
    SchemaChecker(schemas, &diags).check(*v.plan.root());
    for (auto& c : collect_choices(v.plan, v.name)) {
      if (all.count(c.id)) {
        diags.push_back({DiagCode::DuplicateChoice, c.id, "choice id '" + c.id + "' declared more than once"});
        continue;
      }
      all.emplace(c.id, c);
    }
  }

  std::set<std::string> bound;
  for (const auto& i : spec.interactions) {
    if (!(i.latency_bound_ms > 0))
      diags.push_back({DiagCode::NonPositiveLatency, i.name, "interaction '" + i.name + "' has a non-positive bound"});
    const View* view = spec.find_view(i.view);
    if (!view) diags.push_back({DiagCode::UnknownView, i.view, "interaction '" + i.name + "' names unknown view"});
    if (i.bound_choices.empty())
      diags.push_back({DiagCode::EmptyInteraction, i.name, "interaction '" + i.name + "' binds no choices"});
    for (const auto& id : i.bound_choices) {
      auto it = all.find(id);
      if (it == all.end() || (view && it->second.view != view->name)) {
        diags.push_back({DiagCode::DanglingChoice, id, "interaction '" + i.name + "' binds unknown choice '" + id + "'"});
        continue;
      }
      bound.insert(id);
    }
  }
  for (const auto& [id, info] : all)
    if (!bound.count(id))
      diags.push_back({DiagCode::UnboundChoice, id, "choice '" + id + "' is bound by no interaction"});

  for (const auto& rc : spec.range_constraints) {
    auto lo = all.find(rc.lower), hi = all.find(rc.upper);
    if (lo == all.end() || hi == all.end() || lo->second.kind != ChoiceKind::Literal ||
        hi->second.kind != ChoiceKind::Literal || lo->second.domain.value_type() != hi->second.domain.value_type())
      diags.push_back({DiagCode::BadRangeConstraint, rc.lower + "<=" + rc.upper,
                       "range constraint must relate two literal choices of one type"});
  }
  return diags;
}

// ---- binding ---------------------------------------------------------------

namespace {

const Value& lookup_binding(const Binding& b, const std::string& id) {
  auto it = b.find(id);
  if (it == b.end()) throw UnboundChoice(id);
  return it->second;
}

}  // namespace

PlanPtr bind(const PlanNode& plan, const Binding& b) {
  if (plan.kind == NodeKind::Choice) {
    const Value& v = lookup_binding(b, plan.choice_id);
    if (v.is_null() || v.type() != ColumnType::Int64 || v.as_int() < 0 ||
        v.as_int() >= static_cast<std::int64_t>(plan.children.size()))
      throw OutOfDomain(plan.choice_id, v.to_string());
    return bind(*plan.children[static_cast<std::size_t>(v.as_int())], b);
  }
  auto copy = std::make_shared<PlanNode>(plan);
  if (copy->kind == NodeKind::Filter) {
    for (auto& a : copy->predicate) {
      if (!a.choice) continue;
      const Value& v = lookup_binding(b, a.choice->id);
      if (!a.choice->domain.contains(v)) throw OutOfDomain(a.choice->id, v.to_string());
      a.constant = v;
      a.choice.reset();
    }
  }
  for (auto& c : copy->children) c = bind(*c, b);
  return copy;
}

PlanPtr bind(const ChoicePlan& plan, const Binding& b) { return bind(*plan.root(), b); }

bool satisfies_constraints(const InterfaceSpec& spec, const Binding& b) {
  for (const auto& rc : spec.range_constraints) {
    auto lo = b.find(rc.lower), hi = b.find(rc.upper);
    if (lo == b.end() || hi == b.end()) continue;
    if (compare(lo->second, hi->second) > 0) return false;
  }
  return true;
}

PlanPtr bind(const InterfaceSpec& spec, const std::string& view, const Binding& b) {
  const View* v = spec.find_view(view);
  if (!v) throw Error("unknown view '" + view + "'");
  for (const auto& rc : spec.range_constraints) {
    auto lo = b.find(rc.lower), hi = b.find(rc.upper);
    if (lo != b.end() && hi != b.end() && compare(lo->second, hi->second) > 0) throw InvalidRange(rc.lower, rc.upper);
  }
  return bind(v->plan, b);
}

Binding default_binding(const InterfaceSpec& spec) {
  Binding b;
  for (const auto& [id, info] : spec_choices(spec)) b[id] = info.domain.first();
  return b;
}

namespace {

std::vector<Binding> odometer(const InterfaceSpec& spec, const std::vector<ChoiceInfo>& vary, std::size_t cap) {
  std::size_t total = 1;
  bool overflow = false;
  for (const auto& c : vary) {
    std::size_t n = c.domain.size();
    if (n == 0) return {};
    if (total > std::numeric_limits<std::size_t>::max() / n) overflow = true;
    else total *= n;
  }
  if (overflow) throw DomainExplosion(std::numeric_limits<std::size_t>::max(), cap);
  if (total > cap) throw DomainExplosion(total, cap);

  Binding base = default_binding(spec);
  std::vector<Binding> out;
  std::vector<std::size_t> idx(vary.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    Binding b = base;
    for (std::size_t i = 0; i < vary.size(); ++i) b[vary[i].id] = vary[i].domain.at(idx[i]);
    if (satisfies_constraints(spec, b)) out.push_back(std::move(b));
    for (std::size_t i = vary.size(); i-- > 0;) {
      if (++idx[i] < vary[i].domain.size()) break;
      idx[i] = 0;
    }
  }
  return out;
}

std::vector<ChoiceInfo> interaction_choices(const InterfaceSpec& spec, const Interaction& interaction) {
  auto all = spec_choices(spec);
  std::vector<ChoiceInfo> vary;
  for (const auto& id : interaction.bound_choices) {
    auto it = all.find(id);
    if (it == all.end()) throw UnboundChoice(id);
    vary.push_back(it->second);
  }
  return vary;
}

std::vector<ChoiceInfo> view_choices(const InterfaceSpec& spec, const std::string& view) {
  const View* v = spec.find_view(view);
  if (!v) throw Error("unknown view '" + view + "'");
  std::vector<ChoiceInfo> vary;
  std::set<std::string> seen;
  for (auto& c : collect_choices(v->plan, view))
    if (seen.insert(c.id).second) vary.push_back(std::move(c));
  return vary;
}

std::vector<Binding> sample(const InterfaceSpec& spec, const std::vector<ChoiceInfo>& vary, std::size_t n,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Binding base = default_binding(spec);
  std::vector<Binding> out;
  out.reserve(n);
  constexpr int kMaxRejects = 10'000;
  for (std::size_t k = 0; k < n; ++k) {
    for (int attempt = 0; attempt < kMaxRejects; ++attempt) {
      Binding b = base;
      for (const auto& c : vary) {
        std::uniform_int_distribution<std::size_t> pick(0, c.domain.size() - 1);
        b[c.id] = c.domain.at(pick(rng));
      }
      if (satisfies_constraints(spec, b)) {
        out.push_back(std::move(b));
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Binding> enumerate_bindings(const InterfaceSpec& spec, const Interaction& interaction, std::size_t cap) {
  return odometer(spec, interaction_choices(spec, interaction), cap);
}

std::vector<Binding> enumerate_view_bindings(const InterfaceSpec& spec, const std::string& view, std::size_t cap) {
  return odometer(spec, view_choices(spec, view), cap);
}

std::vector<Binding> sample_view_bindings(const InterfaceSpec& spec, const std::string& view, std::size_t n,
                                          std::uint64_t seed) {
  return sample(spec, view_choices(spec, view), n, seed);
}

std::vector<Binding> sample_bindings(const InterfaceSpec& spec, const Interaction& interaction, std::size_t n,
                                     std::uint64_t seed) {
  return sample(spec, interaction_choices(spec, interaction), n, seed);
}

std::map<std::string, std::set<NodeRef>> choice_dependencies(const InterfaceSpec& spec) {
  std::map<std::string, std::set<NodeRef>> out;
  for (const auto& v : spec.views) {
    for (const auto& c : collect_choices(v.plan, v.name)) {
      auto& set = out[c.id];
      for (int id : v.plan.path_to(c.node)) set.insert(NodeRef{v.name, id});
    }
  }
  return out;
}

}  // namespace pvd
