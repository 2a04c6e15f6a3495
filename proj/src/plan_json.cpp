#include "pvd/plan_json.hpp"

#include <fstream>

#include "pvd/errors.hpp"

namespace pvd {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw PlanFormatError(where + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) fail(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> string_list(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) fail(where, "expected an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

Json domain_to_json(const Domain& d) {
  if (d.is_interval())
    return Json{{"interval", {{"lo", value_to_json(d.lo())}, {"hi", value_to_json(d.hi())}, {"step", value_to_json(d.step())}}}};
  Json vals = Json::array();
  for (const auto& v : d.enumerated()) vals.push_back(value_to_json(v));
  return Json{{"values", vals}};
}

Domain domain_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected a domain object");
  if (j.contains("values")) {
    const Json& vs = j["values"];
    if (!vs.is_array()) fail(where + ".values", "expected an array");
    std::vector<Value> out;
    for (const auto& v : vs) out.push_back(value_from_json(v));
    return Domain::values(std::move(out));
  }
  if (j.contains("interval")) {
    const Json& iv = j["interval"];
    std::string w = where + ".interval";
    Value lo = value_from_json(field(iv, "lo", w));
    Value hi = value_from_json(field(iv, "hi", w));
    Value step = iv.contains("step") ? value_from_json(iv["step"])
                                     : (lo.is_numeric() && lo.type() == ColumnType::Float64 ? Value(1.0)
                                                                                             : Value(std::int64_t{1}));
    try {
      return Domain::interval(lo, hi, step);
    } catch (const TypeError& e) {
      fail(w, e.what());
    }
  }
  fail(where, "domain needs 'values' or 'interval'");
}

Json atom_to_json(const Atom& a) {
  Json j{{"column", a.column}, {"op", std::string(to_string(a.op))}};
  if (a.choice)
    j["choice"] = Json{{"choice_id", a.choice->id}, {"kind", "literal"}, {"domain", domain_to_json(a.choice->domain)}};
  else
    j["value"] = value_to_json(a.constant);
  return j;
}

Atom atom_from_json(const Json& j, const std::string& where) {
  Atom a;
  a.column = string_field(j, "column", where);
  auto op = parse_compare_op(string_field(j, "op", where));
  if (!op) fail(where + ".op", "unknown comparison operator");
  a.op = *op;
  if (j.contains("choice")) {
    const Json& c = j["choice"];
    std::string w = where + ".choice";
    a.choice = LiteralChoice{string_field(c, "choice_id", w), domain_from_json(field(c, "domain", w), w + ".domain")};
    if (c.contains("kind") && c["kind"] != "literal") fail(w + ".kind", "predicate choices must be literal");
  } else {
    a.constant = value_from_json(field(j, "value", where));
  }
  return a;
}

PlanPtr plan_from_json_at(const Json& j, const std::string& where) {
  std::string op = string_field(j, "op", where);
  auto input = [&] { return plan_from_json_at(field(j, "input", where), where + ".input"); };
  if (op == "scan") return scan(string_field(j, "relation", where));
  if (op == "filter") {
    const Json& p = field(j, "predicate", where);
    if (!p.is_array()) fail(where + ".predicate", "expected an array of atoms");
    Predicate pred;
    for (std::size_t i = 0; i < p.size(); ++i)
      pred.push_back(atom_from_json(p[i], where + ".predicate[" + std::to_string(i) + "]"));
    return filter(input(), std::move(pred));
  }
  if (op == "project") return project(input(), string_list(field(j, "columns", where), where + ".columns"));
  if (op == "groupby") {
    std::vector<Aggregate> aggs;
    const Json& a = field(j, "aggregates", where);
    if (!a.is_array()) fail(where + ".aggregates", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::string w = where + ".aggregates[" + std::to_string(i) + "]";
      Aggregate agg;
      auto f = parse_agg_func(string_field(a[i], "func", w));
      if (!f) fail(w + ".func", "unknown aggregate");
      agg.func = *f;
      if (a[i].contains("column") && !a[i]["column"].is_null()) agg.column = a[i]["column"].get<std::string>();
      agg.as = string_field(a[i], "as", w);
      aggs.push_back(std::move(agg));
    }
    return group_by(input(), string_list(field(j, "keys", where), where + ".keys"), std::move(aggs));
  }
  if (op == "join") {
    std::vector<std::pair<std::string, std::string>> on;
    const Json& keys = field(j, "keys", where);
    if (!keys.is_array()) fail(where + ".keys", "expected an array of [left, right] pairs");
    for (const auto& k : keys) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_string() || !k[1].is_string())
        fail(where + ".keys", "expected [left, right] column pairs");
      on.emplace_back(k[0].get<std::string>(), k[1].get<std::string>());
    }
    std::optional<std::int64_t> fanout;
    if (j.contains("max_fanout") && !j["max_fanout"].is_null()) {
      if (!j["max_fanout"].is_number_integer()) fail(where + ".max_fanout", "expected an integer or null");
      fanout = j["max_fanout"].get<std::int64_t>();
    }
    return join(plan_from_json_at(field(j, "left", where), where + ".left"),
                plan_from_json_at(field(j, "right", where), where + ".right"), std::move(on), fanout);
  }
  if (op == "choice") {
    const Json& alts = field(j, "alternatives", where);
    if (!alts.is_array()) fail(where + ".alternatives", "expected an array");
    std::vector<PlanPtr> out;
    for (std::size_t i = 0; i < alts.size(); ++i)
      out.push_back(plan_from_json_at(alts[i], where + ".alternatives[" + std::to_string(i) + "]"));
    return choose(string_field(j, "choice_id", where), std::move(out));
  }
  fail(where + ".op", "unknown operator '" + op + "'");
}

}  // namespace

Json value_to_json(const Value& v) {
  switch (v.storage().index()) {
    case 1: return v.as_int();
    case 2: return v.as_float();
    case 3: return v.as_string();
    case 4: return v.as_bool();
    default: return nullptr;
  }
}

Value value_from_json(const Json& j) {
  if (j.is_null()) return Value::null();
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_number_float()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  throw PlanFormatError("expected a scalar value, got " + j.dump());
}

Json binding_to_json(const Binding& b) {
  Json j = Json::object();
  for (const auto& [k, v] : b) j[k] = value_to_json(v);
  return j;
}

Binding binding_from_json(const Json& j) {
  if (!j.is_object()) throw PlanFormatError("binding must be an object");
  Binding b;
  for (auto it = j.begin(); it != j.end(); ++it) b[it.key()] = value_from_json(it.value());
  return b;
}

Json schema_to_json(const Schema& s) {
  Json j = Json::array();
  for (const auto& c : s) j.push_back(Json{{"name", c.name}, {"type", std::string(to_string(c.type))}});
  return j;
}

Schema schema_from_json(const Json& j) {
  if (!j.is_array()) throw PlanFormatError("schema must be an array");
  Schema s;
  for (const auto& c : j) {
    auto t = parse_column_type(string_field(c, "type", "schema"));
    if (!t) throw PlanFormatError("schema: unknown column type " + c["type"].dump());
    s.push_back({string_field(c, "name", "schema"), *t});
  }
  return s;
}

Json plan_to_json(const PlanNode& n) {
  Json j{{"op", std::string(to_string(n.kind))}};
  switch (n.kind) {
    case NodeKind::Scan: j["relation"] = n.relation; break;
    case NodeKind::Filter: {
      Json p = Json::array();
      for (const auto& a : n.predicate) p.push_back(atom_to_json(a));
      j["predicate"] = p;
      j["input"] = plan_to_json(n.input());
      break;
    }
    case NodeKind::Project:
      j["columns"] = n.columns;
      j["input"] = plan_to_json(n.input());
      break;
    case NodeKind::GroupByAgg: {
      j["keys"] = n.keys;
      Json aggs = Json::array();
      for (const auto& a : n.aggregates)
        aggs.push_back(Json{{"func", std::string(to_string(a.func))},
                            {"column", a.column ? Json(*a.column) : Json(nullptr)},
                            {"as", a.as}});
      j["aggregates"] = aggs;
      j["input"] = plan_to_json(n.input());
      break;
    }
    case NodeKind::Join: {
      Json keys = Json::array();
      for (const auto& [l, r] : n.join_on) keys.push_back(Json::array({l, r}));
      j["keys"] = keys;
      j["max_fanout"] = n.max_fanout ? Json(*n.max_fanout) : Json(nullptr);
      j["left"] = plan_to_json(*n.children[0]);
      j["right"] = plan_to_json(*n.children[1]);
      break;
    }
    case NodeKind::Choice: {
      j["choice_id"] = n.choice_id;
      j["kind"] = "subplan";
      Json alts = Json::array();
      for (const auto& c : n.children) alts.push_back(plan_to_json(*c));
      j["alternatives"] = alts;
      break;
    }
  }
  return j;
}

PlanPtr plan_from_json(const Json& j) { return plan_from_json_at(j, "plan"); }

Json spec_to_json(const InterfaceSpec& spec) {
  Json j{{"spec_version", kSpecVersion}};
  Json sources = Json::array();
  for (const auto& s : spec.sources)
    sources.push_back(Json{{"name", s.name}, {"csv_path", s.csv_path}, {"schema", schema_to_json(s.schema)}});
  j["sources"] = sources;
  Json views = Json::array();
  for (const auto& v : spec.views) views.push_back(Json{{"name", v.name}, {"plan", plan_to_json(*v.plan.root())}});
  j["views"] = views;
  Json inters = Json::array();
  for (const auto& i : spec.interactions)
    inters.push_back(Json{{"name", i.name},
                          {"bound_choices", i.bound_choices},
                          {"kind", i.kind == InteractionKind::Continuous ? "continuous" : "discrete"},
                          {"latency_bound_ms", i.latency_bound_ms},
                          {"view", i.view}});
  j["interactions"] = inters;
  Json rcs = Json::array();
  for (const auto& rc : spec.range_constraints) rcs.push_back(Json{{"lower", rc.lower}, {"upper", rc.upper}});
  j["range_constraints"] = rcs;
  return j;
}

InterfaceSpec spec_from_json(const Json& j) {
  if (!j.is_object()) fail("spec", "expected an object");
  if (!j.contains("spec_version")) fail("spec", "missing mandatory 'spec_version'");
  if (j["spec_version"] != kSpecVersion) fail("spec.spec_version", "unsupported version " + j["spec_version"].dump());
  InterfaceSpec spec;
  const Json& sources = field(j, "sources", "spec");
  if (!sources.is_array()) fail("spec.sources", "expected an array");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    std::string w = "spec.sources[" + std::to_string(i) + "]";
    Source s;
    s.name = string_field(sources[i], "name", w);
    s.csv_path = string_field(sources[i], "csv_path", w);
    try {
      s.schema = schema_from_json(field(sources[i], "schema", w));
    } catch (const PlanFormatError& e) {
      fail(w, e.what());
    }
    spec.sources.push_back(std::move(s));
  }
  const Json& views = field(j, "views", "spec");
  if (!views.is_array()) fail("spec.views", "expected an array");
  for (std::size_t i = 0; i < views.size(); ++i) {
    std::string w = "spec.views[" + std::to_string(i) + "]";
    spec.views.push_back(View{string_field(views[i], "name", w), ChoicePlan(plan_from_json_at(field(views[i], "plan", w), w + ".plan"))});
  }
  if (j.contains("interactions")) {
    const Json& inters = j["interactions"];
    if (!inters.is_array()) fail("spec.interactions", "expected an array");
    for (std::size_t i = 0; i < inters.size(); ++i) {
      std::string w = "spec.interactions[" + std::to_string(i) + "]";
      Interaction in;
      in.name = string_field(inters[i], "name", w);
      in.bound_choices = string_list(field(inters[i], "bound_choices", w), w + ".bound_choices");
      std::string kind = string_field(inters[i], "kind", w);
      if (kind == "continuous") in.kind = InteractionKind::Continuous;
      else if (kind == "discrete") in.kind = InteractionKind::Discrete;
      else fail(w + ".kind", "expected 'continuous' or 'discrete'");
      const Json& lb = field(inters[i], "latency_bound_ms", w);
      if (!lb.is_number()) fail(w + ".latency_bound_ms", "expected a number");
      in.latency_bound_ms = lb.get<double>();
      in.view = string_field(inters[i], "view", w);
      spec.interactions.push_back(std::move(in));
    }
  }
  if (j.contains("range_constraints")) {
    for (const auto& rc : j["range_constraints"])
      spec.range_constraints.push_back({string_field(rc, "lower", "spec.range_constraints"),
                                        string_field(rc, "upper", "spec.range_constraints")});
  }
  return spec;
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw PlanFormatError(path.string() + ": " + e.what());
  }
}

InterfaceSpec load_spec(const std::filesystem::path& path) {
  try {
    return spec_from_json(load_json(path));
  } catch (const Json::exception& e) {
    throw PlanFormatError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace pvd
