#include "pvd/physical.hpp"

#include <algorithm>

#include "pvd/errors.hpp"

namespace pvd {

std::string_view to_string(CacheMode m) { return m == CacheMode::Single ? "single" : "replicated"; }

const ViewStrategy* PhysicalPlan::find(const std::string& view) const {
  for (const auto& v : views)
    if (v.view == view) return &v;
  return nullptr;
}

std::string family_tag(const ViewStrategy& s) {
  if (s.baseline) return "cloud_query";
  switch (s.eval_site) {
    case SiteId::Client: return "client_cache";
    case SiteId::Server: return "server_cache";
    case SiteId::Cloud: return "cloud_structure";
  }
  return "?";
}

namespace {

std::string key_text(const std::vector<std::string>& key) {
  std::string s = "[";
  for (std::size_t i = 0; i < key.size(); ++i) s += (i ? "," : "") + key[i];
  return s + "]";
}

}  // namespace

std::vector<PhysicalOp> operators(const PhysicalPlan& plan) {
  std::vector<PhysicalOp> ops;
  for (const auto& s : plan.views) {
    const std::string& v = s.view;
    if (s.baseline) {
      ops.push_back({"Query", SiteId::Cloud, std::nullopt, v});
      ops.push_back({"Ship", SiteId::Cloud, SiteId::Client, v + ":result"});
    } else {
      std::string sid = v + "#" + std::to_string(s.matched_node);
      if (s.build_site != SiteId::Cloud) ops.push_back({"ShipTable", SiteId::Cloud, s.build_site, sid + ":build-input"});
      ops.push_back({"Build", s.build_site, std::nullopt, sid + ":" + s.kind.describe()});
      if (s.build_site != s.eval_site) ops.push_back({"Ship", s.build_site, s.eval_site, sid + ":structure"});
      ops.push_back({"Cache", s.eval_site, std::nullopt,
                     sid + ":" + std::string(to_string(s.cache_mode)) + key_text(s.cache_key)});
      ops.push_back({"Eval", s.eval_site, std::nullopt, sid});
      if (s.eval_site != s.residual_site) ops.push_back({"Ship", s.eval_site, s.residual_site, sid + ":eval-output"});
      ops.push_back({"Residual", s.residual_site, std::nullopt, v});
      if (s.residual_site != SiteId::Client) ops.push_back({"Ship", s.residual_site, SiteId::Client, v + ":result"});
    }
    ops.push_back({"Render", SiteId::Client, std::nullopt, v});
  }
  return ops;
}

MatchResult resolve_match(const InterfaceSpec& spec, const ViewStrategy& s) {
  const View* view = spec.find_view(s.view);
  if (!view) throw PlanFormatError("plan refers to unknown view '" + s.view + "'");
  for (auto& m : match(s.kind.family, view->plan, source_schemas(spec)))
    if (m.matched_node == s.matched_node && m.kind == s.kind) return std::move(m);
  throw PlanFormatError("view '" + s.view + "' has no " + std::string(to_string(s.kind.family)) + " match at node " +
                        std::to_string(s.matched_node));
}

// ---- JSON ------------------------------------------------------------------

namespace {

Json predicate_json(const Predicate& p) {
  // Reuse the plan encoding of atoms through a throwaway filter node.
  Json f = plan_to_json(*filter(scan("_"), p));
  return f["predicate"];
}

Predicate predicate_from(const Json& j) {
  Json f;
  f["op"] = "filter";
  f["predicate"] = j;
  f["input"] = {{"op", "scan"}, {"relation", "_"}};
  return plan_from_json(f)->predicate;
}

Json kind_json(const StructureKind& k) {
  Json j;
  j["family"] = to_string(k.family);
  j["describe"] = k.describe();
  if (!k.column.empty()) j["column"] = k.column;
  if (!k.probe.empty()) j["probe"] = predicate_json(k.probe);
  if (!k.dims.empty()) {
    Json dims = Json::array();
    for (const auto& d : k.dims) {
      Json dj;
      dj["column"] = d.column;
      dj["group_key"] = d.group_key;
      dj["atoms"] = predicate_json(d.atoms);
      dims.push_back(std::move(dj));
    }
    j["dims"] = std::move(dims);
    j["group_keys"] = k.group_keys;
    Json aggs = Json::array();
    for (const auto& a : k.aggregates) {
      Json aj;
      aj["func"] = to_string(a.func);
      aj["column"] = a.column ? Json(*a.column) : Json(nullptr);
      aj["as"] = a.as;
      aggs.push_back(std::move(aj));
    }
    j["aggregates"] = std::move(aggs);
  }
  return j;
}

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw PlanFormatError("plan" + where + ": " + what);
}

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where, std::string("missing '") + key + "'");
  return j[key];
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

SiteId site_field(const Json& j, const char* key, const std::string& where) {
  auto s = parse_site(string_field(j, key, where));
  if (!s) bad(where + "." + key, "unknown site");
  return *s;
}

StructureKind kind_from(const Json& j, const std::string& where) {
  StructureKind k;
  auto fam = parse_structure_family(string_field(j, "family", where));
  if (!fam) bad(where + ".family", "unknown structure family");
  k.family = *fam;
  try {
    if (j.contains("column")) k.column = j["column"].get<std::string>();
    if (j.contains("probe")) k.probe = predicate_from(j["probe"]);
    if (j.contains("dims")) {
      for (const auto& dj : j["dims"])
        k.dims.push_back(CubeDim{dj.at("column").get<std::string>(), dj.at("group_key").get<bool>(),
                                 predicate_from(dj.at("atoms"))});
      k.group_keys = j.at("group_keys").get<std::vector<std::string>>();
      for (const auto& aj : j.at("aggregates")) {
        Aggregate a;
        auto f = parse_agg_func(aj.at("func").get<std::string>());
        if (!f) bad(where + ".aggregates", "unknown aggregate");
        a.func = *f;
        if (!aj.at("column").is_null()) a.column = aj.at("column").get<std::string>();
        a.as = aj.at("as").get<std::string>();
        k.aggregates.push_back(std::move(a));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    bad(where, e.what());
  }
  return k;
}

}  // namespace

Json physical_plan_to_json(const PhysicalPlan& plan) {
  Json j;
  j["plan_id"] = plan.id;
  j["family"] = plan.family;
  Json views = Json::array();
  for (const auto& s : plan.views) {
    Json v;
    v["view"] = s.view;
    v["strategy"] = s.baseline ? "baseline" : "structure";
    if (!s.baseline) {
      v["matched_node"] = s.matched_node;
      v["structure"] = kind_json(s.kind);
      v["build_site"] = to_string(s.build_site);
      v["eval_site"] = to_string(s.eval_site);
      v["residual_site"] = to_string(s.residual_site);
      v["cache"] = {{"mode", to_string(s.cache_mode)}, {"key", s.cache_key}};
    }
    views.push_back(std::move(v));
  }
  j["views"] = std::move(views);
  Json ops = Json::array();
  for (const auto& op : operators(plan)) {
    Json o;
    o["op"] = op.op;
    o["site"] = to_string(op.site);
    if (op.to) o["to"] = to_string(*op.to);
    o["detail"] = op.detail;
    ops.push_back(std::move(o));
  }
  j["operators"] = std::move(ops);
  j["provenance"] = plan.provenance;
  return j;
}

PhysicalPlan physical_plan_from_json(const Json& j) {
  PhysicalPlan p;
  p.id = string_field(j, "plan_id", "");
  if (j.contains("family")) p.family = string_field(j, "family", "");
  const Json& views = field(j, "views", "");
  if (!views.is_array()) bad(".views", "expected an array");
  for (std::size_t i = 0; i < views.size(); ++i) {
    std::string where = ".views[" + std::to_string(i) + "]";
    const Json& v = views[i];
    ViewStrategy s;
    s.view = string_field(v, "view", where);
    std::string strategy = string_field(v, "strategy", where);
    if (strategy == "baseline") {
      s.baseline = true;
    } else if (strategy == "structure") {
      s.baseline = false;
      const Json& node = field(v, "matched_node", where);
      if (!node.is_number_integer()) bad(where + ".matched_node", "expected an integer");
      s.matched_node = node.get<int>();
      s.kind = kind_from(field(v, "structure", where), where + ".structure");
      s.build_site = site_field(v, "build_site", where);
      s.eval_site = site_field(v, "eval_site", where);
      s.residual_site = site_field(v, "residual_site", where);
      if (!upstream_or_equal(s.build_site, s.eval_site)) bad(where, "build site must be upstream of eval site");
      if (!upstream_or_equal(s.eval_site, s.residual_site)) bad(where, "residual must run at or downstream of eval");
      const Json& cache = field(v, "cache", where);
      std::string mode = string_field(cache, "mode", where + ".cache");
      if (mode == "single") s.cache_mode = CacheMode::Single;
      else if (mode == "replicated") s.cache_mode = CacheMode::Replicated;
      else bad(where + ".cache.mode", "expected single or replicated");
      const Json& key = field(cache, "key", where + ".cache");
      if (!key.is_array()) bad(where + ".cache.key", "expected an array");
      for (const auto& k : key) {
        if (!k.is_string()) bad(where + ".cache.key", "expected choice ids");
        s.cache_key.push_back(k.get<std::string>());
      }
    } else {
      bad(where + ".strategy", "expected baseline or structure");
    }
    p.views.push_back(std::move(s));
  }
  if (j.contains("provenance")) {
    const Json& prov = j["provenance"];
    if (!prov.is_array()) bad(".provenance", "expected an array");
    for (const auto& s : prov) p.provenance.push_back(s.get<std::string>());
  }
  return p;
}

PhysicalPlan load_physical_plan(const std::filesystem::path& path) {
  Json j = load_json(path);
  try {
    return physical_plan_from_json(j);
  } catch (const PlanFormatError& e) {
    throw PlanFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace pvd
