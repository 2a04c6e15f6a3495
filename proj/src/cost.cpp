#include "pvd/cost.hpp"

#include <algorithm>
#include <cmath>

#include "pvd/errors.hpp"

namespace pvd {

double PlanEstimate::width() const {
  double w = 0.0;
  for (const auto& [name, s] : columns) w += s.width_bytes;
  return w;
}

std::uint64_t PlanEstimate::bytes() const { return static_cast<std::uint64_t>(std::ceil(rows * width())); }

namespace {

const ColumnStats& column_stats(const StatsMap& columns, const std::string& name) {
  auto it = columns.find(name);
  if (it == columns.end()) throw MissingStats(name);
  return it->second;
}

void clamp_distinct(StatsMap& columns, double rows) {
  auto cap = static_cast<std::size_t>(std::ceil(std::max(rows, 0.0)));
  for (auto& [name, s] : columns) s.distinct_count = std::min(s.distinct_count, cap);
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

double selectivity(const Atom& a, const StatsMap& columns) {
  const ColumnStats& s = column_stats(columns, a.column);
  double d = static_cast<double>(std::max<std::size_t>(s.distinct_count, 1));
  if (a.choice) return a.op == CompareOp::Eq ? 1.0 / d : 1.0;
  const Value& c = a.constant;
  if (c.is_null()) return 0.0;
  switch (a.op) {
    case CompareOp::Eq: return 1.0 / d;
    case CompareOp::Ne: return s.distinct_count == 0 ? 0.0 : 1.0 - 1.0 / d;
    default: break;
  }
  if (!c.is_numeric() || !s.min || !s.max || !s.min->is_numeric() || !s.max->is_numeric()) return 1.0 / 3.0;
  double lo = s.min->as_number(), hi = s.max->as_number(), x = c.as_number();
  if (hi <= lo) return apply_compare(*s.min, a.op, c) ? 1.0 : 0.0;
  switch (a.op) {
    case CompareOp::Lt:
    case CompareOp::Le: return clamp01((x - lo) / (hi - lo));
    case CompareOp::Gt:
    case CompareOp::Ge: return clamp01((hi - x) / (hi - lo));
    default: return 1.0;
  }
}

PlanEstimate estimate_plan(const PlanNode& node, const DatabaseStats& stats, const Calibration& cal,
                           const std::map<int, PlanEstimate>& overrides) {
  if (node.id >= 0) {
    auto it = overrides.find(node.id);
    if (it != overrides.end()) return it->second;
  }
  PlanEstimate out;
  switch (node.kind) {
    case NodeKind::Scan: {
      auto it = stats.find(node.relation);
      if (it == stats.end()) throw UnknownRelation(node.relation);
      out.rows = static_cast<double>(it->second.row_count);
      out.columns = it->second.columns;
      break;
    }
    case NodeKind::Filter: {
      out = estimate_plan(node.input(), stats, cal, overrides);
      double sel = 1.0;
      for (const auto& a : node.predicate) sel *= selectivity(a, out.columns);
      out.compute_ms += out.rows * cal.c_scan;
      out.rows *= sel;
      for (const auto& a : node.predicate)
        if (a.op == CompareOp::Eq) out.columns[a.column].distinct_count = std::min<std::size_t>(
              out.columns[a.column].distinct_count, 1);
      clamp_distinct(out.columns, out.rows);
      break;
    }
    case NodeKind::Project: {
      PlanEstimate in = estimate_plan(node.input(), stats, cal, overrides);
      out.rows = in.rows;
      out.compute_ms = in.compute_ms + in.rows * cal.c_scan;
      for (const auto& c : node.columns) out.columns[c] = column_stats(in.columns, c);
      break;
    }
    case NodeKind::GroupByAgg: {
      PlanEstimate in = estimate_plan(node.input(), stats, cal, overrides);
      double groups = in.rows > 0 ? 1.0 : 0.0;
      for (const auto& k : node.keys) {
        const ColumnStats& s = column_stats(in.columns, k);
        groups *= static_cast<double>(s.distinct_count + (s.null_count ? 1 : 0));
      }
      groups = std::min(groups, in.rows);
      out.rows = groups;
      out.compute_ms = in.compute_ms + in.rows * cal.c_hash;
      for (const auto& k : node.keys) out.columns[k] = column_stats(in.columns, k);
      for (const auto& a : node.aggregates) {
        if (a.column) column_stats(in.columns, *a.column);
        ColumnStats s;
        s.distinct_count = static_cast<std::size_t>(std::ceil(groups));
        s.width_bytes = 8.0;
        out.columns[a.as] = s;
      }
      clamp_distinct(out.columns, out.rows);
      break;
    }
    case NodeKind::Join: {
      PlanEstimate l = estimate_plan(*node.children.at(0), stats, cal, overrides);
      PlanEstimate r = estimate_plan(*node.children.at(1), stats, cal, overrides);
      out.rows = node.max_fanout ? l.rows * static_cast<double>(*node.max_fanout) : l.rows * r.rows;
      out.compute_ms = l.compute_ms + r.compute_ms + (l.rows + r.rows) * cal.c_hash + out.rows * cal.c_scan;
      out.columns = l.columns;
      for (const auto& [name, s] : r.columns) out.columns[name] = s;
      clamp_distinct(out.columns, out.rows);
      break;
    }
    case NodeKind::Choice: {
      bool first = true;
      for (const auto& alt : node.children) {
        PlanEstimate e = estimate_plan(*alt, stats, cal, overrides);
        if (first || e.compute_ms > out.compute_ms) {
          double rows = first ? e.rows : std::max(out.rows, e.rows);
          out = std::move(e);
          out.rows = rows;
        } else {
          out.rows = std::max(out.rows, e.rows);
        }
        first = false;
      }
      break;
    }
  }
  return out;
}

Calibration site_calibration(const Calibration& base, const DeploymentModel& dm, SiteId s) {
  return base.scaled(dm.site(s).compute_scale);
}

Json calibration_to_json(const Calibration& c) {
  Json j;
  j["c_scan"] = c.c_scan;
  j["c_hash"] = c.c_hash;
  j["c_probe"] = c.c_probe;
  j["c_sort"] = c.c_sort;
  j["c_cell"] = c.c_cell;
  return j;
}

Calibration calibration_from_json(const Json& j) {
  Calibration c;
  auto read = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw PlanFormatError(std::string("calibration.") + key + ": expected a number");
    dst = j[key].get<double>();
  };
  read("c_scan", c.c_scan);
  read("c_hash", c.c_hash);
  read("c_probe", c.c_probe);
  read("c_sort", c.c_sort);
  read("c_cell", c.c_cell);
  if (!c.valid()) throw PlanFormatError("calibration constants must be positive");
  return c;
}

double ship_ms(const DeploymentModel& dm, const ViewStrategy& s, bool rebuild, const ShipSizes& sizes) {
  if (s.baseline)
    return transfer_cost(dm, SiteId::Client, SiteId::Cloud, 0) +
           transfer_cost(dm, SiteId::Cloud, SiteId::Client, sizes.result);
  double t = 0.0;
  if (rebuild) {
    t += transfer_cost(dm, SiteId::Client, SiteId::Cloud, 0);
    t += transfer_cost(dm, SiteId::Cloud, s.build_site, sizes.build_input);
    t += transfer_cost(dm, s.build_site, s.eval_site, sizes.structure);
  } else {
    t += transfer_cost(dm, SiteId::Client, s.eval_site, 0);
  }
  t += transfer_cost(dm, s.eval_site, s.residual_site, sizes.eval_output);
  t += transfer_cost(dm, s.residual_site, SiteId::Client, sizes.result);
  return t;
}

bool rebuilds_on(const ViewStrategy& s, const Interaction& i) {
  if (s.baseline || s.cache_mode == CacheMode::Replicated) return false;
  for (const auto& c : i.bound_choices)
    if (std::find(s.cache_key.begin(), s.cache_key.end(), c) != s.cache_key.end()) return true;
  return false;
}

namespace {

bool has_scan_outside(const PlanNode& n, int matched) {
  if (n.id == matched) return false;
  if (n.kind == NodeKind::Scan) return true;
  for (const auto& c : n.children)
    if (has_scan_outside(*c, matched)) return true;
  return false;
}

}  // namespace

ViewCost estimate_view(const InterfaceSpec& spec, const ViewStrategy& s, const DatabaseStats& stats,
                       const DeploymentModel& dm, const Calibration& base, std::size_t cube_cell_cap) {
  ViewCost c;
  const View* view = spec.find_view(s.view);
  if (!view) {
    c.valid = false;
    c.invalid_reason = "unknown view " + s.view;
    return c;
  }
  const PlanNode& root = *view->plan.root();
  Calibration cloud = site_calibration(base, dm, SiteId::Cloud);
  if (s.baseline) {
    PlanEstimate e = estimate_plan(root, stats, cloud);
    c.baseline_ms = e.compute_ms;
    c.sizes.result = e.bytes();
    return c;
  }

  MatchResult m;
  try {
    m = resolve_match(spec, s);
  } catch (const PlanFormatError& e) {
    c.valid = false;
    c.invalid_reason = e.what();
    return c;
  }
  if (s.residual_site != SiteId::Cloud && has_scan_outside(root, s.matched_node)) {
    c.valid = false;
    c.invalid_reason = "residual of " + s.view + " reads base tables outside the cloud";
    return c;
  }

  PlanEstimate in = estimate_plan(*m.build_input, stats, cloud);
  c.build_input_ms = in.compute_ms;
  c.sizes.build_input = in.bytes();
  auto in_rows = static_cast<std::size_t>(std::ceil(in.rows));
  StructureEstimate at_build = estimate(s.kind, in.columns, in_rows, site_calibration(base, dm, s.build_site));
  StructureEstimate at_eval = estimate(s.kind, in.columns, in_rows, site_calibration(base, dm, s.eval_site));
  c.build_ms = at_build.build_ms;
  c.eval_ms = at_eval.eval_ms;
  c.instance_bytes = at_build.size_bytes;
  c.sizes.structure = at_build.size_bytes;
  c.cells = at_build.cells;
  if (s.kind.family == StructureFamily::PrefixSumCube && at_build.cells > cube_cell_cap) {
    c.valid = false;
    c.invalid_reason = "cube needs " + std::to_string(at_build.cells) + " cells, cap " + std::to_string(cube_cell_cap);
    return c;
  }

  // Shape of eval() output.
  PlanEstimate out;
  out.rows = static_cast<double>(at_eval.eval_rows);
  if (s.kind.family == StructureFamily::PrefixSumCube) {
    for (const auto& k : s.kind.group_keys) out.columns[k] = in.columns.at(k);
    for (const auto& a : s.kind.aggregates) {
      ColumnStats st;
      st.distinct_count = at_eval.eval_rows;
      st.width_bytes = 8.0;
      out.columns[a.as] = st;
    }
  } else {
    out.columns = in.columns;
  }
  clamp_distinct(out.columns, out.rows);
  c.sizes.eval_output = out.bytes();

  Calibration rcal = site_calibration(base, dm, s.residual_site);
  if (!m.residual.empty()) {
    double sel = 1.0;
    for (const auto& a : m.residual) sel *= selectivity(a, out.columns);
    out.compute_ms = out.rows * rcal.c_scan;
    out.rows *= sel;
    clamp_distinct(out.columns, out.rows);
  }
  PlanEstimate res = estimate_plan(root, stats, rcal, {{s.matched_node, out}});
  c.residual_ms = res.compute_ms;
  c.sizes.result = res.bytes();

  if (s.cache_mode == CacheMode::Replicated) {
    auto choices = spec_choices(spec);
    for (const auto& k : s.cache_key) {
      auto it = choices.find(k);
      if (it != choices.end()) c.replicas *= std::max<std::size_t>(it->second.domain.size(), 1);
    }
  }
  return c;
}

LatencyBreakdown interaction_latency(const ViewStrategy& s, const ViewCost& c, const Interaction& i,
                                     const DeploymentModel& dm) {
  LatencyBreakdown b;
  if (s.baseline) {
    b.eval_ms = c.baseline_ms;
    b.ship_ms = ship_ms(dm, s, false, c.sizes);
    return b;
  }
  b.rebuild = rebuilds_on(s, i);
  if (b.rebuild) b.build_ms = c.build_input_ms + c.build_ms;
  b.eval_ms = c.eval_ms;
  b.residual_ms = c.residual_ms;
  b.ship_ms = ship_ms(dm, s, b.rebuild, c.sizes);
  return b;
}

CostReport assess_costs(const PhysicalPlan& plan, const std::vector<ViewCost>& costs, const InterfaceSpec& spec,
                        const DeploymentModel& dm) {
  CostReport r;
  for (SiteId id : kAllSites) r.site_bytes[id] = 0;
  for (std::size_t v = 0; v < plan.views.size(); ++v) {
    const ViewStrategy& s = plan.views[v];
    const ViewCost& c = costs.at(v);
    if (!c.valid) {
      r.feasible = false;
      r.invalid.push_back(c.invalid_reason);
      continue;
    }
    if (!s.baseline) r.site_bytes[s.eval_site] += c.resident_bytes();
  }
  for (const auto& i : spec.interactions) {
    auto it = std::find_if(plan.views.begin(), plan.views.end(),
                           [&](const ViewStrategy& s) { return s.view == i.view; });
    if (it == plan.views.end()) throw Error("plan does not cover view '" + i.view + "'");
    const ViewCost& c = costs.at(static_cast<std::size_t>(it - plan.views.begin()));
    if (!c.valid) continue;
    LatencyBreakdown b = interaction_latency(*it, c, i, dm);
    double est = b.total();
    r.breakdown[i.name] = b;
    r.per_interaction_latency_ms[i.name] = est;
    r.headroom_ms = std::min(r.headroom_ms, i.latency_bound_ms - est);
    if (est > i.latency_bound_ms) {
      r.feasible = false;
      r.violated.push_back({i.name, i.latency_bound_ms, est});
    }
  }
  Placement placement(r.site_bytes.begin(), r.site_bytes.end());
  for (const auto& [site, ok] : fits(dm, placement)) {
    if (ok) continue;
    r.feasible = false;
    r.site_violations.push_back({site, r.site_bytes[site], *dm.site(site).memory_budget_bytes});
  }
  return r;
}

CostReport assess(const PhysicalPlan& plan, const InterfaceSpec& spec, const DeploymentModel& dm,
                  const Calibration& base, const DatabaseStats& stats, std::size_t cube_cell_cap) {
  std::vector<ViewCost> costs;
  for (const auto& s : plan.views) costs.push_back(estimate_view(spec, s, stats, dm, base, cube_cell_cap));
  return assess_costs(plan, costs, spec, dm);
}

Json cost_report_to_json(const CostReport& r) {
  Json j;
  j["feasible"] = r.feasible;
  j["headroom_ms"] = std::isfinite(r.headroom_ms) ? Json(r.headroom_ms) : Json(nullptr);
  Json inter = Json::array();
  for (const auto& [name, ms] : r.per_interaction_latency_ms) {
    const LatencyBreakdown& b = r.breakdown.at(name);
    Json ij;
    ij["interaction"] = name;
    ij["latency_ms"] = ms;
    ij["build_ms"] = b.build_ms;
    ij["eval_ms"] = b.eval_ms;
    ij["ship_ms"] = b.ship_ms;
    ij["residual_ms"] = b.residual_ms;
    ij["rebuild"] = b.rebuild;
    inter.push_back(std::move(ij));
  }
  j["interactions"] = std::move(inter);
  Json sites;
  for (const auto& [site, bytes] : r.site_bytes) sites[std::string(to_string(site))] = bytes;
  j["site_bytes"] = std::move(sites);
  Json viol = Json::array();
  for (const auto& v : r.violated)
    viol.push_back({{"interaction", v.interaction}, {"bound_ms", v.bound_ms}, {"estimate_ms", v.estimate_ms}});
  j["violated"] = std::move(viol);
  Json sv = Json::array();
  for (const auto& v : r.site_violations)
    sv.push_back({{"site", to_string(v.site)}, {"bytes", v.bytes}, {"budget", v.budget}});
  j["site_violations"] = std::move(sv);
  if (!r.invalid.empty()) j["invalid"] = r.invalid;
  return j;
}

}  // namespace pvd
