#include "pvd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "pvd/errors.hpp"

namespace pvd {

namespace {

struct Option {
  ViewStrategy strategy;
  std::vector<std::string> provenance;
};

bool unbounded_join_outside(const PlanNode& n, int matched) {
  if (n.id == matched) return false;
  if (n.kind == NodeKind::Join && !n.max_fanout) return true;
  for (const auto& c : n.children)
    if (unbounded_join_outside(*c, matched)) return true;
  return false;
}

bool scan_outside(const PlanNode& n, int matched) {
  if (n.id == matched) return false;
  if (n.kind == NodeKind::Scan) return true;
  for (const auto& c : n.children)
    if (scan_outside(*c, matched)) return true;
  return false;
}

std::string joined(const std::vector<std::string>& xs, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + xs[i];
  return s;
}

std::vector<Option> view_options(const InterfaceSpec& spec, const View& view, std::vector<std::string>& pruned) {
  std::vector<Option> out;
  {
    Option base;
    base.strategy.view = view.name;
    base.provenance = {"R1:cloud-query(" + view.name + ")"};
    out.push_back(std::move(base));
  }
  // A view no interaction can change renders once; the baseline answers it.
  if (choices_under(*view.plan.root()).empty() && collect_choices(view.plan, view.name).empty()) return out;
  auto choices = spec_choices(spec);
  const PlanNode& root = *view.plan.root();
  for (const MatchResult& m : match_all(view.plan, source_schemas(spec))) {
    std::string tag = std::string(to_string(m.kind.family)) + "@" + std::to_string(m.matched_node) + "(" +
                      view.name + ")";
    if (m.has_unbounded_join || unbounded_join_outside(root, m.matched_node)) {
      pruned.push_back(tag + ": join without bounded fan-out");
      continue;
    }
    std::vector<std::string> key(m.build_choices.begin(), m.build_choices.end());
    bool replicable = !key.empty() && std::all_of(key.begin(), key.end(), [&](const std::string& c) {
      auto it = choices.find(c);
      return it != choices.end() && !it->second.domain.is_interval();
    });
    bool cloud_residual_only = scan_outside(root, m.matched_node);
    for (SiteId b : {SiteId::Cloud, SiteId::Server, SiteId::Client}) {
      for (SiteId e : {SiteId::Cloud, SiteId::Server, SiteId::Client}) {
        if (!upstream_or_equal(b, e)) continue;
        for (SiteId r : {SiteId::Cloud, SiteId::Server, SiteId::Client}) {
          if (!upstream_or_equal(e, r)) continue;
          if (cloud_residual_only && r != SiteId::Cloud) continue;
          for (CacheMode mode : {CacheMode::Single, CacheMode::Replicated}) {
            if (mode == CacheMode::Replicated && !replicable) continue;
            Option o;
            ViewStrategy& s = o.strategy;
            s.view = view.name;
            s.baseline = false;
            s.matched_node = m.matched_node;
            s.kind = m.kind;
            s.build_site = b;
            s.eval_site = e;
            s.residual_site = r;
            s.cache_mode = mode;
            s.cache_key = key;
            o.provenance.push_back("R2:" + std::string(to_string(m.kind.family)) + "@" +
                                   std::to_string(m.matched_node) + " build@" + std::string(to_string(b)) + " eval@" +
                                   std::string(to_string(e)) + "(" + view.name + ")");
            if (mode == CacheMode::Replicated) o.provenance.push_back("R3:replicate-by(" + joined(key, ",") + ")");
            o.provenance.push_back("R4:residual@" + std::string(to_string(r)));
            out.push_back(std::move(o));
          }
        }
      }
    }
  }
  return out;
}

std::string plan_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "p%05zu", i);
  return buf;
}

}  // namespace

CandidateSet enumerate_candidates(const InterfaceSpec& spec, std::size_t cap) {
  CandidateSet cs;
  std::vector<std::vector<Option>> per_view;
  for (const auto& v : spec.views) per_view.push_back(view_options(spec, v, cs.pruned));
  if (per_view.empty()) return cs;
  std::vector<std::size_t> idx(per_view.size(), 0);
  while (true) {
    if (cs.plans.size() >= cap) {
      cs.truncated = true;
      break;
    }
    PhysicalPlan p;
    p.id = plan_id(cs.plans.size());
    std::vector<std::string> tags;
    for (std::size_t v = 0; v < per_view.size(); ++v) {
      const Option& o = per_view[v][idx[v]];
      p.views.push_back(o.strategy);
      p.provenance.insert(p.provenance.end(), o.provenance.begin(), o.provenance.end());
      tags.push_back(family_tag(o.strategy));
    }
    p.family = joined(tags, "+");
    cs.plans.push_back(std::move(p));
    std::size_t v = per_view.size();
    while (v-- > 0) {
      if (++idx[v] < per_view[v].size()) break;
      idx[v] = 0;
    }
    if (v == static_cast<std::size_t>(-1)) break;
  }
  return cs;
}

FeasibleResult feasible_set(const std::vector<PhysicalPlan>& candidates, const InterfaceSpec& spec,
                            const DeploymentModel& dm, const Calibration& cal, const DatabaseStats& stats,
                            std::size_t cube_cell_cap) {
  FeasibleResult r;
  // Strategies repeat across the cross product; cost each once.
  std::map<std::string, ViewCost> memo;
  for (const auto& p : candidates) {
    std::vector<ViewCost> costs;
    for (const auto& s : p.views) {
      PhysicalPlan single;
      single.views = {s};
      std::string key = physical_plan_to_json(single)["views"].dump();
      auto it = memo.find(key);
      if (it == memo.end()) it = memo.emplace(key, estimate_view(spec, s, stats, dm, cal, cube_cell_cap)).first;
      costs.push_back(it->second);
    }
    Assessed a{p, assess_costs(p, costs, spec, dm)};
    if (a.report.feasible) r.feasible.push_back(a);
    r.assessed.push_back(std::move(a));
  }
  if (r.feasible.empty()) {
    // Closest candidate: fewest budget violations, then smallest worst estimate/bound ratio.
    const Assessed* best = nullptr;
    std::tuple<std::size_t, double> best_score{};
    for (const auto& a : r.assessed) {
      if (!a.report.invalid.empty()) continue;
      double ratio = 0.0;
      for (const auto& i : spec.interactions) {
        auto it = a.report.per_interaction_latency_ms.find(i.name);
        if (it == a.report.per_interaction_latency_ms.end()) continue;
        ratio = std::max(ratio, i.latency_bound_ms > 0 ? it->second / i.latency_bound_ms
                                                       : std::numeric_limits<double>::infinity());
      }
      std::tuple<std::size_t, double> score{a.report.site_violations.size(), ratio};
      if (!best || score < best_score) {
        best = &a;
        best_score = score;
      }
    }
    InfeasibleDiagnostic d;
    if (!best) {
      d.message = "no candidate plan could be costed";
    } else {
      d.plan_id = best->plan.id;
      double worst = -1.0;
      for (const auto& v : best->report.violated) {
        double ratio = v.estimate_ms / std::max(v.bound_ms, 1e-12);
        if (ratio > worst) {
          worst = ratio;
          d.interaction = v.interaction;
          d.bound_ms = v.bound_ms;
          d.estimate_ms = v.estimate_ms;
        }
      }
      if (!d.interaction.empty()) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "no feasible plan; closest is %s where '%s' needs %.3f ms against a %.3f ms bound",
                      d.plan_id.c_str(), d.interaction.c_str(), d.estimate_ms, d.bound_ms);
        d.message = buf;
      } else {
        d.message = "no feasible plan; closest is " + d.plan_id + ", which exceeds a site memory budget";
      }
    }
    r.infeasible = std::move(d);
  }
  return r;
}

ParetoPoint to_point(const Assessed& a) {
  ParetoPoint p;
  p.plan = a.plan;
  p.report = a.report;
  p.client_bytes = a.report.site_bytes.at(SiteId::Client);
  p.server_bytes = a.report.site_bytes.at(SiteId::Server);
  p.headroom_ms = a.report.headroom_ms;
  return p;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  return a.client_bytes <= b.client_bytes && a.server_bytes <= b.server_bytes &&
         (a.client_bytes < b.client_bytes || a.server_bytes < b.server_bytes);
}

namespace {

// Tiebreak among plans with identical byte pairs.
bool better_tie(const ParetoPoint& a, const ParetoPoint& b) {
  if (a.headroom_ms != b.headroom_ms) return a.headroom_ms > b.headroom_ms;
  std::size_t oa = operators(a.plan).size(), ob = operators(b.plan).size();
  if (oa != ob) return oa < ob;
  return joined(a.plan.provenance, ";") < joined(b.plan.provenance, ";");
}

}  // namespace

std::vector<ParetoPoint> pareto(const std::vector<Assessed>& feasible) {
  std::map<std::pair<std::uint64_t, std::uint64_t>, ParetoPoint> best;
  for (const auto& a : feasible) {
    ParetoPoint p = to_point(a);
    auto key = std::make_pair(p.client_bytes, p.server_bytes);
    auto it = best.find(key);
    if (it == best.end()) best.emplace(key, std::move(p));
    else if (better_tie(p, it->second)) it->second = std::move(p);
  }
  std::vector<ParetoPoint> out;
  for (const auto& [key, p] : best) {
    bool dominated = false;
    for (const auto& [k2, q] : best)
      if (dominates(q, p)) {
        dominated = true;
        break;
      }
    if (!dominated) out.push_back(p);
  }
  return out;
}

OptimizeResult optimize(const InterfaceSpec& spec, const DeploymentModel& dm, const DatabaseStats& stats,
                        const OptimizeOptions& opts) {
  OptimizeResult r;
  r.candidates = enumerate_candidates(spec, opts.candidate_cap);
  r.feasible = feasible_set(r.candidates.plans, spec, dm, opts.calibration, stats, opts.cube_cell_cap);
  r.frontier = pareto(r.feasible.feasible);
  return r;
}

namespace {

Json headroom_json(double h) { return std::isfinite(h) ? Json(h) : Json(nullptr); }

}  // namespace

Json pareto_to_json(const std::vector<ParetoPoint>& frontier, const OptimizeResult& r) {
  Json j;
  Json points = Json::array();
  for (const auto& p : frontier) {
    Json pj;
    pj["plan_id"] = p.plan.id;
    pj["family"] = p.plan.family;
    pj["client_bytes"] = p.client_bytes;
    pj["server_bytes"] = p.server_bytes;
    pj["max_latency_headroom_ms"] = headroom_json(p.headroom_ms);
    pj["plan_file"] = "plan_" + p.plan.id + ".json";
    pj["provenance"] = p.plan.provenance;
    points.push_back(std::move(pj));
  }
  j["frontier"] = std::move(points);
  j["candidates"] = r.candidates.plans.size();
  j["feasible"] = r.feasible.feasible.size();
  j["truncated"] = r.candidates.truncated;
  j["pruned"] = r.candidates.pruned;
  if (r.feasible.infeasible) {
    const auto& d = *r.feasible.infeasible;
    Json dj;
    dj["message"] = d.message;
    dj["plan_id"] = d.plan_id;
    if (!d.interaction.empty()) {
      dj["interaction"] = d.interaction;
      dj["bound_ms"] = d.bound_ms;
      dj["estimate_ms"] = d.estimate_ms;
    }
    j["infeasible"] = std::move(dj);
  }
  return j;
}

Json candidates_to_json(const FeasibleResult& r, bool truncated) {
  Json j;
  j["truncated"] = truncated;
  Json arr = Json::array();
  for (const auto& a : r.assessed) {
    Json aj;
    aj["plan_id"] = a.plan.id;
    aj["family"] = a.plan.family;
    aj["provenance"] = a.plan.provenance;
    aj["cost"] = cost_report_to_json(a.report);
    arr.push_back(std::move(aj));
  }
  j["candidates"] = std::move(arr);
  return j;
}

}  // namespace pvd
