#include <algorithm>
#include <limits>

#include "doctest.h"
#include "congress_plans.hpp"
#include "pvd/optimizer.hpp"
#include "test_util.hpp"

using namespace pvd;

namespace {

Assessed fake(const std::string& id, std::uint64_t client, std::uint64_t server, double headroom = 1.0) {
  Assessed a;
  a.plan.id = id;
  a.plan.provenance = {"R1:" + id};
  a.report.site_bytes = {{SiteId::Client, client}, {SiteId::Server, server}, {SiteId::Cloud, 0}};
  a.report.headroom_ms = headroom;
  return a;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs(const std::vector<ParetoPoint>& ps) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  for (const auto& p : ps) out.emplace_back(p.client_bytes, p.server_bytes);
  return out;
}

bool has_rule(const PhysicalPlan& p, const std::string& prefix) {
  return std::any_of(p.provenance.begin(), p.provenance.end(),
                     [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

/// Brute-force filter: keep every byte pair no other feasible pair dominates.
std::set<std::pair<std::uint64_t, std::uint64_t>> brute_frontier(const std::vector<Assessed>& feasible) {
  std::set<std::pair<std::uint64_t, std::uint64_t>> all, out;
  for (const auto& a : feasible) all.insert({a.report.site_bytes.at(SiteId::Client), a.report.site_bytes.at(SiteId::Server)});
  for (const auto& p : all) {
    bool dominated = false;
    for (const auto& q : all)
      if (q.first <= p.first && q.second <= p.second && q != p) dominated = true;
    if (!dominated) out.insert(p);
  }
  return out;
}

struct Setup {
  Generated g;
  DatabaseStats stats;
  explicit Setup(SynthKind k, SynthOptions o = {}) : g(generate(k, o)), stats(compute_stats(g.db)) {}
};

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("pareto keeps the non-dominated byte pairs") {
  auto front = pareto({fake("a", 10, 10), fake("b", 5, 20), fake("c", 10, 5)});
  CHECK(pairs(front) == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{5, 20}, {10, 5}});
  auto one = pareto({fake("solo", 3, 4)});
  REQUIRE(one.size() == 1);
  CHECK(one[0].plan.id == "solo");
  CHECK(pareto({}).empty());
}

TEST_CASE("equal byte pairs collapse to the larger headroom") {
  auto front = pareto({fake("slow", 7, 7, 1.0), fake("fast", 7, 7, 9.0), fake("mid", 7, 7, 5.0)});
  REQUIRE(front.size() == 1);
  CHECK(front[0].plan.id == "fast");
  CHECK(front[0].headroom_ms == 9.0);
  // Input order does not matter.
  auto again = pareto({fake("mid", 7, 7, 5.0), fake("fast", 7, 7, 9.0), fake("slow", 7, 7, 1.0)});
  CHECK(again[0].plan.id == "fast");
}

TEST_CASE("dominance is strict in at least one axis") {
  auto a = to_point(fake("a", 1, 1)), b = to_point(fake("b", 1, 2)), c = to_point(fake("c", 1, 1));
  CHECK(dominates(a, b));
  CHECK_FALSE(dominates(b, a));
  CHECK_FALSE(dominates(a, c));
}

TEST_CASE("congress candidates cover the three plan families") {
  Setup s(SynthKind::Congress);
  auto cands = enumerate_candidates(s.g.spec);
  CHECK_FALSE(cands.truncated);
  CHECK(cands.pruned.empty());
  auto plans = pvd::testing::congress_plans(s.g.spec);
  CHECK(has_rule(plans.c, "R1:cloud-query"));
  CHECK(has_rule(plans.d, "R2:PrefixSumCube"));
  CHECK(has_rule(plans.d, "R4:residual@server"));
  CHECK(has_rule(plans.e, "R3:replicate-by(a)"));
  CHECK(plans.c.family == "cloud_query");
  CHECK(plans.d.family == "server_cache");
  CHECK(plans.e.family == "client_cache");

  std::set<std::string> ids;
  for (const auto& p : cands.plans) ids.insert(p.id);
  CHECK(ids.size() == cands.plans.size());
}

TEST_CASE("candidate cap truncates") {
  Setup s(SynthKind::Congress);
  auto cands = enumerate_candidates(s.g.spec, 5);
  CHECK(cands.truncated);
  CHECK(cands.plans.size() == 5);
}

TEST_CASE("a choice-free view yields only the baseline family") {
  Setup s(SynthKind::Congress, {.rows = 200});
  InterfaceSpec spec;
  spec.sources = s.g.spec.sources;
  spec.views.push_back({"all", ChoicePlan(group_by(scan("votes"), {"chamber"}, {{AggFunc::Count, std::nullopt, "n"}}))});
  auto cands = enumerate_candidates(spec);
  REQUIRE_FALSE(cands.plans.empty());
  for (const auto& p : cands.plans) CHECK(p.family == "cloud_query");
}

TEST_CASE("an unbounded N-M join is pruned; declaring fan-out 1 re-enables structures") {
  Setup nm(SynthKind::NMJoin);
  auto cands = enumerate_candidates(nm.g.spec);
  CHECK_FALSE(cands.pruned.empty());
  for (const auto& p : cands.plans) CHECK_FALSE(has_rule(p, "R2:"));
  auto r = optimize(nm.g.spec, DeploymentModel::defaults(), nm.stats);
  CHECK(r.frontier.empty());
  REQUIRE(r.feasible.infeasible.has_value());
  CHECK(r.feasible.infeasible->interaction == "day_range");

  Setup bounded(SynthKind::NMJoin, {.max_fanout = 1});
  auto c2 = enumerate_candidates(bounded.g.spec);
  CHECK(c2.pruned.empty());
  CHECK(std::any_of(c2.plans.begin(), c2.plans.end(), [](const PhysicalPlan& p) { return has_rule(p, "R2:"); }));
}

TEST_CASE("bounded key joins are never pruned") {
  Setup s(SynthKind::Join);
  auto cands = enumerate_candidates(s.g.spec);
  CHECK(cands.pruned.empty());
  CHECK(std::any_of(cands.plans.begin(), cands.plans.end(), [](const PhysicalPlan& p) { return has_rule(p, "R2:"); }));
}

TEST_CASE("unlimited bounds and budgets make every candidate feasible") {
  Setup s(SynthKind::Congress, {.rows = 2000});
  InterfaceSpec spec = s.g.spec;
  for (auto& i : spec.interactions) i.latency_bound_ms = std::numeric_limits<double>::infinity();
  DeploymentModel dm = DeploymentModel::defaults();
  dm.site(SiteId::Client).memory_budget_bytes = std::numeric_limits<std::uint64_t>::max();
  dm.site(SiteId::Server).memory_budget_bytes = std::numeric_limits<std::uint64_t>::max();
  auto cands = enumerate_candidates(spec);
  auto fs = feasible_set(cands.plans, spec, dm, Calibration{}, s.stats);
  CHECK(fs.feasible.size() == cands.plans.size());
  CHECK_FALSE(fs.infeasible.has_value());
}

TEST_CASE("zero budgets and 1ms bounds leave nothing feasible, with a diagnostic") {
  Setup s(SynthKind::Congress, {.rows = 2000});
  InterfaceSpec spec = s.g.spec;
  for (auto& i : spec.interactions) i.latency_bound_ms = 1.0;
  DeploymentModel dm = DeploymentModel::defaults();
  dm.site(SiteId::Client).memory_budget_bytes = 0;
  dm.site(SiteId::Server).memory_budget_bytes = 0;
  auto fs = feasible_set(enumerate_candidates(spec).plans, spec, dm, Calibration{}, s.stats);
  CHECK(fs.feasible.empty());
  REQUIRE(fs.infeasible.has_value());
  CHECK(fs.infeasible->bound_ms == 1.0);
  CHECK(fs.infeasible->estimate_ms > 1.0);
  CHECK_FALSE(fs.infeasible->message.empty());
}

TEST_CASE("congress: (d) and (e) feasible, (c) not, frontier has a server-heavy and a client-heavy point") {
  Setup s(SynthKind::Congress);
  auto r = optimize(s.g.spec, DeploymentModel::defaults(), s.stats);
  auto plans = pvd::testing::congress_plans(s.g.spec);
  auto feasible_id = [&](const std::string& id) {
    return std::any_of(r.feasible.feasible.begin(), r.feasible.feasible.end(),
                       [&](const Assessed& a) { return a.plan.id == id; });
  };
  CHECK_FALSE(feasible_id(plans.c.id));
  CHECK(feasible_id(plans.d.id));
  CHECK(feasible_id(plans.e.id));

  REQUIRE(r.frontier.size() >= 2);
  CHECK(r.frontier.front().client_bytes == 0);  // all at the server
  CHECK(r.frontier.back().server_bytes == 0);   // all at the client
  for (const auto& a : r.frontier)
    for (const auto& b : r.frontier) CHECK_FALSE(dominates(a, b));
}

TEST_CASE("frontier equals a brute-force dominance filter for every generated spec") {
  for (SynthKind k : {SynthKind::Congress, SynthKind::Filter, SynthKind::Cube, SynthKind::Join}) {
    Setup s(k);
    auto r = optimize(s.g.spec, DeploymentModel::defaults(), s.stats);
    std::set<std::pair<std::uint64_t, std::uint64_t>> got;
    for (const auto& p : r.frontier) got.insert({p.client_bytes, p.server_bytes});
    CHECK_MESSAGE(got == brute_frontier(r.feasible.feasible), to_string(k));
    CHECK(got.size() == r.frontier.size());
  }
}

TEST_CASE("optimize is deterministic") {
  Setup s(SynthKind::Congress);
  auto a = optimize(s.g.spec, DeploymentModel::defaults(), s.stats);
  auto b = optimize(s.g.spec, DeploymentModel::defaults(), s.stats);
  CHECK(pareto_to_json(a.frontier, a).dump() == pareto_to_json(b.frontier, b).dump());
  CHECK(candidates_to_json(a.feasible, false).dump() == candidates_to_json(b.feasible, false).dump());
  REQUIRE(a.frontier.size() == b.frontier.size());
  for (std::size_t i = 0; i < a.frontier.size(); ++i)
    CHECK(physical_plan_to_json(a.frontier[i].plan).dump() == physical_plan_to_json(b.frontier[i].plan).dump());
}

TEST_CASE("doubling budgets keeps frontier plans feasible") {
  Setup s(SynthKind::Congress);
  DeploymentModel dm = DeploymentModel::defaults();
  auto r = optimize(s.g.spec, dm, s.stats);
  DeploymentModel big = dm;
  for (SiteId id : kAllSites)
    if (big.site(id).memory_budget_bytes) *big.site(id).memory_budget_bytes *= 2;
  for (const auto& p : r.frontier) CHECK(pvd::assess(p.plan, s.g.spec, big, Calibration{}, s.stats).feasible);
}

TEST_CASE("physical plans round-trip through JSON") {
  Setup s(SynthKind::Congress, {.rows = 500});
  for (const auto& p : enumerate_candidates(s.g.spec).plans) {
    Json j = physical_plan_to_json(p);
    CHECK(physical_plan_to_json(physical_plan_from_json(j)).dump() == j.dump());
  }
}

}  // TEST_SUITE
