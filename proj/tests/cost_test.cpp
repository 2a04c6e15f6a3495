#include <cmath>

#include "doctest.h"
#include "congress_plans.hpp"
#include "pvd/cost.hpp"
#include "pvd/oracle.hpp"
#include "test_util.hpp"

using namespace pvd;
using pvd::testing::congress_plans;

namespace {

struct Congress {
  Generated g = pvd::testing::small_congress(20000, 100);
  DatabaseStats stats = compute_stats(g.db);
  DeploymentModel dm = DeploymentModel::defaults();
  Calibration cal;
  pvd::testing::CongressPlans plans = congress_plans(g.spec);

  CostReport assess_plan(const PhysicalPlan& p) const { return pvd::assess(p, g.spec, dm, cal, stats); }
  ViewCost view_cost(const PhysicalPlan& p) const { return estimate_view(g.spec, p.views[0], stats, dm, cal); }
  const Interaction& slider() const { return *g.spec.find_interaction("date_slider"); }
  const Interaction& dropdown() const { return *g.spec.find_interaction("chamber_dropdown"); }
};

void check_close(const Calibration& a, const Calibration& b, double factor) {
  CHECK(a.c_scan == doctest::Approx(b.c_scan * factor));
  CHECK(a.c_hash == doctest::Approx(b.c_hash * factor));
  CHECK(a.c_probe == doctest::Approx(b.c_probe * factor));
  CHECK(a.c_sort == doctest::Approx(b.c_sort * factor));
  CHECK(a.c_cell == doctest::Approx(b.c_cell * factor));
}

}  // namespace

TEST_SUITE("cost-model") {

TEST_CASE("compute_scale multiplies every constant") {
  Calibration base;
  DeploymentModel dm = DeploymentModel::defaults();
  check_close(site_calibration(base, dm, SiteId::Client), base, 2.0);
  check_close(site_calibration(base, dm, SiteId::Server), base, 1.0);
  check_close(base.scaled(2.0), base, 2.0);
}

TEST_CASE("measured calibration is stable and sane") {
  Calibration a = measure_calibration(), b = measure_calibration();
  CHECK(a.valid());
  auto within2 = [](double x, double y) { return x <= 2 * y && y <= 2 * x; };
  CHECK(within2(a.c_scan, b.c_scan));
  CHECK(within2(a.c_hash, b.c_hash));
  CHECK(within2(a.c_probe, b.c_probe));
  CHECK(within2(a.c_sort, b.c_sort));
  CHECK(within2(a.c_cell, b.c_cell));
  CHECK(a.c_probe < a.c_scan * 1e3);

  Calibration back = calibration_from_json(calibration_to_json(a));
  check_close(back, a, 1.0);
}

TEST_CASE("selectivity and cardinality estimates") {
  StatsMap cols{{"k", ColumnStats{4, Value(0), Value(3), 0, 8.0}}};
  CHECK(selectivity(atom("k", CompareOp::Eq, Value(1)), cols) == doctest::Approx(0.25));
  CHECK(selectivity(atom("k", CompareOp::Le, "c", Domain::interval(0, 3, 1)), cols) == 1.0);

  DatabaseStats db;
  db["l"].row_count = 1000;
  db["l"].columns = {{"fk", ColumnStats{50, Value(0), Value(49), 0, 8.0}}};
  db["r"].row_count = 50;
  db["r"].columns = {{"pk", ColumnStats{50, Value(0), Value(49), 0, 8.0}}};
  auto j = join(scan("l"), scan("r"), {{"fk", "pk"}}, 1);
  auto e = estimate_plan(*j, db, Calibration{});
  CHECK(e.rows <= 1000.0);
  CHECK(e.compute_ms > 0.0);
  auto f = estimate_plan(*filter(scan("l"), {atom("fk", CompareOp::Eq, Value(3))}), db, Calibration{});
  CHECK(f.rows == doctest::Approx(20.0));
}

TEST_CASE("congress latencies: (c) pays the round trip, (d) rebuilds on chamber, (e) evaluates locally") {
  Congress k;
  DeploymentModel& dm = k.dm;
  double round_trip = 2 * (dm.client_server.latency_ms + dm.server_cloud.latency_ms);

  auto cc = k.view_cost(k.plans.c), dc = k.view_cost(k.plans.d), ec = k.view_cost(k.plans.e);
  auto c_slider = interaction_latency(k.plans.c.views[0], cc, k.slider(), dm);
  CHECK(c_slider.total() >= round_trip);
  CHECK(c_slider.ship_ms >= round_trip);

  auto d_drop = interaction_latency(k.plans.d.views[0], dc, k.dropdown(), dm);
  auto d_slider = interaction_latency(k.plans.d.views[0], dc, k.slider(), dm);
  CHECK(d_drop.rebuild);
  CHECK(d_drop.build_ms > 0.0);
  CHECK_FALSE(d_slider.rebuild);
  CHECK(d_slider.build_ms == 0.0);

  auto e_slider = interaction_latency(k.plans.e.views[0], ec, k.slider(), dm);
  CHECK_FALSE(e_slider.rebuild);
  CHECK(e_slider.ship_ms == 0.0);
  CHECK(e_slider.build_ms == 0.0);
  CHECK(e_slider.total() < 20.0 / 10);
  CHECK(e_slider.total() <= d_slider.total());
}

TEST_CASE("assess: (c) misses the slider bound, (d) and (e) meet it, (e) holds more client bytes") {
  Congress k;
  auto c = k.assess_plan(k.plans.c), d = k.assess_plan(k.plans.d), e = k.assess_plan(k.plans.e);
  CHECK_FALSE(c.feasible);
  REQUIRE(c.violated.size() >= 1);
  CHECK(c.violated[0].interaction == "date_slider");
  CHECK(d.feasible);
  CHECK(e.feasible);
  CHECK(e.site_bytes.at(SiteId::Client) > d.site_bytes.at(SiteId::Client));
  CHECK(d.site_bytes.at(SiteId::Server) > e.site_bytes.at(SiteId::Server));
  CHECK(e.per_interaction_latency_ms.at("date_slider") <= d.per_interaction_latency_ms.at("date_slider"));
}

TEST_CASE("site bytes equal the resident structure sizes at the eval site") {
  Congress k;
  for (const auto& p : {k.plans.c, k.plans.d, k.plans.e}) {
    auto r = k.assess_plan(p);
    auto vc = k.view_cost(p);
    std::map<SiteId, std::uint64_t> expect{{SiteId::Client, 0}, {SiteId::Server, 0}, {SiteId::Cloud, 0}};
    if (!p.views[0].baseline) expect[p.views[0].eval_site] += vc.resident_bytes();
    for (SiteId s : kAllSites) CHECK(r.site_bytes.at(s) == expect.at(s));
  }
  auto ec = k.view_cost(k.plans.e);
  CHECK(ec.replicas == 2);
  CHECK(ec.resident_bytes() == 2 * ec.instance_bytes);
}

TEST_CASE("ship time follows the strategy's path") {
  Congress k;
  const ViewStrategy& d = k.plans.d.views[0];
  ShipSizes sz{1000, 2000, 300, 40};
  double rebuild = transfer_cost(k.dm, SiteId::Client, SiteId::Cloud, 0) +
                   transfer_cost(k.dm, SiteId::Cloud, SiteId::Cloud, 1000) +
                   transfer_cost(k.dm, SiteId::Cloud, SiteId::Server, 2000) +
                   transfer_cost(k.dm, SiteId::Server, SiteId::Server, 300) +
                   transfer_cost(k.dm, SiteId::Server, SiteId::Client, 40);
  CHECK(ship_ms(k.dm, d, true, sz) == doctest::Approx(rebuild));
  double warm = transfer_cost(k.dm, SiteId::Client, SiteId::Server, 0) + transfer_cost(k.dm, SiteId::Server, SiteId::Client, 40);
  CHECK(ship_ms(k.dm, d, false, sz) == doctest::Approx(warm));
  CHECK(rebuilds_on(d, k.dropdown()));
  CHECK_FALSE(rebuilds_on(d, k.slider()));
  CHECK_FALSE(rebuilds_on(k.plans.e.views[0], k.dropdown()));
}

TEST_CASE("choice-free spec without interactions is feasible with zero bytes") {
  auto g = pvd::testing::small_congress(100, 5);
  InterfaceSpec spec;
  spec.sources = g.spec.sources;
  spec.views.push_back({"all", ChoicePlan(group_by(scan("votes"), {"chamber"}, {{AggFunc::Count, std::nullopt, "n"}}))});
  PhysicalPlan p{"p0", "cloud_query", {ViewStrategy{"all"}}, {"R1:cloud-query(all)"}};
  auto r = pvd::assess(p, spec, DeploymentModel::defaults(), Calibration{}, compute_stats(g.db));
  CHECK(r.feasible);
  for (SiteId s : kAllSites) CHECK(r.site_bytes.at(s) == 0);
  CHECK(std::isinf(r.headroom_ms));
}

TEST_CASE("exceeding the client budget records a site violation") {
  Congress k;
  k.dm.site(SiteId::Client).memory_budget_bytes = 100;
  auto r = k.assess_plan(k.plans.e);
  CHECK_FALSE(r.feasible);
  REQUIRE(r.site_violations.size() == 1);
  CHECK(r.site_violations[0].site == SiteId::Client);
  CHECK(r.site_violations[0].budget == 100);
}

TEST_CASE("relaxing bounds keeps feasible plans feasible; cached structures cost nothing to untouched interactions") {
  Congress k;
  auto cands = enumerate_candidates(k.g.spec).plans;
  InterfaceSpec relaxed = k.g.spec;
  for (auto& i : relaxed.interactions) i.latency_bound_ms *= 10;
  for (const auto& p : cands) {
    auto r = k.assess_plan(p);
    if (r.feasible) CHECK(pvd::assess(p, relaxed, k.dm, k.cal, k.stats).feasible);
    for (const auto& i : k.g.spec.interactions) {
      if (rebuilds_on(p.views[0], i)) continue;
      CHECK(r.breakdown.at(i.name).build_ms == 0.0);
    }
  }
}

TEST_CASE("cost report serializes the breakdown") {
  Congress k;
  Json j = cost_report_to_json(k.assess_plan(k.plans.d));
  CHECK(j.contains("feasible"));
  CHECK(j.dump().find("date_slider") != std::string::npos);
}

}  // TEST_SUITE
