#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pvd/calibration.hpp"
#include "pvd/deploy.hpp"
#include "pvd/physical.hpp"

namespace pvd {

/// Estimated output of a plan node: row count, propagated column statistics,
/// and the compute time of the subtree.
struct PlanEstimate {
  double rows = 0.0;
  StatsMap columns;
  double compute_ms = 0.0;

  double width() const;
  std::uint64_t bytes() const;
};

/// Estimated fraction of rows an atom keeps. Choice-bound range atoms are
/// worst case (1); equality uses 1/distinct.
double selectivity(const Atom& a, const StatsMap& columns);

/// Bottom-up cardinality and cost estimate. `overrides` replaces the subtree
/// at a node id (the matched subplan when costing a residual). Subplan
/// Choice nodes take the most expensive alternative.
PlanEstimate estimate_plan(const PlanNode& node, const DatabaseStats& stats, const Calibration& cal,
                           const std::map<int, PlanEstimate>& overrides = {});

/// Base calibration scaled by the site's compute_scale.
Calibration site_calibration(const Calibration& base, const DeploymentModel& dm, SiteId s);

/// Microbenchmarks on this machine (median of 5 runs each).
Calibration measure_calibration();
/// measure_calibration() scaled by the site's compute_scale.
Calibration calibrate(const Site& site);

Json calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const Json& j);

/// Transferred byte counts along a strategy's path.
struct ShipSizes {
  std::uint64_t build_input = 0;
  std::uint64_t structure = 0;
  std::uint64_t eval_output = 0;
  std::uint64_t result = 0;
};

/// Network time of one interaction under `s`. A rebuild fetches the build
/// input from the cloud and ships the structure to the eval site; every
/// interaction then ships eval output to the residual site and the result
/// to the client. Request messages carry no payload. Baselines: client to
/// cloud and back.
double ship_ms(const DeploymentModel& dm, const ViewStrategy& s, bool rebuild, const ShipSizes& sizes);

/// Single-instance caches rebuild when the interaction binds a cache-key choice.
bool rebuilds_on(const ViewStrategy& s, const Interaction& i);

/// Interaction-independent estimates for one view strategy.
struct ViewCost {
  bool valid = true;
  std::string invalid_reason;
  double baseline_ms = 0.0;     // whole plan at the cloud
  double build_input_ms = 0.0;  // at the cloud
  double build_ms = 0.0;        // at build_site
  double eval_ms = 0.0;         // at eval_site
  double residual_ms = 0.0;     // at residual_site
  ShipSizes sizes;
  std::uint64_t instance_bytes = 0;
  std::uint64_t replicas = 1;
  std::size_t cells = 0;
  std::uint64_t resident_bytes() const { return instance_bytes * replicas; }
};

ViewCost estimate_view(const InterfaceSpec& spec, const ViewStrategy& s, const DatabaseStats& stats,
                       const DeploymentModel& dm, const Calibration& base,
                       std::size_t cube_cell_cap = kDefaultCubeCellCap);

struct LatencyBreakdown {
  double build_ms = 0.0;  // build input query + structure build
  double eval_ms = 0.0;
  double ship_ms = 0.0;
  double residual_ms = 0.0;
  bool rebuild = false;
  double total() const { return build_ms + eval_ms + ship_ms + residual_ms; }
};

LatencyBreakdown interaction_latency(const ViewStrategy& s, const ViewCost& c, const Interaction& i,
                                     const DeploymentModel& dm);

struct Violation {
  std::string interaction;
  double bound_ms = 0.0;
  double estimate_ms = 0.0;
};

struct SiteViolation {
  SiteId site = SiteId::Client;
  std::uint64_t bytes = 0;
  std::uint64_t budget = 0;
};

struct CostReport {
  std::map<std::string, double> per_interaction_latency_ms;
  std::map<std::string, LatencyBreakdown> breakdown;
  std::map<SiteId, std::uint64_t> site_bytes;
  bool feasible = true;
  std::vector<Violation> violated;
  std::vector<SiteViolation> site_violations;
  std::vector<std::string> invalid;  // strategies that cannot be built at all
  /// min over interactions of bound - estimate; +inf without interactions.
  double headroom_ms = std::numeric_limits<double>::infinity();
};

/// Combines per-view estimates (in plan view order) into a report.
CostReport assess_costs(const PhysicalPlan& plan, const std::vector<ViewCost>& costs, const InterfaceSpec& spec,
                        const DeploymentModel& dm);

CostReport assess(const PhysicalPlan& plan, const InterfaceSpec& spec, const DeploymentModel& dm,
                  const Calibration& base, const DatabaseStats& stats,
                  std::size_t cube_cell_cap = kDefaultCubeCellCap);

Json cost_report_to_json(const CostReport& r);

}  // namespace pvd
