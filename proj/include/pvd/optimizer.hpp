#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pvd/cost.hpp"
#include "pvd/physical.hpp"

namespace pvd {

inline constexpr std::size_t kDefaultCandidateCap = 100'000;

struct CandidateSet {
  std::vector<PhysicalPlan> plans;
  bool truncated = false;
  /// Structure matches skipped because a join without declared fan-out feeds them.
  std::vector<std::string> pruned;
};

/// Rule application: R1 cloud baseline, R2 Build/Cache/Eval per match and
/// site pair, R3 per-value replication over enumerated build choices, R4
/// residual placement at or downstream of Eval. One strategy per view; the
/// plan set is the cross product over views, generated in a fixed order.
CandidateSet enumerate_candidates(const InterfaceSpec& spec, std::size_t cap = kDefaultCandidateCap);

struct Assessed {
  PhysicalPlan plan;
  CostReport report;
};

struct InfeasibleDiagnostic {
  std::string plan_id;
  std::string interaction;  // empty when only site budgets fail
  double bound_ms = 0.0;
  double estimate_ms = 0.0;
  std::string message;
};

struct FeasibleResult {
  std::vector<Assessed> assessed;  // every candidate, generation order
  std::vector<Assessed> feasible;
  std::optional<InfeasibleDiagnostic> infeasible;
};

FeasibleResult feasible_set(const std::vector<PhysicalPlan>& candidates, const InterfaceSpec& spec,
                            const DeploymentModel& dm, const Calibration& cal, const DatabaseStats& stats,
                            std::size_t cube_cell_cap = kDefaultCubeCellCap);

struct ParetoPoint {
  PhysicalPlan plan;
  CostReport report;
  std::uint64_t client_bytes = 0;
  std::uint64_t server_bytes = 0;
  double headroom_ms = 0.0;
};

bool dominates(const ParetoPoint& a, const ParetoPoint& b);
ParetoPoint to_point(const Assessed& a);

/// Non-dominated points on (client_bytes, server_bytes), one per byte pair,
/// ordered by client bytes then server bytes.
std::vector<ParetoPoint> pareto(const std::vector<Assessed>& feasible);

struct OptimizeOptions {
  std::size_t candidate_cap = kDefaultCandidateCap;
  std::size_t cube_cell_cap = kDefaultCubeCellCap;
  Calibration calibration;
};

struct OptimizeResult {
  CandidateSet candidates;
  FeasibleResult feasible;
  std::vector<ParetoPoint> frontier;
};

OptimizeResult optimize(const InterfaceSpec& spec, const DeploymentModel& dm, const DatabaseStats& stats,
                        const OptimizeOptions& opts = {});

Json pareto_to_json(const std::vector<ParetoPoint>& frontier, const OptimizeResult& r);
Json candidates_to_json(const FeasibleResult& r, bool truncated);

}  // namespace pvd
