#pragma once

#include <optional>
#include <stdexcept>

#include "pvd/optimizer.hpp"

namespace pvd::testing {

/// The three congress strategies: (c) whole query at the cloud, (d) one cube
/// cached and evaluated at the server, (e) per-chamber cubes cached at the client.
struct CongressPlans {
  PhysicalPlan c, d, e;
};

inline bool is_cube(const ViewStrategy& s) {
  return !s.baseline && s.kind.family == StructureFamily::PrefixSumCube;
}

inline CongressPlans congress_plans(const InterfaceSpec& spec) {
  auto cands = enumerate_candidates(spec).plans;
  std::optional<PhysicalPlan> c, d, e;
  for (const auto& p : cands) {
    const ViewStrategy& s = p.views.at(0);
    if (s.baseline && !c) c = p;
    if (is_cube(s) && s.build_site == SiteId::Cloud && s.eval_site == SiteId::Server &&
        s.residual_site == SiteId::Server && s.cache_mode == CacheMode::Single && !d)
      d = p;
    if (is_cube(s) && s.build_site == SiteId::Cloud && s.eval_site == SiteId::Client &&
        s.residual_site == SiteId::Client && s.cache_mode == CacheMode::Replicated && !e)
      e = p;
  }
  if (!c || !d || !e) throw std::runtime_error("congress candidates lack one of the three plan families");
  return {*c, *d, *e};
}

}  // namespace pvd::testing
