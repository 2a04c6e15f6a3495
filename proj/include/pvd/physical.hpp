#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pvd/deploy.hpp"
#include "pvd/plan.hpp"
#include "pvd/plan_json.hpp"
#include "pvd/structures.hpp"

namespace pvd {

enum class CacheMode : std::uint8_t { Single, Replicated };
std::string_view to_string(CacheMode m);

/// How one view is answered: the whole plan at the cloud, or one structure
/// built at `build_site`, cached and evaluated at `eval_site`, with the rest
/// of the plan run at `residual_site`.
struct ViewStrategy {
  std::string view;
  bool baseline = true;
  int matched_node = -1;
  StructureKind kind;
  SiteId build_site = SiteId::Cloud;
  SiteId eval_site = SiteId::Cloud;
  SiteId residual_site = SiteId::Cloud;
  CacheMode cache_mode = CacheMode::Single;
  /// Choices baked into the structure's build input. Replicated caches hold
  /// one instance per value combination of these.
  std::vector<std::string> cache_key;
};

struct PhysicalOp {
  std::string op;  // ShipTable, Query, Build, Ship, Cache, Eval, Residual, Render
  SiteId site = SiteId::Cloud;
  std::optional<SiteId> to;
  std::string detail;
};

struct PhysicalPlan {
  std::string id;
  std::string family;
  std::vector<ViewStrategy> views;
  std::vector<std::string> provenance;

  const ViewStrategy* find(const std::string& view) const;
};

/// Short family tag: cloud_query, server_cache, client_cache or cloud_structure.
std::string family_tag(const ViewStrategy& s);

/// Operator DAG of the plan in dataflow order, views in plan order.
std::vector<PhysicalOp> operators(const PhysicalPlan& plan);

/// Re-derives the MatchResult a structure strategy refers to.
/// PlanFormatError when the view plan no longer offers that match.
MatchResult resolve_match(const InterfaceSpec& spec, const ViewStrategy& s);

Json physical_plan_to_json(const PhysicalPlan& plan);
PhysicalPlan physical_plan_from_json(const Json& j);
PhysicalPlan load_physical_plan(const std::filesystem::path& path);

}  // namespace pvd
