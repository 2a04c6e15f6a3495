#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "pvd/plan_json.hpp"

namespace pvd {

enum class SiteId : std::uint8_t { Client = 0, Server = 1, Cloud = 2 };
inline constexpr std::array<SiteId, 3> kAllSites = {SiteId::Client, SiteId::Server, SiteId::Cloud};

std::string_view to_string(SiteId s);
std::optional<SiteId> parse_site(std::string_view s);

/// Data flows cloud -> server -> client. True when `a` is `b` or sits on the cloud side of it.
inline bool upstream_or_equal(SiteId a, SiteId b) { return static_cast<int>(a) >= static_cast<int>(b); }

struct Site {
  SiteId id = SiteId::Client;
  std::optional<std::uint64_t> memory_budget_bytes;  // nullopt: unlimited
  double compute_scale = 1.0;
};

struct Link {
  SiteId a = SiteId::Client;
  SiteId b = SiteId::Server;
  double latency_ms = 0.0;
  double bandwidth_bytes_per_ms = 1.0;

  double transfer_time(std::uint64_t bytes) const {
    return latency_ms + static_cast<double>(bytes) / bandwidth_bytes_per_ms;
  }
};

struct DeploymentModel {
  std::array<Site, 3> sites;  // indexed by SiteId
  Link client_server;
  Link server_cloud;

  const Site& site(SiteId id) const { return sites[static_cast<std::size_t>(id)]; }
  Site& site(SiteId id) { return sites[static_cast<std::size_t>(id)]; }

  /// LAN-like defaults: 64MB client at half server speed, 1GB server, unlimited cloud.
  static DeploymentModel defaults();
};

/// Throws Error when the model breaks a structural invariant.
void validate(const DeploymentModel& dm);

/// Sum of per-hop transfer times along the linear path; 0 when from == to.
double transfer_cost(const DeploymentModel& dm, SiteId from, SiteId to, std::uint64_t bytes);

using Placement = std::map<SiteId, std::uint64_t>;

/// Per site: placed bytes within budget.
std::map<SiteId, bool> fits(const DeploymentModel& dm, const Placement& placement);

Json deployment_to_json(const DeploymentModel& dm);
DeploymentModel deployment_from_json(const Json& j);
DeploymentModel load_deployment(const std::filesystem::path& path);

}  // namespace pvd
