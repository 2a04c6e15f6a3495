#include "pvd/deploy.hpp"

#include <cmath>

#include "pvd/errors.hpp"

namespace pvd {

std::string_view to_string(SiteId s) {
  switch (s) {
    case SiteId::Client: return "client";
    case SiteId::Server: return "server";
    case SiteId::Cloud: return "cloud";
  }
  return "?";
}

std::optional<SiteId> parse_site(std::string_view s) {
  for (SiteId id : kAllSites)
    if (to_string(id) == s) return id;
  return std::nullopt;
}

DeploymentModel DeploymentModel::defaults() {
  DeploymentModel dm;
  dm.sites[0] = Site{SiteId::Client, 64ull << 20, 2.0};
  dm.sites[1] = Site{SiteId::Server, 1ull << 30, 1.0};
  dm.sites[2] = Site{SiteId::Cloud, std::nullopt, 1.0};
  dm.client_server = Link{SiteId::Client, SiteId::Server, 2.0, 12'500.0};
  dm.server_cloud = Link{SiteId::Server, SiteId::Cloud, 15.0, 125'000.0};
  return dm;
}

void validate(const DeploymentModel& dm) {
  for (std::size_t i = 0; i < 3; ++i) {
    const Site& s = dm.sites[i];
    if (s.id != kAllSites[i]) throw Error("deployment sites must be client, server, cloud in that order");
    if (!(s.compute_scale > 0.0) || !std::isfinite(s.compute_scale))
      throw Error("site " + std::string(to_string(s.id)) + " needs a positive compute_scale");
    if (s.id != SiteId::Cloud && !s.memory_budget_bytes)
      throw Error("only the cloud may have unlimited storage");
  }
  for (const Link* l : {&dm.client_server, &dm.server_cloud}) {
    if (l->latency_ms < 0.0 || !std::isfinite(l->latency_ms)) throw Error("link latency must be non-negative");
    if (!(l->bandwidth_bytes_per_ms > 0.0)) throw Error("link bandwidth must be positive");
  }
}

double transfer_cost(const DeploymentModel& dm, SiteId from, SiteId to, std::uint64_t bytes) {
  int lo = std::min(static_cast<int>(from), static_cast<int>(to));
  int hi = std::max(static_cast<int>(from), static_cast<int>(to));
  double t = 0.0;
  if (lo == 0 && hi >= 1) t += dm.client_server.transfer_time(bytes);
  if (lo <= 1 && hi == 2) t += dm.server_cloud.transfer_time(bytes);
  return t;
}

std::map<SiteId, bool> fits(const DeploymentModel& dm, const Placement& placement) {
  std::map<SiteId, bool> out;
  for (SiteId id : kAllSites) {
    auto it = placement.find(id);
    std::uint64_t placed = it == placement.end() ? 0 : it->second;
    const auto& budget = dm.site(id).memory_budget_bytes;
    out[id] = !budget || placed <= *budget;
  }
  return out;
}

Json deployment_to_json(const DeploymentModel& dm) {
  Json sites = Json::array();
  for (const Site& s : dm.sites) {
    Json j;
    j["id"] = to_string(s.id);
    if (s.memory_budget_bytes) j["memory_budget_bytes"] = *s.memory_budget_bytes;
    else j["memory_budget_bytes"] = "unlimited";
    j["compute_scale"] = s.compute_scale;
    sites.push_back(std::move(j));
  }
  Json links = Json::array();
  for (const Link* l : {&dm.client_server, &dm.server_cloud}) {
    Json j;
    j["endpoints"] = {to_string(l->a), to_string(l->b)};
    j["latency_ms"] = l->latency_ms;
    j["bandwidth_bytes_per_ms"] = l->bandwidth_bytes_per_ms;
    links.push_back(std::move(j));
  }
  Json out;
  out["sites"] = std::move(sites);
  out["links"] = std::move(links);
  return out;
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw PlanFormatError("deployment" + where + ": " + what);
}

SiteId site_at(const Json& j, const std::string& where) {
  if (!j.is_string()) bad(where, "expected a site name");
  auto s = parse_site(j.get<std::string>());
  if (!s) bad(where, "unknown site '" + j.get<std::string>() + "'");
  return *s;
}

double number_at(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) bad(where + "." + key, "expected a number");
  return j[key].get<double>();
}

}  // namespace

DeploymentModel deployment_from_json(const Json& j) {
  if (!j.is_object()) bad("", "expected an object");
  DeploymentModel dm = DeploymentModel::defaults();
  if (j.contains("sites")) {
    std::array<bool, 3> seen{};
    const Json& sites = j["sites"];
    if (!sites.is_array()) bad(".sites", "expected an array");
    for (std::size_t i = 0; i < sites.size(); ++i) {
      std::string where = ".sites[" + std::to_string(i) + "]";
      const Json& s = sites[i];
      if (!s.is_object() || !s.contains("id")) bad(where, "expected an object with an id");
      SiteId id = site_at(s["id"], where + ".id");
      if (seen[static_cast<std::size_t>(id)]) bad(where, "duplicate site");
      seen[static_cast<std::size_t>(id)] = true;
      Site& site = dm.site(id);
      if (s.contains("memory_budget_bytes")) {
        const Json& b = s["memory_budget_bytes"];
        if (b.is_string() && b.get<std::string>() == "unlimited") site.memory_budget_bytes.reset();
        else if (b.is_number_integer() && b.get<std::int64_t>() >= 0)
          site.memory_budget_bytes = b.get<std::uint64_t>();
        else bad(where + ".memory_budget_bytes", "expected a non-negative integer or \"unlimited\"");
      }
      if (s.contains("compute_scale")) site.compute_scale = number_at(s, "compute_scale", where);
    }
  }
  if (j.contains("links")) {
    const Json& links = j["links"];
    if (!links.is_array()) bad(".links", "expected an array");
    for (std::size_t i = 0; i < links.size(); ++i) {
      std::string where = ".links[" + std::to_string(i) + "]";
      const Json& l = links[i];
      if (!l.is_object() || !l.contains("endpoints") || !l["endpoints"].is_array() || l["endpoints"].size() != 2)
        bad(where, "expected endpoints [a, b]");
      SiteId a = site_at(l["endpoints"][0], where + ".endpoints[0]");
      SiteId b = site_at(l["endpoints"][1], where + ".endpoints[1]");
      int lo = std::min(static_cast<int>(a), static_cast<int>(b));
      int hi = std::max(static_cast<int>(a), static_cast<int>(b));
      Link* target = nullptr;
      if (lo == 0 && hi == 1) target = &dm.client_server;
      else if (lo == 1 && hi == 2) target = &dm.server_cloud;
      else bad(where, "only client-server and server-cloud links exist");
      target->latency_ms = number_at(l, "latency_ms", where);
      target->bandwidth_bytes_per_ms = number_at(l, "bandwidth_bytes_per_ms", where);
    }
  }
  validate(dm);
  return dm;
}

DeploymentModel load_deployment(const std::filesystem::path& path) {
  Json j = load_json(path);
  if (j.contains("deployment")) return deployment_from_json(j["deployment"]);
  return deployment_from_json(j);
}

}  // namespace pvd
