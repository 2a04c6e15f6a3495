#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "pvd/cli.hpp"
#include "pvd/deploy.hpp"
#include "test_util.hpp"

using namespace pvd;
using pvd::testing::read_file;
using pvd::testing::scratch_dir;
using pvd::testing::write_file;

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run pvd_run(std::vector<std::string> args) {
  args.insert(args.begin(), "pvd");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

// Small congress dataset written once per test case.
struct Workspace {
  fs::path dir = scratch_dir("cli");
  fs::path data = dir / "data";
  std::string spec = (data / "spec.json").string();

  Workspace() {
    Run g = pvd_run({"generate", "--kind", "congress", "--rows", "3000", "--members", "30", "--out", data.string()});
    REQUIRE(g.code == kExitOk);
  }

  Run optimize(const fs::path& out, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args = {"optimize", "--spec", spec, "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return pvd_run(args);
  }

  std::vector<fs::path> plans(const fs::path& out) const {
    std::vector<fs::path> ps;
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().filename().string().rfind("plan_", 0) == 0) ps.push_back(e.path());
    std::sort(ps.begin(), ps.end());
    return ps;
  }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("stats writes per-column statistics, identically on rerun") {
  Workspace w;
  Run a = pvd_run({"stats", "--spec", w.spec, "--out", (w.dir / "s1").string()});
  Run b = pvd_run({"stats", "--spec", w.spec, "--out", (w.dir / "s2").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  std::string s1 = read_file(w.dir / "s1" / "stats.json");
  CHECK(s1 == read_file(w.dir / "s2" / "stats.json"));
  Json j = Json::parse(s1);
  const Json& votes = j["relations"]["votes"];
  CHECK(votes["row_count"] == 3000);
  CHECK(votes["columns"]["name"]["distinct_count"].get<int>() <= 30);
  CHECK(votes["columns"]["chamber"]["distinct_count"] == 2);
}

TEST_CASE("missing source files are a usage error naming the source") {
  Workspace w;
  fs::remove(w.data / "votes.csv");
  Run r = pvd_run({"stats", "--spec", w.spec, "--out", (w.dir / "s").string()});
  CHECK(r.code == kExitUsage);
  CHECK(contains(r.err, "votes"));
}

TEST_CASE("optimize writes the frontier and is byte-identical across runs") {
  Workspace w;
  Run a = w.optimize(w.dir / "o1"), b = w.optimize(w.dir / "o2");
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  CHECK(a.out == b.out);
  Json pareto = Json::parse(read_file(w.dir / "o1" / "pareto.json"));
  CHECK(pareto.dump().size() > 2);
  auto p1 = w.plans(w.dir / "o1"), p2 = w.plans(w.dir / "o2");
  CHECK(p1.size() >= 2);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].filename() == p2[i].filename());
    CHECK(read_file(p1[i]) == read_file(p2[i]));
  }
  for (const char* f : {"pareto.json", "candidates.json"})
    CHECK(read_file(w.dir / "o1" / f) == read_file(w.dir / "o2" / f));
}

TEST_CASE("an infeasible deployment exits with code 2 and a diagnostic") {
  Workspace w;
  DeploymentModel dm = DeploymentModel::defaults();
  dm.client_server.latency_ms = 200;  // WAN
  dm.site(SiteId::Client).memory_budget_bytes = 1;
  fs::path deploy = w.dir / "wan.json";
  save_json(deploy, deployment_to_json(dm));
  Run r = w.optimize(w.dir / "o", {"--deploy", deploy.string()});
  CHECK(r.code == kExitInfeasible);
  CHECK(contains(r.err, "infeasible"));
  CHECK(contains(r.err, "date_slider"));
}

TEST_CASE("an unbounded N-M join spec has no feasible plan") {
  fs::path dir = scratch_dir("cli-nm");
  REQUIRE(pvd_run({"generate", "--kind", "nm-join", "--out", dir.string()}).code == kExitOk);
  Run r = pvd_run({"optimize", "--spec", (dir / "spec.json").string(), "--out", (dir / "o").string()});
  CHECK(r.code == kExitInfeasible);
}

TEST_CASE("explain prints provenance, operators and per-interaction costs") {
  Workspace w;
  REQUIRE(w.optimize(w.dir / "o").code == kExitOk);
  for (const auto& p : w.plans(w.dir / "o")) {
    Run r = pvd_run({"explain", "--spec", w.spec, "--plan", p.string()});
    CHECK(r.code == kExitOk);
    CHECK(contains(r.out, "R2:PrefixSumCube"));
    CHECK(contains(r.out, "date_slider"));
    CHECK(contains(r.out, "chamber_dropdown"));
    CHECK(contains(r.out, "feasible: yes"));
  }
}

TEST_CASE("a malformed plan file is a parse error naming the location") {
  Workspace w;
  write_file(w.dir / "bad.json", "{\"id\": \"p1\",\n \"views\": [ }\n");
  Run r = pvd_run({"explain", "--spec", w.spec, "--plan", (w.dir / "bad.json").string()});
  CHECK(r.code == kExitUsage);
  CHECK(contains(r.err, "bad.json"));
  CHECK(contains(r.err, "line 2"));

  write_file(w.dir / "typed.json", "{\"id\": 5, \"family\": \"x\", \"views\": []}");
  Run t = pvd_run({"explain", "--spec", w.spec, "--plan", (w.dir / "typed.json").string()});
  CHECK(t.code == kExitUsage);
  CHECK(contains(t.err, "id"));
}

TEST_CASE("verify passes frontier plans and catches injected faults") {
  Workspace w;
  REQUIRE(w.optimize(w.dir / "o").code == kExitOk);
  auto plans = w.plans(w.dir / "o");
  REQUIRE_FALSE(plans.empty());
  for (const auto& p : plans) {
    Run r = pvd_run({"verify", "--spec", w.spec, "--plan", p.string(), "--net", "none"});
    CHECK(r.code == kExitOk);
    CHECK(contains(r.out, "992/992"));
    CHECK(contains(r.out, "PASS"));
  }
  Run bad = pvd_run({"verify", "--spec", w.spec, "--plan", plans.back().string(), "--net", "none", "--inject-fault"});
  CHECK(bad.code == kExitVerifyFailed);
  CHECK(contains(bad.out, "mismatch at {"));
  CHECK(contains(bad.out, "FAIL"));
}

TEST_CASE("seeded verify samples are reproducible") {
  Workspace w;
  REQUIRE(w.optimize(w.dir / "o").code == kExitOk);
  std::string plan = w.plans(w.dir / "o").front().string();
  auto run = [&](const char* out) {
    Run r = pvd_run({"verify", "--spec", w.spec, "--plan", plan, "--net", "none", "--sample", "100", "--seed", "7",
                     "--out", (w.dir / out).string()});
    CHECK(r.code == kExitOk);
    Json j = Json::parse(read_file(w.dir / out / "verify.json"));
    for (auto& i : j["interactions"]) {
      CHECK(i["checked"] == 100);
      i.erase("max_latency_ms");
    }
    return j.dump();
  };
  CHECK(run("v1") == run("v2"));
}

TEST_CASE("bench writes the latency table") {
  Workspace w;
  REQUIRE(w.optimize(w.dir / "o").code == kExitOk);
  std::string plan = w.plans(w.dir / "o").back().string();
  Run r = pvd_run({"bench", "--spec", w.spec, "--plan", plan, "--sample", "20", "--out", (w.dir / "b").string()});
  REQUIRE(r.code == kExitOk);
  std::string csv = read_file(w.dir / "b" / "bench.csv");
  CHECK(csv == r.out);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "interaction,kind,bound_ms,p50,p95,max,violations");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(rows == 2);
}

TEST_CASE("a slow link shows up in every benched event of a cloud-resident plan") {
  Workspace w;
  fs::path deploy = w.dir / "slow.json";
  DeploymentModel dm = DeploymentModel::defaults();
  dm.client_server.latency_ms = 50;
  save_json(deploy, deployment_to_json(dm));
  // Loosen the bounds so the cloud-query plan is feasible under this link.
  Json spec = Json::parse(read_file(w.spec));
  for (auto& i : spec["interactions"]) i["latency_bound_ms"] = 1e6;
  write_file(w.data / "loose.json", spec.dump());
  std::string loose = (w.data / "loose.json").string();
  REQUIRE(pvd_run({"optimize", "--spec", loose, "--deploy", deploy.string(), "--out", (w.dir / "o").string()}).code ==
          kExitOk);
  // With bounds this loose a zero-byte plan dominates everything else, and it lives in the cloud.
  auto plans = w.plans(w.dir / "o");
  REQUIRE(plans.size() == 1);
  fs::path plan = plans[0];
  std::string family = Json::parse(read_file(plan))["family"];
  REQUIRE((family == "cloud_query" || family == "cloud_structure"));
  Run r = pvd_run({"bench", "--spec", loose, "--deploy", deploy.string(), "--plan", plan.string(), "--sample", "10"});
  REQUIRE(r.code == kExitOk);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    REQUIRE(f.size() == 7);
    CHECK(std::stod(f[3]) >= 100.0);  // p50 covers the 50 ms hop both ways
  }
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(pvd_run({}).code == kExitUsage);
  CHECK(pvd_run({"frobnicate"}).code == kExitUsage);
  CHECK(pvd_run({"optimize"}).code == kExitUsage);
  CHECK(pvd_run({"verify", "--spec", "x.json"}).code == kExitUsage);
  CHECK(pvd_run({"generate", "--kind", "nope", "--out", scratch_dir("cli-u").string()}).code == kExitUsage);
  Run help = pvd_run({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(contains(help.out, "optimize"));
}

}  // TEST_SUITE
