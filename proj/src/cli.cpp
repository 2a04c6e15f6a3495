#include "pvd/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "pvd/cost.hpp"
#include "pvd/errors.hpp"
#include "pvd/executor.hpp"
#include "pvd/optimizer.hpp"
#include "pvd/plan_json.hpp"
#include "pvd/synth.hpp"

namespace pvd {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string spec;
  std::string data;
  std::string deploy;
  std::string out;
  std::string plan;
  std::string calibration;
  std::string trace;
  std::string net = "simulated";
  std::uint64_t seed = 7;
  std::size_t sample = 0;
  bool exhaustive = false;
  bool inject_fault = false;
  std::size_t cap_candidates = kDefaultCandidateCap;
  std::size_t cap_cells = kDefaultCubeCellCap;
  std::size_t cap_bindings = kDefaultBindingCap;

  // generate
  std::string kind = "congress";
  std::size_t rows = 0;
  std::size_t members = 100;
  std::int64_t fanout = 0;
};

// Resolved run configuration: explicit flags win over the config file.
struct RunConfig {
  fs::path spec_path;
  fs::path data_dir;
  DeploymentModel deployment = DeploymentModel::defaults();
  Calibration calibration;
  std::uint64_t seed = 7;
  std::size_t cap_bindings = kDefaultBindingCap;
  std::size_t cap_candidates = kDefaultCandidateCap;
  std::size_t cap_cells = kDefaultCubeCellCap;
  fs::path output_dir = ".";
};

class UsageError : public Error {
 public:
  using Error::Error;
};

RunConfig resolve(const Options& o, const CLI::App& cmd) {
  RunConfig rc;
  fs::path base = ".";
  if (!o.config.empty()) {
    Json j = load_json(o.config);
    base = fs::path(o.config).parent_path();
    auto rel = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    if (j.contains("spec")) rc.spec_path = rel(j["spec"].get<std::string>());
    if (j.contains("data")) rc.data_dir = rel(j["data"].get<std::string>());
    if (j.contains("deployment")) rc.deployment = deployment_from_json(j["deployment"]);
    if (j.contains("calibration")) rc.calibration = calibration_from_json(j["calibration"]);
    if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("output_dir")) rc.output_dir = rel(j["output_dir"].get<std::string>());
    if (j.contains("caps")) {
      const Json& c = j["caps"];
      if (c.contains("bindings")) rc.cap_bindings = c["bindings"].get<std::size_t>();
      if (c.contains("candidates")) rc.cap_candidates = c["candidates"].get<std::size_t>();
      if (c.contains("cube_cells")) rc.cap_cells = c["cube_cells"].get<std::size_t>();
    }
  }
  auto given = [&](const char* name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (given("--spec")) rc.spec_path = o.spec;
  if (given("--data")) rc.data_dir = o.data;
  if (given("--deploy")) rc.deployment = load_deployment(o.deploy);
  if (given("--calibration")) rc.calibration = calibration_from_json(load_json(o.calibration));
  if (given("--seed")) rc.seed = o.seed;
  if (given("--out")) rc.output_dir = o.out;
  if (given("--cap-candidates")) rc.cap_candidates = o.cap_candidates;
  if (given("--cap-cells")) rc.cap_cells = o.cap_cells;
  if (given("--cap-bindings")) rc.cap_bindings = o.cap_bindings;
  if (rc.data_dir.empty() && !rc.spec_path.empty()) rc.data_dir = rc.spec_path.parent_path();
  if (rc.data_dir.empty()) rc.data_dir = ".";
  return rc;
}

InterfaceSpec load_checked_spec(const RunConfig& rc) {
  if (rc.spec_path.empty()) throw UsageError("--spec is required");
  InterfaceSpec spec = load_spec(rc.spec_path);
  auto diags = validate_spec(spec);
  if (!diags.empty()) {
    std::string msg = "invalid spec:";
    for (const auto& d : diags) msg += "\n  " + std::string(to_string(d.code)) + " " + d.subject + ": " + d.message;
    throw PlanFormatError(msg);
  }
  return spec;
}

Json stats_to_json(const DatabaseStats& stats) {
  Json rels;
  for (const auto& [name, rs] : stats) {
    Json rj;
    rj["row_count"] = rs.row_count;
    Json cols;
    for (const auto& [col, s] : rs.columns) {
      Json cj;
      cj["distinct_count"] = s.distinct_count;
      cj["min"] = s.min ? value_to_json(*s.min) : Json(nullptr);
      cj["max"] = s.max ? value_to_json(*s.max) : Json(nullptr);
      cj["null_count"] = s.null_count;
      cj["width_bytes"] = s.width_bytes;
      cols[col] = std::move(cj);
    }
    rj["columns"] = std::move(cols);
    rels[name] = std::move(rj);
  }
  Json j;
  j["relations"] = std::move(rels);
  return j;
}

NetMode net_mode(const Options& o) {
  auto m = parse_net_mode(o.net);
  if (!m) throw UsageError("--net must be simulated or none");
  return *m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// ---- commands --------------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out) {
  auto kind = parse_synth_kind(o.kind);
  if (!kind) throw UsageError("unknown --kind '" + o.kind + "' (congress, filter, cube, join, nm-join)");
  SynthOptions so;
  so.rows = o.rows;
  so.seed = o.seed;
  so.members = o.members;
  if (o.fanout > 0) so.max_fanout = o.fanout;
  fs::path dir = o.out.empty() ? fs::path(o.kind) : fs::path(o.out);
  write_generated(generate(*kind, so), dir);
  out << "wrote " << (dir / "spec.json").string() << "\n";
  return kExitOk;
}

int cmd_stats(const RunConfig& rc, std::ostream& out) {
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  fs::create_directories(rc.output_dir);
  fs::path path = rc.output_dir / "stats.json";
  save_json(path, stats_to_json(compute_stats(db)));
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_optimize(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  OptimizeOptions opts;
  opts.candidate_cap = rc.cap_candidates;
  opts.cube_cell_cap = rc.cap_cells;
  opts.calibration = rc.calibration;
  OptimizeResult r = optimize(spec, rc.deployment, compute_stats(db), opts);
  fs::create_directories(rc.output_dir);
  save_json(rc.output_dir / "pareto.json", pareto_to_json(r.frontier, r));
  save_json(rc.output_dir / "candidates.json", candidates_to_json(r.feasible, r.candidates.truncated));
  for (const auto& p : r.frontier) save_json(rc.output_dir / ("plan_" + p.plan.id + ".json"), physical_plan_to_json(p.plan));
  out << r.candidates.plans.size() << " candidates, " << r.feasible.feasible.size() << " feasible, "
      << r.frontier.size() << " on the frontier\n";
  for (const auto& p : r.frontier)
    out << "  " << p.plan.id << " " << p.plan.family << " client=" << p.client_bytes << " server=" << p.server_bytes
        << "\n";
  if (r.candidates.truncated) err << "warning: candidate cap reached; search truncated\n";
  if (r.frontier.empty()) {
    err << "infeasible: " << (r.feasible.infeasible ? r.feasible.infeasible->message : "no feasible plan") << "\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_explain(const RunConfig& rc, const Options& o, std::ostream& out) {
  if (o.plan.empty()) throw UsageError("--plan is required");
  PhysicalPlan plan = load_physical_plan(o.plan);
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  CostReport r = assess(plan, spec, rc.deployment, rc.calibration, compute_stats(db), rc.cap_cells);
  out << "plan " << plan.id << " (" << plan.family << ")\n";
  for (const auto& p : plan.provenance) out << "  " << p << "\n";
  out << "operators:\n";
  for (const auto& op : operators(plan)) {
    out << "  " << op.op << "@" << to_string(op.site);
    if (op.to) out << "->" << to_string(*op.to);
    out << " " << op.detail << "\n";
  }
  out << std::left << std::setw(20) << "interaction" << std::right << std::setw(10) << "bound" << std::setw(12)
      << "estimate" << std::setw(10) << "build" << std::setw(10) << "eval" << std::setw(10) << "ship"
      << std::setw(10) << "residual" << "  rebuild\n";
  for (const auto& i : spec.interactions) {
    auto it = r.breakdown.find(i.name);
    if (it == r.breakdown.end()) continue;
    const LatencyBreakdown& b = it->second;
    out << std::left << std::setw(20) << i.name << std::right << std::setw(10) << fmt(i.latency_bound_ms)
        << std::setw(12) << fmt(b.total()) << std::setw(10) << fmt(b.build_ms) << std::setw(10) << fmt(b.eval_ms)
        << std::setw(10) << fmt(b.ship_ms) << std::setw(10) << fmt(b.residual_ms) << "  "
        << (b.rebuild ? "yes" : "no") << "\n";
  }
  out << "site bytes:";
  for (const auto& [site, bytes] : r.site_bytes) out << " " << to_string(site) << "=" << bytes;
  out << "\nfeasible: " << (r.feasible ? "yes" : "no") << "\n";
  for (const auto& v : r.site_violations)
    out << "  " << to_string(v.site) << " holds " << v.bytes << " bytes, budget " << v.budget << "\n";
  for (const auto& why : r.invalid) out << "  invalid: " << why << "\n";
  return kExitOk;
}

Sampling sampling_of(const RunConfig& rc, const Options& o) {
  Sampling s;
  s.cap = rc.cap_bindings;
  s.seed = rc.seed;
  if (o.sample > 0 && !o.exhaustive) {
    s.exhaustive = false;
    s.sample = o.sample;
  }
  return s;
}

int cmd_verify(const RunConfig& rc, const Options& o, std::ostream& out) {
  if (o.plan.empty()) throw UsageError("--plan is required");
  PhysicalPlan plan = load_physical_plan(o.plan);
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  Session session(spec, plan, db, rc.deployment, net_mode(o));
  session.inject_fault(o.inject_fault);
  session.warm();
  VerifyReport r = verify(session, spec, db, sampling_of(rc, o));
  Json j = verify_report_to_json(r);
  j["plan_id"] = plan.id;
  if (!o.out.empty()) {
    fs::create_directories(rc.output_dir);
    save_json(rc.output_dir / "verify.json", j);
  }
  for (const auto& ir : r.interactions) {
    out << ir.interaction << ": " << ir.passed << "/" << ir.checked << " match ("
        << (ir.sampled ? "sampled" : "exhaustive") << "), max " << fmt(ir.max_latency_ms) << " ms\n";
    for (const auto& b : ir.mismatches) out << "  mismatch at " << binding_to_json(b).dump() << "\n";
  }
  out << (r.pass ? "PASS" : "FAIL") << "\n";
  return r.pass ? kExitOk : kExitVerifyFailed;
}

double percentile(std::vector<double> xs, double p) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(xs.size()))) ;
  return xs[std::min(xs.size() - 1, idx == 0 ? 0 : idx - 1)];
}

int cmd_bench(const RunConfig& rc, const Options& o, std::ostream& out) {
  if (o.plan.empty()) throw UsageError("--plan is required");
  PhysicalPlan plan = load_physical_plan(o.plan);
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  Session session(spec, plan, db, rc.deployment, net_mode(o));
  session.warm();
  std::size_t n = o.sample > 0 ? o.sample : 1000;
  std::ostringstream csv;
  csv << "interaction,kind,bound_ms,p50,p95,max,violations\n";
  for (const auto& i : spec.interactions) {
    std::vector<double> lat;
    std::size_t violations = 0;
    for (const auto& b : sample_bindings(spec, i, n, rc.seed)) {
      auto [rel, ev] = session.interact(i.name, b);
      lat.push_back(ev.total_ms());
      if (ev.total_ms() > i.latency_bound_ms) ++violations;
    }
    csv << i.name << "," << (i.kind == InteractionKind::Continuous ? "continuous" : "discrete") << ","
        << fmt(i.latency_bound_ms) << "," << fmt(percentile(lat, 0.5)) << "," << fmt(percentile(lat, 0.95)) << ","
        << fmt(lat.empty() ? 0.0 : *std::max_element(lat.begin(), lat.end())) << "," << violations << "\n";
  }
  if (!o.out.empty()) {
    fs::create_directories(rc.output_dir);
    std::ofstream f(rc.output_dir / "bench.csv");
    f << csv.str();
  }
  out << csv.str();
  return kExitOk;
}

int cmd_replay(const RunConfig& rc, const Options& o, std::ostream& out) {
  if (o.plan.empty()) throw UsageError("--plan is required");
  if (o.trace.empty()) throw UsageError("--trace is required");
  PhysicalPlan plan = load_physical_plan(o.plan);
  InterfaceSpec spec = load_checked_spec(rc);
  Database db = load_database(spec, rc.data_dir);
  Session session(spec, plan, db, rc.deployment, net_mode(o));
  session.warm();
  std::ifstream in(o.trace);
  if (!in) throw Error("cannot open " + o.trace);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw PlanFormatError(o.trace + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("interaction") || !j.contains("binding"))
      throw PlanFormatError(o.trace + ":" + std::to_string(lineno) + ": expected interaction and binding");
    auto [rel, ev] = session.interact(j["interaction"].get<std::string>(), binding_from_json(j["binding"]));
    const Interaction* i = spec.find_interaction(ev.interaction);
    ev.matches_oracle = check_oracle(spec, db, i->view, session.current(), rel);
    out << trace_event_to_json(ev).dump() << "\n";
  }
  return kExitOk;
}

int cmd_calibrate(const RunConfig& rc, std::ostream& out) {
  Calibration base = measure_calibration();
  Json j;
  j["calibration"] = calibration_to_json(base);
  Json sites;
  for (SiteId s : kAllSites) sites[std::string(to_string(s))] = calibration_to_json(calibrate(rc.deployment.site(s)));
  j["per_site"] = std::move(sites);
  fs::create_directories(rc.output_dir);
  save_json(rc.output_dir / "calibration.json", j["calibration"]);
  out << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physical visualization design: plan, explain and verify interface execution strategies", "pvd"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "run configuration JSON");
    c->add_option("--spec", o.spec, "interface spec JSON");
    c->add_option("--data", o.data, "directory holding the source CSV files");
    c->add_option("--deploy", o.deploy, "deployment model JSON");
    c->add_option("--calibration", o.calibration, "calibration constants JSON");
    c->add_option("--seed", o.seed, "seed for sampling");
    c->add_option("--out", o.out, "output directory");
    c->add_option("--cap-cells", o.cap_cells, "cube cell cap");
    c->add_option("--cap-bindings", o.cap_bindings, "binding enumeration cap");
  };
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset and spec");
  gen->add_option("--kind", o.kind, "congress, filter, cube, join or nm-join");
  gen->add_option("--rows", o.rows, "row count of the main table");
  gen->add_option("--members", o.members, "congress: number of members");
  gen->add_option("--fanout", o.fanout, "nm-join: declared max fan-out (0 = unbounded)");
  gen->add_option("--seed", o.seed, "generator seed");
  gen->add_option("--out", o.out, "output directory");

  auto* stats = app.add_subcommand("stats", "compute column statistics");
  common(stats);
  auto* opt = app.add_subcommand("optimize", "search plans and write the Pareto frontier");
  common(opt);
  opt->add_option("--cap-candidates", o.cap_candidates, "candidate cap");
  auto* explain = app.add_subcommand("explain", "print a plan's cost breakdown");
  common(explain);
  explain->add_option("--plan", o.plan, "physical plan JSON")->required();
  auto* ver = app.add_subcommand("verify", "check a plan against the oracle");
  common(ver);
  ver->add_option("--plan", o.plan, "physical plan JSON")->required();
  ver->add_option("--sample", o.sample, "seeded sample size instead of exhaustive enumeration");
  ver->add_flag("--exhaustive", o.exhaustive, "enumerate every binding (default when under the cap)");
  ver->add_option("--net", o.net, "simulated or none");
  ver->add_flag("--inject-fault", o.inject_fault, "corrupt every built structure");
  auto* bench = app.add_subcommand("bench", "measure interaction latencies");
  common(bench);
  bench->add_option("--plan", o.plan, "physical plan JSON")->required();
  bench->add_option("--sample", o.sample, "bindings per interaction (default 1000)");
  bench->add_option("--net", o.net, "simulated or none");
  auto* replay = app.add_subcommand("replay", "replay a JSON-lines interaction trace");
  common(replay);
  replay->add_option("--plan", o.plan, "physical plan JSON")->required();
  replay->add_option("--trace", o.trace, "trace file")->required();
  replay->add_option("--net", o.net, "simulated or none");
  auto* cal = app.add_subcommand("calibrate", "measure cost constants on this machine");
  common(cal);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    app.exit(e, os, os);
    err << os.str();
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(o, out);
    CLI::App* cmd = app.get_subcommands().front();
    RunConfig rc = resolve(o, *cmd);
    if (stats->parsed()) return cmd_stats(rc, out);
    if (opt->parsed()) return cmd_optimize(rc, out, err);
    if (explain->parsed()) return cmd_explain(rc, o, out);
    if (ver->parsed()) return cmd_verify(rc, o, out);
    if (bench->parsed()) return cmd_bench(rc, o, out);
    if (replay->parsed()) return cmd_replay(rc, o, out);
    if (cal->parsed()) return cmd_calibrate(rc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace pvd
