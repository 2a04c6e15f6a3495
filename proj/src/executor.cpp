#include "pvd/executor.hpp"

#include <algorithm>

#include "pvd/cost.hpp"
#include "pvd/errors.hpp"

namespace pvd {

std::optional<NetMode> parse_net_mode(std::string_view s) {
  if (s == "simulated") return NetMode::Simulated;
  if (s == "none") return NetMode::None;
  return std::nullopt;
}

Json trace_event_to_json(const TraceEvent& e) {
  Json j;
  j["interaction"] = e.interaction;
  j["binding"] = binding_to_json(e.binding);
  j["measured_ms"] = e.measured_ms;
  j["simulated_net_ms"] = e.simulated_net_ms;
  j["output_digest"] = e.output_digest;
  if (e.matches_oracle) j["matches_oracle"] = *e.matches_oracle;
  j["rebuilds"] = e.rebuilds;
  j["cache_hit"] = e.cache_hit;
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string render_key(const Binding& b) {
  std::string s;
  for (const auto& [k, v] : b) s += (s.empty() ? "" : ";") + k + "=" + v.to_string();
  return s;
}

Predicate bind_atoms(const Predicate& p, const Binding& b) {
  Predicate out;
  for (const auto& a : p) {
    if (!a.choice) {
      out.push_back(a);
      continue;
    }
    auto it = b.find(a.choice->id);
    if (it == b.end()) throw UnboundChoice(a.choice->id);
    out.push_back(atom(a.column, a.op, it->second));
  }
  return out;
}

}  // namespace

Session::Session(const InterfaceSpec& spec, PhysicalPlan plan, Database db, DeploymentModel dm, NetMode net)
    : spec_(spec), plan_(std::move(plan)), db_(std::move(db)), dm_(std::move(dm)), net_(net) {
  current_ = default_binding(spec_);
  for (const auto& s : plan_.views) {
    ViewRuntime rt;
    rt.view = spec_.find_view(s.view);
    if (!rt.view) throw PlanFormatError("plan refers to unknown view '" + s.view + "'");
    rt.strategy = &s;
    if (!s.baseline) {
      rt.match = resolve_match(spec_, s);
      rt.structure_id = s.view + "#" + std::to_string(s.matched_node);
    }
    views_.emplace(s.view, std::move(rt));
  }
}

Session::ViewRuntime& Session::runtime(const std::string& view) {
  auto it = views_.find(view);
  if (it == views_.end()) throw Error("plan does not cover view '" + view + "'");
  return it->second;
}

Binding Session::key_binding(const ViewRuntime& rt, const Binding& b) const {
  Binding kb;
  for (const auto& k : rt.strategy->cache_key) {
    auto it = b.find(k);
    if (it == b.end()) throw UnboundChoice(k);
    kb.emplace(k, it->second);
  }
  return kb;
}

const BuiltStructure& Session::ensure_structure(ViewRuntime& rt, const Binding& b, bool& rebuilt,
                                                std::uint64_t& input_bytes) {
  const ViewStrategy& s = *rt.strategy;
  Binding kb = key_binding(rt, b);
  CacheKey ck{s.eval_site, rt.structure_id, render_key(kb)};
  auto it = cache_.find(ck);
  if (it != cache_.end()) return it->second;

  RelationPtr input = evaluate(*bind(*rt.match->build_input, b), db_);
  BuiltStructure built = build(s.kind, *input, kb);
  if (inject_fault_) built = corrupt_for_testing(built);
  if (s.cache_mode == CacheMode::Single) {
    for (auto e = cache_.begin(); e != cache_.end();) {
      if (e->first.site == ck.site && e->first.structure == ck.structure) e = cache_.erase(e);
      else ++e;
    }
  }
  rebuilt = true;
  input_bytes = encoded_size(*input);
  return cache_.emplace(ck, std::move(built)).first->second;
}

Session::Run Session::run_view(ViewRuntime& rt, const Binding& b) {
  const ViewStrategy& s = *rt.strategy;
  PlanPtr bound = bind(spec_, s.view, b);
  if (s.baseline) return Run{*evaluate(*bound, db_)};

  bool rebuilt = false;
  std::uint64_t input_bytes = 0;
  const BuiltStructure& built = ensure_structure(rt, b, rebuilt, input_bytes);
  Relation ev = eval(built, b);
  auto eval_out = std::make_shared<const Relation>(rt.match->residual.empty()
                                                       ? std::move(ev)
                                                       : apply_predicate(ev, bind_atoms(rt.match->residual, b)));
  RelationPtr out = evaluate(*bound, db_, {{s.matched_node, eval_out}});
  return Run{*out, rebuilt, input_bytes, built.size_bytes(), encoded_size(*eval_out)};
}

void Session::warm() {
  for (auto& [name, rt] : views_) {
    const ViewStrategy& s = *rt.strategy;
    if (s.baseline) continue;
    bool rebuilt = false;
    std::uint64_t bytes = 0;
    if (s.cache_mode == CacheMode::Single) {
      ensure_structure(rt, current_, rebuilt, bytes);
      continue;
    }
    // One instance per value combination of the key choices.
    auto choices = spec_choices(spec_);
    std::vector<const Domain*> domains;
    for (const auto& k : s.cache_key) domains.push_back(&choices.at(k).domain);
    std::vector<std::size_t> idx(domains.size(), 0);
    while (true) {
      Binding b = current_;
      for (std::size_t d = 0; d < domains.size(); ++d) b[s.cache_key[d]] = domains[d]->at(idx[d]);
      ensure_structure(rt, b, rebuilt, bytes);
      std::size_t d = domains.size();
      while (d-- > 0) {
        if (++idx[d] < domains[d]->size()) break;
        idx[d] = 0;
      }
      if (d == static_cast<std::size_t>(-1)) break;
    }
  }
}

std::pair<Relation, TraceEvent> Session::interact(const std::string& name, const Binding& b) {
  const Interaction* inter = spec_.find_interaction(name);
  if (!inter) throw Error("unknown interaction '" + name + "'");
  auto choices = spec_choices(spec_);
  for (const auto& c : inter->bound_choices)
    if (!b.count(c)) throw UnboundChoice(c);
  for (const auto& [id, v] : b) {
    auto it = choices.find(id);
    if (it == choices.end()) throw Error("unknown choice '" + id + "'");
    if (!it->second.domain.contains(v)) throw OutOfDomain(id, v.to_string());
  }
  Binding merged = current_;
  for (const auto& [id, v] : b) merged[id] = v;
  if (!satisfies_constraints(spec_, merged)) {
    for (const auto& rc : spec_.range_constraints)
      if (compare(merged.at(rc.lower), merged.at(rc.upper)) > 0) throw InvalidRange(rc.lower, rc.upper);
  }

  ViewRuntime& rt = runtime(inter->view);
  TraceEvent ev;
  ev.interaction = name;
  ev.binding = b;
  std::optional<Run> run;
  auto t0 = Clock::now();
  if (rt.last_binding && *rt.last_binding == merged && rt.last_result) {
    run = Run{*rt.last_result};
    ev.cache_hit = true;
  } else {
    run = run_view(rt, merged);
  }
  ev.measured_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  ev.rebuilds = run->rebuilt ? 1 : 0;

  if (!ev.cache_hit && net_ == NetMode::Simulated) {
    ShipSizes sizes{run->build_input_bytes, run->structure_bytes, run->eval_output_bytes,
                    encoded_size(run->output)};
    ev.simulated_net_ms = ship_ms(dm_, *rt.strategy, run->rebuilt, sizes);
  }
  ev.output_digest = to_hex(relation_digest(canonicalize(run->output)));
  current_ = merged;
  rt.last_binding = merged;
  rt.last_result = run->output;
  return {std::move(run->output), std::move(ev)};
}

bool check_oracle(const InterfaceSpec& spec, const Database& db, const std::string& view, const Binding& b,
                  const Relation& output) {
  Relation expected = oracle_eval(*bind(spec, view, b), db);
  return relations_equal(canonicalize(output), expected, 1e-9);
}

VerifyReport verify(Session& session, const InterfaceSpec& spec, const Database& db, const Sampling& sampling) {
  VerifyReport report;
  for (const auto& inter : spec.interactions) {
    InteractionReport ir;
    ir.interaction = inter.name;
    std::vector<Binding> bindings;
    bool sampled = !sampling.exhaustive;
    if (!sampled) {
      try {
        bindings = enumerate_view_bindings(spec, inter.view, sampling.cap);
      } catch (const DomainExplosion&) {
        sampled = true;
      }
    }
    if (sampled) bindings = sample_view_bindings(spec, inter.view, sampling.sample, sampling.seed);
    ir.sampled = sampled;
    // Hold the other choices of the view still while the interaction's own choices sweep,
    // so a cache keyed by those other choices is rebuilt once per value, not per binding.
    std::vector<std::string> others;
    if (!bindings.empty())
      for (const auto& [id, v] : bindings.front())
        if (std::find(inter.bound_choices.begin(), inter.bound_choices.end(), id) == inter.bound_choices.end())
          others.push_back(id);
    std::stable_sort(bindings.begin(), bindings.end(), [&](const Binding& x, const Binding& y) {
      for (const auto& id : others) {
        if (canonical_less(x.at(id), y.at(id))) return true;
        if (canonical_less(y.at(id), x.at(id))) return false;
      }
      return false;
    });
    for (const auto& b : bindings) {
      auto [out, ev] = session.interact(inter.name, b);
      bool ok = check_oracle(spec, db, inter.view, session.current(), out);
      ++ir.checked;
      if (ok) ++ir.passed;
      else if (ir.mismatches.size() < 10) ir.mismatches.push_back(session.current());
      ir.max_latency_ms = std::max(ir.max_latency_ms, ev.total_ms());
    }
    if (ir.passed != ir.checked) report.pass = false;
    report.interactions.push_back(std::move(ir));
  }
  return report;
}

Json verify_report_to_json(const VerifyReport& r) {
  Json j;
  j["pass"] = r.pass;
  Json arr = Json::array();
  for (const auto& ir : r.interactions) {
    Json ij;
    ij["interaction"] = ir.interaction;
    ij["mode"] = ir.sampled ? "sample" : "exhaustive";
    ij["checked"] = ir.checked;
    ij["passed"] = ir.passed;
    ij["failed"] = ir.checked - ir.passed;
    ij["max_latency_ms"] = ir.max_latency_ms;
    Json mm = Json::array();
    for (const auto& b : ir.mismatches) mm.push_back(binding_to_json(b));
    ij["mismatches"] = std::move(mm);
    arr.push_back(std::move(ij));
  }
  j["interactions"] = std::move(arr);
  return j;
}

Database load_database(const InterfaceSpec& spec, const std::filesystem::path& data_dir) {
  std::vector<std::string> missing;
  for (const auto& s : spec.sources) {
    auto path = data_dir / s.csv_path;
    if (!std::filesystem::exists(path)) missing.push_back(s.name + " (" + path.string() + ")");
  }
  if (!missing.empty()) {
    std::string msg = "missing source files:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(msg);
  }
  Database db;
  for (const auto& s : spec.sources) {
    auto path = data_dir / s.csv_path;
    try {
      db[s.name] = std::make_shared<const Relation>(load_csv(path, s.name, s.schema));
    } catch (const ParseError& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }
  return db;
}

}  // namespace pvd
