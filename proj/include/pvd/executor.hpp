#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pvd/deploy.hpp"
#include "pvd/oracle.hpp"
#include "pvd/physical.hpp"
#include "pvd/structures.hpp"

namespace pvd {

enum class NetMode : std::uint8_t { Simulated, None };
std::optional<NetMode> parse_net_mode(std::string_view s);

struct TraceEvent {
  std::string interaction;
  Binding binding;
  double measured_ms = 0.0;       // wall-clock compute
  double simulated_net_ms = 0.0;  // 0 under NetMode::None
  std::string output_digest;
  std::optional<bool> matches_oracle;  // filled by check_oracle()
  std::size_t rebuilds = 0;
  bool cache_hit = false;

  double total_ms() const { return measured_ms + simulated_net_ms; }
};

Json trace_event_to_json(const TraceEvent& e);

struct CacheKey {
  SiteId site = SiteId::Cloud;
  std::string structure;  // view#node
  std::string key;        // rendered cache-key binding
  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

/// One interactive session over a physical plan.
class Session {
 public:
  Session(const InterfaceSpec& spec, PhysicalPlan plan, Database db, DeploymentModel dm,
          NetMode net = NetMode::Simulated);

  const PhysicalPlan& plan() const { return plan_; }
  const Binding& current() const { return current_; }
  const std::map<CacheKey, BuiltStructure>& cache_state() const { return cache_; }
  NetMode net_mode() const { return net_; }

  /// Builds every cached structure not keyed by a choice: single-instance
  /// caches at the default binding, replicated caches for every key value.
  void warm();

  /// Applies `b` on top of the current binding and answers the interaction's view.
  std::pair<Relation, TraceEvent> interact(const std::string& interaction, const Binding& b);

  /// Every structure built from now on is corrupted (fault injection).
  void inject_fault(bool on = true) { inject_fault_ = on; }

 private:
  struct ViewRuntime {
    const View* view = nullptr;
    const ViewStrategy* strategy = nullptr;
    std::optional<MatchResult> match;
    std::string structure_id;
    std::optional<Binding> last_binding;
    std::optional<Relation> last_result;
  };

  ViewRuntime& runtime(const std::string& view);
  Binding key_binding(const ViewRuntime& rt, const Binding& b) const;
  struct Run {
    Relation output;
    bool rebuilt = false;
    std::uint64_t build_input_bytes = 0;
    std::uint64_t structure_bytes = 0;
    std::uint64_t eval_output_bytes = 0;
  };

  /// Cached instance for `b`'s key; builds it (and reports input bytes) when missing.
  const BuiltStructure& ensure_structure(ViewRuntime& rt, const Binding& b, bool& rebuilt,
                                         std::uint64_t& input_bytes);
  Run run_view(ViewRuntime& rt, const Binding& b);

  const InterfaceSpec& spec_;
  PhysicalPlan plan_;
  Database db_;
  DeploymentModel dm_;
  NetMode net_;
  Binding current_;
  std::map<std::string, ViewRuntime> views_;
  std::map<CacheKey, BuiltStructure> cache_;
  bool inject_fault_ = false;
};

/// Oracle comparison of an interaction's output for the session's current binding.
bool check_oracle(const InterfaceSpec& spec, const Database& db, const std::string& view, const Binding& b,
                  const Relation& output);

struct Sampling {
  bool exhaustive = true;  // exhaustive when the joint domain is within cap
  std::size_t sample = 1000;
  std::uint64_t seed = 7;
  std::size_t cap = kDefaultBindingCap;
};

struct InteractionReport {
  std::string interaction;
  std::size_t checked = 0;
  std::size_t passed = 0;
  bool sampled = false;
  double max_latency_ms = 0.0;
  std::vector<Binding> mismatches;  // first few failing bindings
};

struct VerifyReport {
  bool pass = true;
  std::vector<InteractionReport> interactions;
};

/// Replays every binding of each interaction's view through the session and
/// compares against the oracle.
VerifyReport verify(Session& session, const InterfaceSpec& spec, const Database& db, const Sampling& sampling);
Json verify_report_to_json(const VerifyReport& r);

/// Loads every source of the spec from `data_dir`; the error names all missing files.
Database load_database(const InterfaceSpec& spec, const std::filesystem::path& data_dir);

}  // namespace pvd
