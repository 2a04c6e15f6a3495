#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pvd/calibration.hpp"
#include "pvd/plan.hpp"
#include "pvd/relation.hpp"

namespace pvd {

enum class StructureFamily : std::uint8_t { BaseScan = 1, HashIndex = 2, SortedRangeIndex = 3, PrefixSumCube = 4 };

std::string_view to_string(StructureFamily f);
std::optional<StructureFamily> parse_structure_family(std::string_view s);

/// One cube axis. `atoms` are the range/equality atoms on this column that
/// eval() resolves against the binding.
struct CubeDim {
  std::string column;
  bool group_key = false;
  Predicate atoms;
  friend bool operator==(const CubeDim&, const CubeDim&) = default;
};

/// A structure family plus its parameters.
struct StructureKind {
  StructureFamily family = StructureFamily::BaseScan;
  std::string column;  // HashIndex key / SortedRangeIndex sort column
  Predicate probe;     // HashIndex / SortedRangeIndex atoms answered by eval()
  std::vector<CubeDim> dims;
  std::vector<std::string> group_keys;
  std::vector<Aggregate> aggregates;

  /// Deterministic one-line description; part of the fingerprint.
  std::string describe() const;
  /// Choice ids resolved by eval().
  std::set<std::string> eval_choices() const;
  friend bool operator==(const StructureKind&, const StructureKind&) = default;
};

inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kDefaultCubeCellCap = 100'000'000;

/// Immutable encoded structure. The payload starts with a fixed 32-byte
/// little-endian header: magic "PVDS", u16 version, u16 family, u32 dims,
/// u32 arrays, u64 fingerprint, u64 cells.
class BuiltStructure {
 public:
  struct Decoded;

  /// Decodes `payload`; throws Error on malformed bytes.
  static BuiltStructure from_payload(StructureKind kind, std::vector<std::uint8_t> payload, Binding baked);

  const StructureKind& kind() const { return kind_; }
  std::span<const std::uint8_t> payload() const { return *payload_; }
  std::size_t size_bytes() const { return payload_->size(); }
  std::uint64_t fingerprint() const;
  /// Choice values baked into the build input.
  const Binding& baked() const { return baked_; }
  const Decoded& decoded() const { return *decoded_; }

 private:
  StructureKind kind_;
  std::shared_ptr<const std::vector<std::uint8_t>> payload_;
  std::shared_ptr<const Decoded> decoded_;
  Binding baked_;
};

/// A subplan a structure can replace.
struct MatchResult {
  int matched_node = -1;
  StructureKind kind;
  /// Subplan whose output feeds build(); may hold literal choices.
  PlanPtr build_input;
  /// Atoms of the matched filter chain still applied to eval() output.
  Predicate residual;
  std::set<std::string> build_choices;
  std::set<std::string> eval_choices;
  /// The matched subplan contains a join without declared bounded fan-out.
  bool has_unbounded_join = false;
};

/// Subplans of `plan` replaceable by a structure of `family`. Subtrees below
/// subplan Choice nodes are never matched.
std::vector<MatchResult> match(StructureFamily family, const ChoicePlan& plan, const SchemaMap& sources);
/// All families, in family order.
std::vector<MatchResult> match_all(const ChoicePlan& plan, const SchemaMap& sources);

/// Builds a structure from a materialized input. CapExceeded when a cube
/// needs more than `cell_cap` cells; UnknownColumn on missing columns.
BuiltStructure build(const StructureKind& kind, const Relation& input, const Binding& baked = {},
                     std::size_t cell_cap = kDefaultCubeCellCap);

/// Answers the structure's query for `b`. StaleStructure when `b` disagrees
/// with a baked choice value.
Relation eval(const BuiltStructure& s, const Binding& b);

/// Cells a cube over `input` would need (product of per-axis cardinalities).
std::size_t cube_cell_count(const StructureKind& kind, const Relation& input);

struct StructureEstimate {
  double build_ms = 0;
  double eval_ms = 0;
  std::size_t size_bytes = 0;
  std::size_t eval_rows = 0;  // estimated rows returned by eval()
  std::size_t cells = 0;      // cubes only
};

/// Closed-form cost and size from statistics of the build input.
/// MissingStats if a referenced column has no statistics.
StructureEstimate estimate(const StructureKind& kind, const StatsMap& stats, std::size_t row_count,
                           const Calibration& cal);

void save_structure(const std::filesystem::path& path, const BuiltStructure& s);
BuiltStructure load_structure(const std::filesystem::path& path, const StructureKind& kind, const Binding& baked);

/// Test hook: returns a copy whose payload cells are perturbed so that eval()
/// results change.
BuiltStructure corrupt_for_testing(const BuiltStructure& s);

}  // namespace pvd
