#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "pvd/plan.hpp"
#include "pvd/relation.hpp"

namespace pvd {

enum class SynthKind : std::uint8_t { Congress, Filter, Cube, Join, NMJoin };
std::optional<SynthKind> parse_synth_kind(std::string_view s);
std::string_view to_string(SynthKind k);

struct SynthOptions {
  std::size_t rows = 0;  // 0: per-kind default
  std::uint64_t seed = 1;
  std::size_t members = 100;               // congress: distinct members (house 80%, senate 20%)
  std::optional<std::int64_t> max_fanout;  // nm-join: declared fan-out of the join
};

struct Generated {
  InterfaceSpec spec;
  Database db;
};

/// Seeded dataset plus interface spec.
///   congress: votes(name, chamber, date) with a chamber dropdown and a date-range slider
///   filter:   items with a category dropdown over a filtered projection
///   cube:     sales grouped by region under a day-range brush
///   join:     orders joined to customers (fan-out 1) grouped by segment under a day brush
///   nm-join:  orders joined to visits (many-to-many) grouped by channel under a day brush
Generated generate(SynthKind kind, const SynthOptions& opts = {});

/// Writes each relation as <name>.csv and the spec as spec.json.
void write_generated(const Generated& g, const std::filesystem::path& dir);

}  // namespace pvd
