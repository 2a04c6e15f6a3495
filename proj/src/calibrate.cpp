#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "pvd/cost.hpp"
#include "pvd/oracle.hpp"
#include "pvd/structures.hpp"

namespace pvd {

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
double median_ms(Fn&& fn, int runs = 5) {
  std::vector<double> times;
  for (int i = 0; i < runs; ++i) {
    auto t0 = Clock::now();
    fn();
    times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

Relation bench_table(std::size_t rows, std::int64_t keys, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> key(0, keys - 1);
  std::uniform_real_distribution<double> val(0.0, 100.0);
  RelationBuilder b("bench", {{"k", ColumnType::Int64}, {"v", ColumnType::Float64}});
  for (std::size_t r = 0; r < rows; ++r) b.add_row({Value(key(rng)), Value(val(rng))});
  return std::move(b).finish();
}

// Cube shaped like a typical group-by-key, range-over-date view.
Relation cube_table(std::size_t rows, std::size_t groups, std::int64_t days, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> g(0, groups - 1);
  std::uniform_int_distribution<std::int64_t> d(0, days - 1);
  RelationBuilder b("cube", {{"g", ColumnType::String}, {"d", ColumnType::Int64}});
  for (std::size_t r = 0; r < rows; ++r) b.add_row({Value("member_" + std::to_string(g(rng))), Value(d(rng))});
  return std::move(b).finish();
}

}  // namespace

Calibration measure_calibration() {
  Calibration c;
  constexpr std::size_t kRows = 1'000'000;
  Relation big = bench_table(kRows, 1000, 1);
  volatile std::size_t sink = 0;

  Predicate half{atom("k", CompareOp::Lt, Value(std::int64_t{500}))};
  c.c_scan = median_ms([&] { sink = sink + select_rows(big, half).size(); }) / kRows;

  c.c_hash = median_ms([&] {
               sink = sink + group_aggregate(big, {"k"}, {Aggregate{AggFunc::Count, std::nullopt, "n"}}).row_count();
             }) /
             kRows;

  constexpr std::size_t kSortRows = 100'000;
  Relation small = bench_table(kSortRows, 1'000'000, 2);
  StructureKind sorted;
  sorted.family = StructureFamily::SortedRangeIndex;
  sorted.column = "k";
  c.c_sort = median_ms([&] { sink = sink + build(sorted, small).size_bytes(); }) /
             (static_cast<double>(kSortRows) * std::log2(static_cast<double>(kSortRows)));

  StructureKind hash;
  hash.family = StructureFamily::HashIndex;
  hash.column = "k";
  hash.probe = {atom("k", CompareOp::Eq, "p", Domain::interval(Value(std::int64_t{0}), Value(std::int64_t{999}),
                                                               Value(std::int64_t{1})))};
  BuiltStructure index = build(hash, big);
  constexpr int kProbes = 50;
  double probe_ms = median_ms([&] {
    for (int p = 0; p < kProbes; ++p) sink = sink + eval(index, {{"p", Value(std::int64_t{p * 7})}}).row_count();
  });
  c.c_probe = probe_ms / (kProbes * (static_cast<double>(kRows) / 1000.0));

  constexpr std::size_t kGroups = 500;
  constexpr std::int64_t kDays = 32;
  Relation cube_in = cube_table(200'000, kGroups, kDays, 3);
  StructureKind cube;
  cube.family = StructureFamily::PrefixSumCube;
  Domain days = Domain::interval(Value(std::int64_t{0}), Value(kDays - 1), Value(std::int64_t{1}));
  cube.dims = {CubeDim{"g", true, {}},
               CubeDim{"d", false, {atom("d", CompareOp::Ge, "lo", days), atom("d", CompareOp::Le, "hi", days)}}};
  cube.group_keys = {"g"};
  cube.aggregates = {Aggregate{AggFunc::Count, std::nullopt, "n"}};
  BuiltStructure cb = build(cube, cube_in);
  constexpr int kEvals = 20;
  double cube_ms = median_ms([&] {
    for (int e = 0; e < kEvals; ++e)
      sink = sink + eval(cb, {{"lo", Value(std::int64_t{e % 8})}, {"hi", Value(std::int64_t{20 + e % 8})}}).row_count();
  });
  c.c_cell = cube_ms / (kEvals * kGroups * 4.0);
  (void)sink;
  return c;
}

Calibration calibrate(const Site& site) { return measure_calibration().scaled(site.compute_scale); }

}  // namespace pvd
