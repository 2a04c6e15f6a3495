#include <algorithm>
#include <chrono>
#include <random>

#include "doctest.h"
#include "pvd/cost.hpp"
#include "pvd/errors.hpp"
#include "pvd/oracle.hpp"
#include "pvd/structures.hpp"
#include "test_util.hpp"

using namespace pvd;
using pvd::testing::make_rel;
using pvd::testing::share;

namespace {

Predicate bind_pred(const Predicate& p, const Binding& b) {
  Predicate out;
  for (const auto& a : p) out.push_back(a.choice ? atom(a.column, a.op, b.at(a.choice->id)) : a);
  return out;
}

Binding baked_for(const MatchResult& m, const Binding& b) {
  Binding out;
  for (const auto& c : m.build_choices) out[c] = b.at(c);
  return out;
}

BuiltStructure build_for(const MatchResult& m, const Database& db, const Binding& b) {
  auto input = evaluate(*pvd::bind(*m.build_input, b), db);
  return build(m.kind, *input, baked_for(m, b));
}

/// Structure path: build, eval, residual, then the rest of the plan over the substituted subtree.
Relation rewritten(const ChoicePlan& plan, const MatchResult& m, const Database& db, const Binding& b,
                   const BuiltStructure& s) {
  Relation ev = eval(s, b);
  if (!m.residual.empty()) ev = apply_predicate(ev, bind_pred(m.residual, b));
  return canonicalize(*evaluate(*pvd::bind(plan, b), db, {{m.matched_node, share(std::move(ev))}}));
}

const MatchResult* find_family(const std::vector<MatchResult>& ms, StructureFamily f) {
  for (const auto& m : ms)
    if (m.kind.family == f) return &m;
  return nullptr;
}

/// t(g, x, y, delay, units): 100 rows, x in 0..4, y in 0..5, a few nulls in measures and y.
Relation cube_input(std::uint64_t seed, std::size_t n = 100) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> g(0, 2), x(0, 4), y(0, 5), u(-20, 50), z(0, 11);
  std::uniform_real_distribution<double> d(-3.0, 1000.0);
  RelationBuilder b("t", {{"g", ColumnType::String},
                          {"x", ColumnType::Int64},
                          {"y", ColumnType::Int64},
                          {"delay", ColumnType::Float64},
                          {"units", ColumnType::Int64}});
  const char* groups[] = {"ams", "bos", "cdg"};
  for (std::size_t i = 0; i < n; ++i) {
    Value yy = z(rng) == 0 ? Value::null() : Value(y(rng));
    Value dd = z(rng) == 1 ? Value::null() : Value(d(rng));
    Value uu = z(rng) == 2 ? Value::null() : Value(u(rng));
    b.add_row({Value(groups[g(rng)]), Value(x(rng)), yy, dd, uu});
  }
  return std::move(b).finish();
}

ChoicePlan cube_view(bool with_y = true) {
  Predicate p = {atom("x", CompareOp::Ge, "xl", Domain::interval(0, 4, 1)),
                 atom("x", CompareOp::Le, "xh", Domain::interval(0, 4, 1))};
  if (with_y) {
    p.push_back(atom("y", CompareOp::Ge, "yl", Domain::interval(0, 5, 1)));
    p.push_back(atom("y", CompareOp::Le, "yh", Domain::interval(0, 5, 1)));
  }
  return ChoicePlan(group_by(filter(scan("t"), p), {"g"},
                             {{AggFunc::Count, std::nullopt, "n"},
                              {AggFunc::Sum, std::string("delay"), "sd"},
                              {AggFunc::Sum, std::string("units"), "su"},
                              {AggFunc::Avg, std::string("delay"), "ad"},
                              {AggFunc::Min, std::string("units"), "lo"},
                              {AggFunc::Max, std::string("delay"), "hi"},
                              {AggFunc::Count, std::string("y"), "ny"}}));
}

SchemaMap schemas_of(const Database& db) {
  SchemaMap m;
  for (const auto& [n, r] : db) m[n] = r->schema();
  return m;
}

}  // namespace

TEST_SUITE("structure-lib") {

TEST_CASE("congress plan matches a cube over name and date keyed by the chamber") {
  auto g = pvd::testing::small_congress(500, 10);
  auto ms = match(StructureFamily::PrefixSumCube, g.spec.views[0].plan, source_schemas(g.spec));
  REQUIRE(ms.size() >= 1);
  const MatchResult& m = ms.front();
  CHECK(m.matched_node == 1);
  std::set<std::string> dims, keys;
  for (const auto& d : m.kind.dims) {
    dims.insert(d.column);
    if (d.group_key) keys.insert(d.column);
  }
  CHECK(dims == std::set<std::string>{"name", "date"});
  CHECK(keys == std::set<std::string>{"name"});
  CHECK(m.build_choices == std::set<std::string>{"a"});
  CHECK(m.eval_choices == std::set<std::string>{"b_hi", "b_lo"});
  CHECK_FALSE(m.has_unbounded_join);
}

TEST_CASE("bare scan only matches BaseScan") {
  ChoicePlan p(scan("t"));
  SchemaMap s{{"t", {{"x", ColumnType::Int64}}}};
  auto all = match_all(p, s);
  REQUIRE(all.size() == 1);
  CHECK(all[0].kind.family == StructureFamily::BaseScan);
}

TEST_CASE("equality choice over a scan matches HashIndex and is sound for every value") {
  Relation t = make_rel("t", {{"city", ColumnType::String}, {"pop", ColumnType::Int64}},
                        {{"oslo", 1}, {"rome", 2}, {"oslo", 3}, {Value::null(), 4}, {"lima", 5}});
  Database db{{"t", share(t)}};
  auto dom = Domain::values({Value("oslo"), Value("rome"), Value("lima"), Value("nara")});
  ChoicePlan plan(filter(scan("t"), {atom("city", CompareOp::Eq, "c", dom)}));
  auto ms = match(StructureFamily::HashIndex, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  CHECK(ms[0].kind.column == "city");
  CHECK(ms[0].residual.empty());
  for (std::size_t i = 0; i < dom.size(); ++i) {
    Binding b{{"c", dom.at(i)}};
    auto s = build_for(ms[0], db, b);
    CHECK(relations_equal(rewritten(plan, ms[0], db, b, s), oracle_eval(*pvd::bind(plan, b), db)));
  }
}

TEST_CASE("every congress match is sound over the joint binding space") {
  auto g = pvd::testing::small_congress(1500, 12);
  const ChoicePlan& plan = g.spec.views[0].plan;
  auto ms = match_all(plan, source_schemas(g.spec));
  std::set<StructureFamily> fams;
  for (const auto& m : ms) fams.insert(m.kind.family);
  CHECK(fams.count(StructureFamily::PrefixSumCube) == 1);
  CHECK(fams.count(StructureFamily::HashIndex) == 1);
  CHECK(fams.count(StructureFamily::SortedRangeIndex) == 1);

  auto bindings = enumerate_view_bindings(g.spec, "votes_by_member");
  for (const auto& m : ms) {
    std::size_t ok = 0;
    for (const auto& b : bindings) {
      auto s = build_for(m, g.db, b);
      ok += relations_equal(rewritten(plan, m, g.db, b, s), oracle_eval(*pvd::bind(plan, b), g.db)) ? 1 : 0;
    }
    CHECK_MESSAGE(ok == bindings.size(), m.kind.describe());
  }
}

TEST_CASE("cube over 2 x 4 dims has 8 cells") {
  Relation t = make_rel("t", {{"a", ColumnType::Int64}, {"b", ColumnType::Int64}},
                        {{0, 0}, {1, 1}, {0, 2}, {1, 3}, {0, 3}});
  Database db{{"t", share(t)}};
  ChoicePlan plan(group_by(filter(scan("t"), {atom("b", CompareOp::Ge, "lo", Domain::interval(0, 3, 1)),
                                              atom("b", CompareOp::Le, "hi", Domain::interval(0, 3, 1))}),
                           {"a"}, {{AggFunc::Count, std::nullopt, "n"}}));
  auto ms = match(StructureFamily::PrefixSumCube, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  CHECK(cube_cell_count(ms[0].kind, t) == 8);
  auto s = build(ms[0].kind, t);
  CHECK(s.size_bytes() >= kHeaderBytes + 8 * 8);

  SUBCASE("estimate: 8-byte count cells plus dictionaries plus header") {
    auto stats = compute_stats(t);
    auto e = estimate(ms[0].kind, stats, t.row_count(), Calibration{});
    CHECK(e.cells == 8);
    double dict = 2 * (stats.at("a").width_bytes + 1) + 4 * (stats.at("b").width_bytes + 1);
    CHECK(e.size_bytes == kHeaderBytes + static_cast<std::size_t>(dict) + 64);
  }
  SUBCASE("a cap below the cell count is refused") {
    CHECK_THROWS_AS(build(ms[0].kind, t, {}, 7), CapExceeded);
  }
}

TEST_CASE("count cube over one row answers 0 or 1 and 1 at the corner") {
  Relation t = make_rel("t", {{"x", ColumnType::Int64}, {"g", ColumnType::String}}, {{3, "k"}});
  Database db{{"t", share(t)}};
  auto dom = Domain::interval(0, 5, 1);
  ChoicePlan plan(group_by(filter(scan("t"), {atom("x", CompareOp::Ge, "lo", dom), atom("x", CompareOp::Le, "hi", dom)}),
                           {"g"}, {{AggFunc::Count, std::nullopt, "n"}}));
  auto ms = match(StructureFamily::PrefixSumCube, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  auto s = build(ms[0].kind, t);
  for (int lo = 0; lo <= 5; ++lo)
    for (int hi = lo; hi <= 5; ++hi) {
      Relation r = eval(s, {{"lo", Value(lo)}, {"hi", Value(hi)}});
      bool inside = lo <= 3 && 3 <= hi;
      CHECK(r.row_count() == (inside ? 1u : 0u));
      if (inside) CHECK(r.at(0, 1) == Value(1));
    }
}

TEST_CASE("cube range aggregates equal the oracle for every range") {
  Relation t = cube_input(3);
  Database db{{"t", share(t)}};
  ChoicePlan plan = cube_view();
  auto ms = match(StructureFamily::PrefixSumCube, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  auto s = build(ms[0].kind, t);
  std::size_t checked = 0, ok = 0;
  for (int xl = 0; xl <= 4; ++xl)
    for (int xh = xl; xh <= 4; ++xh)
      for (int yl = 0; yl <= 5; ++yl)
        for (int yh = yl; yh <= 5; ++yh) {
          Binding b{{"xl", Value(xl)}, {"xh", Value(xh)}, {"yl", Value(yl)}, {"yh", Value(yh)}};
          ++checked;
          ok += relations_equal(canonicalize(eval(s, b)), oracle_eval(*pvd::bind(plan, b), db), 1e-9) ? 1 : 0;
        }
  CHECK(checked == 15 * 21);
  CHECK(ok == checked);
}

TEST_CASE("full-domain range equals the unfiltered aggregate") {
  Relation t = cube_input(5);
  Database db{{"t", share(t)}};
  ChoicePlan plan = cube_view(false);
  auto ms = match(StructureFamily::PrefixSumCube, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  auto s = build(ms[0].kind, t);
  Relation full = canonicalize(eval(s, {{"xl", Value(0)}, {"xh", Value(4)}}));
  const PlanNode& gb = *plan.root();
  Relation unfiltered = oracle_eval(*group_by(scan("t"), gb.keys, gb.aggregates), db);
  CHECK(relations_equal(full, unfiltered, 1e-9));
}

TEST_CASE("build is deterministic and size grows with dimensions") {
  Relation t = cube_input(9);
  Database db{{"t", share(t)}};
  auto m2 = match(StructureFamily::PrefixSumCube, cube_view(true), schemas_of(db));
  auto m1 = match(StructureFamily::PrefixSumCube, cube_view(false), schemas_of(db));
  REQUIRE(m1.size() == 1);
  REQUIRE(m2.size() == 1);
  auto a = build(m2[0].kind, t), b = build(m2[0].kind, t);
  CHECK(std::equal(a.payload().begin(), a.payload().end(), b.payload().begin(), b.payload().end()));
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(build(m1[0].kind, t).size_bytes() < a.size_bytes());
  auto stats = compute_stats(t);
  CHECK(estimate(m1[0].kind, stats, t.row_count(), {}).size_bytes <
        estimate(m2[0].kind, stats, t.row_count(), {}).size_bytes);
}

TEST_CASE("eval against a different baked choice is stale") {
  auto g = pvd::testing::small_congress(500, 10);
  auto ms = match(StructureFamily::PrefixSumCube, g.spec.views[0].plan, source_schemas(g.spec));
  REQUIRE_FALSE(ms.empty());
  Binding house{{"a", Value("house")}, {"b_lo", Value(1990)}, {"b_hi", Value(2020)}};
  auto s = build_for(ms[0], g.db, house);
  CHECK_NOTHROW(eval(s, house));
  Binding senate = house;
  senate["a"] = Value("senate");
  CHECK_THROWS_AS(eval(s, senate), StaleStructure);
}

TEST_CASE("payload survives disk round trip; malformed payloads are rejected") {
  Relation t = cube_input(4);
  Database db{{"t", share(t)}};
  auto ms = match(StructureFamily::PrefixSumCube, cube_view(), schemas_of(db));
  auto s = build(ms[0].kind, t);
  auto dir = pvd::testing::scratch_dir("structure");
  save_structure(dir / "cube.bin", s);
  auto back = load_structure(dir / "cube.bin", ms[0].kind, {});
  Binding b{{"xl", Value(1)}, {"xh", Value(3)}, {"yl", Value(0)}, {"yh", Value(4)}};
  CHECK(relations_equal(eval(s, b), eval(back, b), 0.0));

  std::vector<std::uint8_t> bytes(s.payload().begin(), s.payload().end());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PVDS");
  auto truncated = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 40);
  CHECK_THROWS_AS(BuiltStructure::from_payload(ms[0].kind, truncated, {}), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(BuiltStructure::from_payload(ms[0].kind, bad_magic, {}), Error);
}

TEST_CASE("corrupted structures give different answers") {
  Relation t = cube_input(6);
  Database db{{"t", share(t)}};
  ChoicePlan plan = cube_view();
  auto ms = match_all(plan, schemas_of(db));
  Binding b{{"xl", Value(0)}, {"xh", Value(4)}, {"yl", Value(0)}, {"yh", Value(5)}};
  for (const auto& m : ms) {
    auto s = build_for(m, db, b);
    auto bad = corrupt_for_testing(s);
    CHECK_MESSAGE(!relations_equal(rewritten(plan, m, db, b, bad), oracle_eval(*pvd::bind(plan, b), db)),
                  m.kind.describe());
  }
}

TEST_CASE("estimates follow the closed forms") {
  Calibration cal;
  SUBCASE("BaseScan over zero rows") {
    Relation t("t", {{"x", ColumnType::Int64}});
    auto e = estimate(StructureKind{}, compute_stats(t), 0, cal);
    CHECK(e.build_ms == 0.0);
    CHECK(e.eval_ms == 0.0);
    CHECK(e.size_bytes == kHeaderBytes);
  }
  SUBCASE("HashIndex uses rows / distinct") {
    StructureKind k;
    k.family = StructureFamily::HashIndex;
    k.column = "x";
    StatsMap s{{"x", ColumnStats{10, Value(0), Value(9), 0, 8.0}}};
    auto e = estimate(k, s, 1000, cal);
    CHECK(e.build_ms == doctest::Approx(1000 * cal.c_hash));
    CHECK(e.eval_ms == doctest::Approx(100 * cal.c_probe));
    CHECK(e.eval_rows == 100);
  }
  SUBCASE("missing statistics") {
    StructureKind k;
    k.family = StructureFamily::SortedRangeIndex;
    k.column = "nope";
    CHECK_THROWS_AS(estimate(k, {}, 10, cal), MissingStats);
  }
}

TEST_CASE("HashIndex eval estimate is within 3x of the measured probe time") {
  constexpr std::size_t kRows = 100'000, kKeys = 1000;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> key(0, kKeys - 1), val(0, 1 << 20);
  RelationBuilder b("t", {{"k", ColumnType::Int64}, {"v", ColumnType::Int64}});
  for (std::size_t i = 0; i < kRows; ++i) b.add_row({Value(key(rng)), Value(val(rng))});
  Relation t = std::move(b).finish();
  Database db{{"t", share(t)}};
  ChoicePlan plan(filter(scan("t"), {atom("k", CompareOp::Eq, "c", Domain::interval(0, static_cast<int>(kKeys) - 1, 1))}));
  auto ms = match(StructureFamily::HashIndex, plan, schemas_of(db));
  REQUIRE(ms.size() == 1);
  auto s = build(ms[0].kind, t);

  Calibration cal = measure_calibration();
  double est = estimate(ms[0].kind, compute_stats(t), kRows, cal).eval_ms;

  std::vector<double> times;
  for (int rep = 0; rep < 5; ++rep) {
    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = 0; k < 200; ++k) (void)eval(s, {{"c", Value(static_cast<std::int64_t>(k * 5))}});
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / 200);
  }
  std::sort(times.begin(), times.end());
  double measured = times[2];
  INFO("estimate ", est, " ms, measured ", measured, " ms");
  CHECK(est <= 3 * measured);
  CHECK(measured <= 3 * est);
}

}  // TEST_SUITE
