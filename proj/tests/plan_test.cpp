#include <algorithm>

#include "doctest.h"
#include "pvd/errors.hpp"
#include "pvd/oracle.hpp"
#include "pvd/plan.hpp"
#include "pvd/plan_json.hpp"
#include "test_util.hpp"

using namespace pvd;

namespace {

bool has_code(const std::vector<Diagnostic>& ds, DiagCode c, const std::string& subject = "") {
  return std::any_of(ds.begin(), ds.end(),
                     [&](const Diagnostic& d) { return d.code == c && (subject.empty() || d.subject == subject); });
}

InterfaceSpec one_view(PlanPtr root, std::vector<Interaction> inters, Schema schema) {
  InterfaceSpec s;
  s.sources.push_back({"t", "t.csv", std::move(schema)});
  s.views.push_back({"v", ChoicePlan(std::move(root))});
  s.interactions = std::move(inters);
  return s;
}

const Schema kXY = {{"x", ColumnType::Int64}, {"y", ColumnType::Int64}, {"s", ColumnType::String}};

}  // namespace

TEST_SUITE("plan-ir") {

TEST_CASE("congress spec validates cleanly") {
  auto g = pvd::testing::small_congress(100, 5);
  CHECK(validate_spec(g.spec).empty());
  REQUIRE(g.spec.interactions.size() == 2);
  CHECK(g.spec.find_interaction("date_slider")->latency_bound_ms == 20.0);
  CHECK(g.spec.find_interaction("chamber_dropdown")->latency_bound_ms == 500.0);
}

TEST_CASE("interaction naming an absent choice is a DanglingChoice") {
  auto g = pvd::testing::small_congress(100, 5);
  g.spec.interactions[0].bound_choices.push_back("zz");
  CHECK(has_code(validate_spec(g.spec), DiagCode::DanglingChoice, "zz"));
}

TEST_CASE("string domain on an int column is a DomainTypeMismatch") {
  auto root = filter(scan("t"), {atom("x", CompareOp::Eq, "c", Domain::values({Value("house")}))});
  auto s = one_view(root, {{"i", {"c"}, InteractionKind::Discrete, 100, "v"}}, kXY);
  CHECK(has_code(validate_spec(s), DiagCode::DomainTypeMismatch, "c"));
}

TEST_CASE("other diagnostics: unknown relation, non-positive bound, unbound choice") {
  auto root = filter(scan("nope"), {atom("x", CompareOp::Eq, "c", Domain::values({Value(1)}))});
  auto s = one_view(root, {{"i", {"c"}, InteractionKind::Discrete, 0, "v"}}, kXY);
  auto ds = validate_spec(s);
  CHECK(has_code(ds, DiagCode::UnknownRelation));
  CHECK(has_code(ds, DiagCode::NonPositiveLatency, "i"));

  auto root2 = filter(scan("t"), {atom("x", CompareOp::Eq, "c", Domain::values({Value(1)}))});
  auto s2 = one_view(root2, {}, kXY);
  CHECK(has_code(validate_spec(s2), DiagCode::UnboundChoice, "c"));
}

TEST_CASE("binding the congress plan substitutes both choices") {
  auto g = pvd::testing::small_congress(100, 5);
  Binding b{{"a", Value("house")}, {"b_lo", Value(2001)}, {"b_hi", Value(2020)}};
  PlanPtr bound = pvd::bind(g.spec, "votes_by_member", b);
  auto expect = project(
      group_by(filter(filter(scan("votes"), {atom("chamber", CompareOp::Eq, Value("house"))}),
                      {atom("date", CompareOp::Ge, Value(2001)), atom("date", CompareOp::Le, Value(2020))}),
               {"name"}, {{AggFunc::Count, std::nullopt, "votes"}}),
      {"name", "votes"});
  CHECK(same_structure(*bound, *expect));
  CHECK(choices_under(*bound).empty());
}

TEST_CASE("binding a choice-free plan is the identity") {
  auto root = group_by(scan("t"), {"s"}, {{AggFunc::Sum, std::string("x"), "sx"}});
  CHECK(same_structure(*pvd::bind(*root, {}), *root));
}

TEST_CASE("out-of-domain, unbound and inverted-range bindings are rejected") {
  auto g = pvd::testing::small_congress(100, 5);
  Binding b{{"a", Value("house")}, {"b_lo", Value(2001)}, {"b_hi", Value(2050)}};
  CHECK_THROWS_AS(pvd::bind(g.spec, "votes_by_member", b), OutOfDomain);
  b.erase("b_hi");
  CHECK_THROWS_AS(pvd::bind(g.spec, "votes_by_member", b), UnboundChoice);
  Binding inv{{"a", Value("house")}, {"b_lo", Value(2010)}, {"b_hi", Value(2001)}};
  CHECK_THROWS_AS(pvd::bind(g.spec, "votes_by_member", inv), InvalidRange);
}

TEST_CASE("subplan choices select an alternative") {
  auto root = choose("alt", {scan("t"), filter(scan("t"), {atom("x", CompareOp::Gt, Value(3))})});
  auto b0 = pvd::bind(*root, {{"alt", Value(0)}});
  auto b1 = pvd::bind(*root, {{"alt", Value(1)}});
  CHECK(b0->kind == NodeKind::Scan);
  CHECK(b1->kind == NodeKind::Filter);
  CHECK_THROWS_AS(pvd::bind(*root, {{"alt", Value(2)}}), OutOfDomain);
}

TEST_CASE("enumerate_bindings counts") {
  SUBCASE("one interval choice over [0,9]") {
    auto root = filter(scan("t"), {atom("x", CompareOp::Ge, "c", Domain::interval(0, 9, 1))});
    auto s = one_view(root, {{"i", {"c"}, InteractionKind::Continuous, 20, "v"}}, kXY);
    CHECK(enumerate_bindings(s, s.interactions[0]).size() == 10);
  }
  SUBCASE("two choices 4 x 5") {
    auto root = filter(scan("t"), {atom("x", CompareOp::Eq, "c", Domain::interval(0, 3, 1)),
                                   atom("y", CompareOp::Eq, "d", Domain::values({1, 2, 3, 4, 5}))});
    auto s = one_view(root, {{"i", {"c", "d"}, InteractionKind::Discrete, 200, "v"}}, kXY);
    auto bs = enumerate_bindings(s, s.interactions[0]);
    CHECK(bs.size() == 20);
    CHECK(bs.front().at("d") == Value(1));
    CHECK(bs[1].at("d") == Value(2));  // last bound choice fastest
    CHECK_THROWS_AS(enumerate_bindings(s, s.interactions[0], 19), DomainExplosion);
  }
}

TEST_CASE("congress date range yields 496 valid bindings") {
  auto g = pvd::testing::small_congress(100, 5);
  auto bs = enumerate_bindings(g.spec, *g.spec.find_interaction("date_slider"));
  std::size_t brute = 0;
  for (int lo = 1990; lo <= 2020; ++lo)
    for (int hi = 1990; hi <= 2020; ++hi)
      if (lo <= hi) ++brute;
  CHECK(brute == 496);
  CHECK(bs.size() == brute);
  for (const auto& b : bs) {
    CHECK(b.at("a") == Value("house"));  // held at the first domain value
    CHECK(b.at("b_lo").as_int() <= b.at("b_hi").as_int());
  }
  CHECK(enumerate_view_bindings(g.spec, "votes_by_member").size() == 2 * 496);
}

TEST_CASE("every enumerated binding evaluates without error") {
  auto g = pvd::testing::small_congress(300, 5);
  for (const auto& i : g.spec.interactions)
    for (const auto& b : enumerate_bindings(g.spec, i)) CHECK_NOTHROW(oracle_eval(*pvd::bind(g.spec, i.view, b), g.db));
}

TEST_CASE("bindings agreeing on every choice bind to the same plan") {
  auto g = pvd::testing::small_congress(100, 5);
  Binding b1{{"a", Value("senate")}, {"b_lo", Value(1995)}, {"b_hi", Value(2000)}};
  Binding b2 = b1;
  b2["unrelated"] = Value(7);
  CHECK(same_structure(*pvd::bind(g.spec, "votes_by_member", b1), *pvd::bind(g.spec, "votes_by_member", b2)));
}

TEST_CASE("choice dependencies walk to the root") {
  auto g = pvd::testing::small_congress(100, 5);
  auto deps = choice_dependencies(g.spec);
  auto ids = [&](const std::string& c) {
    std::set<int> out;
    for (const auto& r : deps.at(c)) out.insert(r.node);
    return out;
  };
  // project 0 <- groupby 1 <- filter(date) 2 <- filter(chamber) 3 <- scan 4
  CHECK(ids("a") == std::set<int>{0, 1, 2, 3});
  CHECK(ids("b_lo") == std::set<int>{0, 1, 2});
  CHECK(ids("b_hi") == std::set<int>{0, 1, 2});
  CHECK(ids("a").count(1) == 1);

  const ChoicePlan& plan = g.spec.views[0].plan;
  for (const auto& [c, refs] : deps)
    for (const auto& r : refs)
      for (int anc : plan.path_to(r.node)) CHECK(refs.count({r.view, anc}) == 1);  // ancestor-closed

  auto plain = one_view(scan("t"), {}, kXY);
  CHECK(choice_dependencies(plain).empty());
}

TEST_CASE("spec JSON round-trips and malformed documents name the location") {
  auto g = pvd::testing::small_congress(100, 5);
  Json j = spec_to_json(g.spec);
  CHECK(j["spec_version"] == 1);
  InterfaceSpec back = spec_from_json(j);
  CHECK(spec_to_json(back).dump() == j.dump());

  Json bad = j;
  bad.erase("spec_version");
  CHECK_THROWS_AS(spec_from_json(bad), PlanFormatError);

  Json bad2 = j;
  bad2["interactions"][1]["kind"] = "sometimes";
  try {
    spec_from_json(bad2);
    FAIL("expected PlanFormatError");
  } catch (const PlanFormatError& e) {
    CHECK(std::string(e.what()).find("spec.interactions[1].kind") != std::string::npos);
  }
}

TEST_CASE("seeded samples repeat") {
  auto g = pvd::testing::small_congress(100, 5);
  const auto& i = *g.spec.find_interaction("date_slider");
  auto a = sample_bindings(g.spec, i, 100, 7), b = sample_bindings(g.spec, i, 100, 7);
  CHECK(a == b);
  for (const auto& x : a) CHECK(satisfies_constraints(g.spec, x));
}

}  // TEST_SUITE
