#include "pvd/synth.hpp"

#include <cstdio>
#include <random>

#include "pvd/plan_json.hpp"

namespace pvd {

std::optional<SynthKind> parse_synth_kind(std::string_view s) {
  for (auto k : {SynthKind::Congress, SynthKind::Filter, SynthKind::Cube, SynthKind::Join, SynthKind::NMJoin})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

std::string_view to_string(SynthKind k) {
  switch (k) {
    case SynthKind::Congress: return "congress";
    case SynthKind::Filter: return "filter";
    case SynthKind::Cube: return "cube";
    case SynthKind::Join: return "join";
    case SynthKind::NMJoin: return "nm-join";
  }
  return "?";
}

namespace {

Value I(std::int64_t v) { return Value(v); }

Domain int_range(std::int64_t lo, std::int64_t hi) { return Domain::interval(I(lo), I(hi), I(1)); }

Source source_of(const Relation& r) { return Source{r.name(), r.name() + ".csv", r.schema()}; }

std::string padded(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03zu", prefix, i);
  return buf;
}

Generated congress(const SynthOptions& o) {
  std::size_t rows = o.rows ? o.rows : 20'000;
  std::size_t members = std::max<std::size_t>(o.members, 2);
  std::size_t house = std::max<std::size_t>(members * 4 / 5, 1);
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> who(0, members - 1);
  std::uniform_int_distribution<std::int64_t> year(1990, 2020);
  RelationBuilder b("votes", {{"name", ColumnType::String}, {"chamber", ColumnType::String}, {"date", ColumnType::Int64}});
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t m = who(rng);
    bool h = m < house;
    b.add_row({Value(h ? padded("rep_", m) : padded("sen_", m - house)), Value(h ? "house" : "senate"),
               I(year(rng))});
  }
  Generated g;
  g.db["votes"] = std::make_shared<const Relation>(std::move(b).finish());
  g.spec.sources.push_back(source_of(*g.db["votes"]));

  Domain chambers = Domain::values({Value("house"), Value("senate")});
  Domain years = int_range(1990, 2020);
  PlanPtr plan = project(
      group_by(filter(filter(scan("votes"), {atom("chamber", CompareOp::Eq, "a", chambers)}),
                      {atom("date", CompareOp::Ge, "b_lo", years), atom("date", CompareOp::Le, "b_hi", years)}),
               {"name"}, {Aggregate{AggFunc::Count, std::nullopt, "votes"}}),
      {"name", "votes"});
  g.spec.views.push_back(View{"votes_by_member", ChoicePlan(plan)});
  g.spec.interactions.push_back(
      Interaction{"chamber_dropdown", {"a"}, InteractionKind::Discrete, 500.0, "votes_by_member"});
  g.spec.interactions.push_back(
      Interaction{"date_slider", {"b_lo", "b_hi"}, InteractionKind::Continuous, 20.0, "votes_by_member"});
  g.spec.range_constraints.push_back(RangeConstraint{"b_lo", "b_hi"});
  return g;
}

Generated filter_spec(const SynthOptions& o) {
  std::size_t rows = o.rows ? o.rows : 5'000;
  const std::vector<std::string> cats = {"books", "games", "garden", "music", "tools"};
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> cat(0, cats.size() - 1);
  std::uniform_int_distribution<std::int64_t> qty(0, 9);
  std::uniform_int_distribution<std::int64_t> cents(100, 99'999);
  RelationBuilder b("items", {{"item_id", ColumnType::Int64},
                              {"category", ColumnType::String},
                              {"price", ColumnType::Float64},
                              {"qty", ColumnType::Int64}});
  for (std::size_t r = 0; r < rows; ++r)
    b.add_row({I(static_cast<std::int64_t>(r)), Value(cats[cat(rng)]),
               Value(static_cast<double>(cents(rng)) / 100.0), I(qty(rng))});
  Generated g;
  g.db["items"] = std::make_shared<const Relation>(std::move(b).finish());
  g.spec.sources.push_back(source_of(*g.db["items"]));
  std::vector<Value> dom;
  for (const auto& c : cats) dom.emplace_back(c);
  PlanPtr plan = project(filter(scan("items"), {atom("category", CompareOp::Eq, "cat", Domain::values(dom)),
                                                atom("qty", CompareOp::Gt, I(0))}),
                         {"item_id", "category", "price"});
  g.spec.views.push_back(View{"item_list", ChoicePlan(plan)});
  g.spec.interactions.push_back(Interaction{"category_menu", {"cat"}, InteractionKind::Discrete, 200.0, "item_list"});
  return g;
}

Generated cube_spec(const SynthOptions& o) {
  std::size_t rows = o.rows ? o.rows : 10'000;
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::size_t> region(0, 7);
  std::uniform_int_distribution<std::int64_t> day(0, 49);
  std::uniform_real_distribution<double> amount(1.0, 500.0);
  std::uniform_int_distribution<std::int64_t> units(1, 20);
  RelationBuilder b("sales", {{"region", ColumnType::String},
                              {"day", ColumnType::Int64},
                              {"amount", ColumnType::Float64},
                              {"units", ColumnType::Int64}});
  for (std::size_t r = 0; r < rows; ++r)
    b.add_row({Value(padded("region_", region(rng))), I(day(rng)), Value(amount(rng)), I(units(rng))});
  Generated g;
  g.db["sales"] = std::make_shared<const Relation>(std::move(b).finish());
  g.spec.sources.push_back(source_of(*g.db["sales"]));
  Domain days = int_range(0, 49);
  PlanPtr plan = group_by(
      filter(scan("sales"), {atom("day", CompareOp::Ge, "lo", days), atom("day", CompareOp::Le, "hi", days)}),
      {"region"},
      {Aggregate{AggFunc::Count, std::nullopt, "n"}, Aggregate{AggFunc::Sum, "amount", "revenue"},
       Aggregate{AggFunc::Avg, "units", "avg_units"}, Aggregate{AggFunc::Min, "amount", "min_amount"},
       Aggregate{AggFunc::Max, "units", "max_units"}});
  g.spec.views.push_back(View{"sales_by_region", ChoicePlan(plan)});
  g.spec.interactions.push_back(
      Interaction{"day_brush", {"lo", "hi"}, InteractionKind::Continuous, 20.0, "sales_by_region"});
  g.spec.range_constraints.push_back(RangeConstraint{"lo", "hi"});
  return g;
}

Relation orders(std::size_t rows, std::int64_t customers, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> cust(0, customers - 1);
  std::uniform_int_distribution<std::int64_t> day(0, 29);
  std::uniform_real_distribution<double> amount(5.0, 250.0);
  RelationBuilder b("orders", {{"order_id", ColumnType::Int64},
                               {"o_cust", ColumnType::Int64},
                               {"amount", ColumnType::Float64},
                               {"day", ColumnType::Int64}});
  for (std::size_t r = 0; r < rows; ++r)
    b.add_row({I(static_cast<std::int64_t>(r)), I(cust(rng)), Value(amount(rng)), I(day(rng))});
  return std::move(b).finish();
}

Generated join_spec(const SynthOptions& o, bool many) {
  std::size_t rows = o.rows ? o.rows : 8'000;
  constexpr std::int64_t kCustomers = 400;
  std::mt19937_64 rng(o.seed);
  Generated g;
  g.db["orders"] = std::make_shared<const Relation>(orders(rows, kCustomers, rng));
  std::string right, right_key, group_col;
  if (!many) {
    const std::vector<std::string> segs = {"consumer", "corporate", "public", "small_business"};
    RelationBuilder b("customers", {{"cust_id", ColumnType::Int64}, {"segment", ColumnType::String}});
    std::uniform_int_distribution<std::size_t> seg(0, segs.size() - 1);
    for (std::int64_t c = 0; c < kCustomers; ++c) b.add_row({I(c), Value(segs[seg(rng)])});
    right = "customers", right_key = "cust_id", group_col = "segment";
    g.db[right] = std::make_shared<const Relation>(std::move(b).finish());
  } else {
    const std::vector<std::string> channels = {"email", "search", "social"};
    RelationBuilder b("visits", {{"v_cust", ColumnType::Int64}, {"channel", ColumnType::String}});
    std::uniform_int_distribution<std::size_t> ch(0, channels.size() - 1);
    std::uniform_int_distribution<int> count(0, 5);
    for (std::int64_t c = 0; c < kCustomers; ++c)
      for (int v = count(rng); v > 0; --v) b.add_row({I(c), Value(channels[ch(rng)])});
    right = "visits", right_key = "v_cust", group_col = "channel";
    g.db[right] = std::make_shared<const Relation>(std::move(b).finish());
  }
  g.spec.sources.push_back(source_of(*g.db["orders"]));
  g.spec.sources.push_back(source_of(*g.db[right]));
  std::optional<std::int64_t> fanout = many ? o.max_fanout : std::optional<std::int64_t>(1);
  Domain days = int_range(0, 29);
  PlanPtr plan = group_by(filter(join(scan("orders"), scan(right), {{"o_cust", right_key}}, fanout),
                                 {atom("day", CompareOp::Ge, "d_lo", days), atom("day", CompareOp::Le, "d_hi", days)}),
                          {group_col},
                          {Aggregate{AggFunc::Count, std::nullopt, "orders"}, Aggregate{AggFunc::Sum, "amount", "revenue"}});
  std::string view = many ? "revenue_by_channel" : "revenue_by_segment";
  g.spec.views.push_back(View{view, ChoicePlan(plan)});
  g.spec.interactions.push_back(Interaction{"day_range", {"d_lo", "d_hi"}, InteractionKind::Continuous, 20.0, view});
  g.spec.range_constraints.push_back(RangeConstraint{"d_lo", "d_hi"});
  return g;
}

}  // namespace

Generated generate(SynthKind kind, const SynthOptions& opts) {
  switch (kind) {
    case SynthKind::Congress: return congress(opts);
    case SynthKind::Filter: return filter_spec(opts);
    case SynthKind::Cube: return cube_spec(opts);
    case SynthKind::Join: return join_spec(opts, false);
    case SynthKind::NMJoin: return join_spec(opts, true);
  }
  return {};
}

void write_generated(const Generated& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, rel] : g.db) write_csv(dir / (name + ".csv"), *rel);
  save_json(dir / "spec.json", spec_to_json(g.spec));
}

}  // namespace pvd
