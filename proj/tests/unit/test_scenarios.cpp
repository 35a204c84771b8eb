#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "gridsynth/error.hpp"
#include "gridsynth/scenarios.hpp"

using namespace gridsynth;
using namespace gridsynth::scenarios;

namespace {

Generator thermal(std::string id, double pmax, double c1, double c2 = 0.0, double pmin = 0.0) {
  Generator g;
  g.id = std::move(id);
  g.fuel = geo::FuelType::kGasCombinedCycle;
  g.pmax_mw = pmax;
  g.pmin_mw = pmin;
  g.cost = c2 > 0.0 ? CostCurve::quadratic(c2, c1, 0.0) : CostCurve::linear(c1);
  return g;
}

std::vector<double> caps_of(const std::vector<Generator>& gens) {
  std::vector<double> c;
  for (const auto& g : gens) c.push_back(g.pmax_mw);
  return c;
}

assignment::RenewableTotals flat_renewables(int hours) {
  assignment::RenewableTotals r;
  r.solar_mw.assign(hours, 1.0);
  r.wind_mw.assign(hours, 1.0);
  return r;
}

// Merit-order dispatch of linear-cost units, the reference for the waterfill.
std::vector<double> merit_order(const std::vector<Generator>& gens, const std::vector<double>& caps, double load) {
  std::vector<int> order(gens.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gens[a].cost.c1 < gens[b].cost.c1; });
  std::vector<double> pg(gens.size(), 0.0);
  for (int i : order) {
    pg[i] = std::min(caps[i], load);
    load -= pg[i];
  }
  return pg;
}

}  // namespace

TEST_CASE("window around a mid-year peak") {
  std::vector<double> load(8760, 100.0);
  load[5000] = 500.0;
  auto sel = select_scenarios(load, flat_renewables(8760));
  CHECK(sel.size() == 245);
  CHECK(sel.front().hour == 4940);
  CHECK(sel[120].hour == 5060);
  CHECK(sel[0].tag == ScenarioTag::kMaxLoadWindow);
}

TEST_CASE("window near the start shifts to keep 121 hours") {
  CHECK(window_bounds(10, 8760) == std::pair<int, int>{0, 120});
  CHECK(window_bounds(8755, 8760) == std::pair<int, int>{8639, 8759});
  CHECK_THROWS_AS(window_bounds(0, 100), ValidationError);
  std::vector<double> short_load(100, 1.0);
  CHECK_THROWS_AS(select_scenarios(short_load, flat_renewables(100)), ValidationError);
}

TEST_CASE("selection appends solar, wind and low-renewable hours") {
  std::vector<double> load(500, 100.0);
  load[300] = 200.0;
  load[50] = 10.0;
  auto ren = flat_renewables(500);
  ren.solar_mw[7] = 90.0;
  ren.wind_mw[400] = 80.0;
  ren.solar_mw[250] = 0.0;
  ren.wind_mw[250] = 0.0;
  auto sel = select_scenarios(load, ren);
  REQUIRE(sel.size() == 245);
  CHECK(sel[121].hour == 0);  // min window at hour 50 shifted to 0..120
  CHECK(sel[241].hour == 120);
  CHECK(sel[242].hour == 7);
  CHECK(sel[242].tag == ScenarioTag::kMaxSolar);
  CHECK(sel[243].hour == 400);
  CHECK(sel[244].hour == 250);
  CHECK(sel[244].tag == ScenarioTag::kMinRenewable);
}

TEST_CASE("commitment keeps the two cheapest of three units") {
  std::vector<Generator> gens{thermal("g1", 60, 1), thermal("g2", 60, 2), thermal("g3", 60, 3)};
  auto c = unit_commitment(gens, caps_of(gens), 100.0);
  CHECK(c == std::vector<bool>{true, true, false});
}

TEST_CASE("zero load decommits every thermal unit") {
  std::vector<Generator> gens{thermal("g1", 60, 1), thermal("g2", 60, 2)};
  auto pv = thermal("pv", 50, 0);
  pv.is_renewable = true;
  pv.cost = CostCurve::zero();
  gens.push_back(pv);
  auto c = unit_commitment(gens, caps_of(gens), 0.0);
  CHECK(c == std::vector<bool>{false, false, true});
}

TEST_CASE("insufficient capacity is an infeasibility") {
  std::vector<Generator> gens{thermal("g1", 60, 1)};
  CHECK_THROWS_AS(unit_commitment(gens, caps_of(gens), 100.0), InfeasibleError);
}

TEST_CASE("linear merit order dispatch") {
  std::vector<Generator> gens{thermal("g1", 50, 10), thermal("g2", 50, 20)};
  auto d = economic_dispatch(gens, caps_of(gens), {true, true}, 60.0);
  CHECK(d.pg_mw[0] == doctest::Approx(50.0));
  CHECK(d.pg_mw[1] == doctest::Approx(10.0));
  CHECK(d.total_cost == doctest::Approx(700.0));
}

TEST_CASE("load equal to committed capacity puts every unit at its cap") {
  std::vector<Generator> gens{thermal("g1", 50, 10, 0.01), thermal("g2", 70, 20), thermal("g3", 30, 5, 0.1)};
  auto d = economic_dispatch(gens, caps_of(gens), {true, true, true}, 150.0);
  for (std::size_t i = 0; i < gens.size(); ++i) CHECK(d.pg_mw[i] == doctest::Approx(gens[i].pmax_mw));
}

TEST_CASE("quadratic units share an equal marginal cost") {
  std::vector<Generator> gens{thermal("g1", 500, 10, 0.01), thermal("g2", 500, 12, 0.02)};
  auto d = economic_dispatch(gens, caps_of(gens), {true, true}, 300.0);
  // p1 = (L - 10) / 0.02, p2 = (L - 12) / 0.04, p1 + p2 = 300 -> L = 1100 / 75.
  double lambda = 1100.0 / 75.0;
  CHECK(std::abs(d.pg_mw[0] - (lambda - 10) / 0.02) <= 1e-6);
  CHECK(std::abs(d.pg_mw[1] - (lambda - 12) / 0.04) <= 1e-6);
  CHECK(std::abs(gens[0].cost.marginal(d.pg_mw[0]) - gens[1].cost.marginal(d.pg_mw[1])) <= 1e-6);
}

TEST_CASE("uneconomic commitment removes the cheapest unit") {
  std::vector<Generator> gens{thermal("g1", 60, 1), thermal("g2", 60, 2), thermal("g3", 60, 3)};
  auto d = uneconomic_dispatch(gens, caps_of(gens), 100.0);
  CHECK(d.committed == std::vector<bool>{false, true, true});
  CHECK(d.pg_mw[0] == 0.0);
  CHECK(d.pg_mw[1] == doctest::Approx(60.0));
  CHECK(d.pg_mw[2] == doctest::Approx(40.0));
}

TEST_CASE("single unit gives identical economic and uneconomic dispatch") {
  std::vector<Generator> gens{thermal("g1", 200, 7, 0.03)};
  auto caps = caps_of(gens);
  auto e = economic_dispatch(gens, caps, unit_commitment(gens, caps, 120.0), 120.0);
  auto u = uneconomic_dispatch(gens, caps, 120.0);
  CHECK(e.pg_mw == u.pg_mw);
  CHECK(e.total_cost == u.total_cost);
}

TEST_CASE("random systems: balance, bounds, reserve, merit order and cost ordering") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 2 + static_cast<int>(rng() % 8);
    bool quadratic = trial % 2 == 0;
    std::vector<Generator> gens;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double pmax = 20.0 + 300.0 * u(rng);
      gens.push_back(thermal("g" + std::to_string(i), pmax, 5.0 + 60.0 * u(rng), quadratic ? 0.05 * u(rng) + 1e-4 : 0.0,
                             quadratic ? 0.1 * pmax * u(rng) : 0.0));
      total += pmax;
    }
    auto caps = caps_of(gens);
    double load = total / 1.1 * (0.2 + 0.8 * u(rng));
    auto committed = unit_commitment(gens, caps, load);
    double capacity = 0.0;
    for (int i = 0; i < n; ++i) capacity += committed[i] ? caps[i] : 0.0;
    CHECK(capacity >= 1.1 * load - 1e-9);
    DispatchResult e, un;
    try {
      e = economic_dispatch(gens, caps, committed, load);
      un = uneconomic_dispatch(gens, caps, load);
    } catch (const InfeasibleError&) {
      continue;  // minimum outputs of the committed set exceed the load
    }
    for (const auto* d : {&e, &un}) {
      CHECK(std::abs(d->total_generation() - load) <= 1e-6);
      for (int i = 0; i < n; ++i) {
        double lo = d->committed[i] ? gens[i].pmin_mw : 0.0;
        double hi = d->committed[i] ? caps[i] : 0.0;
        CHECK(d->pg_mw[i] >= lo - 1e-9);
        CHECK(d->pg_mw[i] <= hi + 1e-9);
      }
    }
    if (!quadratic) {
      std::vector<double> on_caps(n);
      for (int i = 0; i < n; ++i) on_caps[i] = committed[i] ? caps[i] : 0.0;
      auto ref = merit_order(gens, on_caps, load);
      double ref_cost = 0.0;
      for (int i = 0; i < n; ++i) ref_cost += gens[i].cost.cost(ref[i]);
      CHECK(std::abs(e.total_cost - ref_cost) <= 1e-6 * std::max(1.0, ref_cost));
      CHECK(e.total_cost <= un.total_cost + 1e-6);
    }
  }
}

TEST_CASE("injection scenarios serialize and parse back") {
  GridModel m;
  Bus b;
  b.id = "B";
  m.buses.push_back(b);
  auto loads = std::make_shared<std::vector<geo::LoadRecord>>();
  geo::LoadRecord rec;
  rec.tract_id = "T";
  for (int h = 0; h < 200; ++h) rec.profile.push_back(50.0 + 40.0 * std::sin(h * 0.1));
  loads->push_back(rec);
  m.loads = loads;
  m.load_bus = {0};
  auto g1 = thermal("g1", 80, 10);
  g1.bus = 0;
  auto g2 = thermal("g2", 80, 30);
  g2.bus = 0;
  m.generators = {g1, g2};

  auto inj = build_injection_scenarios(m, flat_renewables(200));
  CHECK(inj.size() == 490);
  for (const auto& s : inj) CHECK(std::abs(s.dispatch.total_generation() - s.scenario.total_load()) <= 1e-6);
  auto text = to_jsonl(m, inj);
  auto back = from_jsonl(m, text);
  REQUIRE(back.size() == inj.size());
  for (std::size_t i = 0; i < inj.size(); ++i) {
    CHECK(back[i].scenario.hour == inj[i].scenario.hour);
    CHECK(back[i].scenario.kind == inj[i].scenario.kind);
    CHECK(back[i].scenario.tag == inj[i].scenario.tag);
    CHECK(back[i].dispatch.pg_mw == inj[i].dispatch.pg_mw);
    CHECK(back[i].dispatch.committed == inj[i].dispatch.committed);
  }
  CHECK(to_jsonl(m, back) == text);
}
