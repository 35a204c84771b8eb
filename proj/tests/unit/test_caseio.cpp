#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include <nlohmann/json.hpp>

#include "gridsynth/caseio.hpp"
#include "gridsynth/error.hpp"
#include "temp_dir.hpp"

using namespace gridsynth;
using namespace gridsynth::caseio;

namespace {

double awkward(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return u(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
}

GridModel random_model(std::mt19937_64& rng) {
  GridModel m;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int nb = 3 + static_cast<int>(rng() % 8);
  for (int i = 0; i < nb; ++i) {
    Bus b;
    b.id = i == 1 ? "O'Neill 230" : "B" + std::to_string(i);
    b.voltage_kv = i % 2 ? 115.0 : 230.0;
    b.kind = static_cast<BusKind>(i % 3);
    b.location = {34.0 + u(rng), -118.0 - u(rng)};
    if (b.kind == BusKind::kSubstation) b.origin = "S" + std::to_string(i);
    if (b.kind == BusKind::kVoltageSplit) b.parent = "B0";
    m.buses.push_back(b);
  }
  for (int i = 1; i < nb; ++i) {
    Branch br;
    br.id = "L" + std::to_string(i);
    br.from = static_cast<int>(rng() % i);
    br.to = i;
    br.kind = i % 4 == 0 ? BranchKind::kTransformer : BranchKind::kLine;
    br.r = std::abs(awkward(rng)) + 1e-6;
    br.x = std::abs(awkward(rng)) + 1e-5;
    br.b = std::abs(awkward(rng));
    br.rate_mva = 100.0 * u(rng) + 1.0;
    br.kv_from = m.buses[br.from].voltage_kv;
    br.kv_to = m.buses[br.to].voltage_kv;
    if (br.is_line()) {
      br.length_miles = 50.0 * u(rng);
      br.path.id = "P" + std::to_string(i);
      br.path.voltage_kv = br.kv_from;
      if (i % 2) br.path.owner = "Utility, Inc.";
      br.path.points = {m.buses[br.from].location, {34.5 + u(rng), -118.5}, m.buses[br.to].location};
      for (int c = 1; c <= 3; ++c) {
        br.options.push_back({"Drake", 795.0, 907.0, 0.1284 + awkward(rng) * 1e-3, 0.0375, c, 180.7 * c + u(rng)});
      }
      br.option_index = static_cast<int>(rng() % 3);
      br.circuits = br.options[br.option_index].circuits;
      br.doubled = rng() % 2;
    } else {
      br.xr_ratio = 30.0 + u(rng);
    }
    m.branches.push_back(br);
  }
  for (int g = 0; g < 3; ++g) {
    Generator gen;
    gen.id = "G" + std::to_string(g);
    gen.bus = static_cast<int>(rng() % nb);
    gen.fuel = g == 0 ? geo::FuelType::kSolar : geo::FuelType::kGasCombinedCycle;
    gen.pmax_mw = 100.0 * u(rng) + 10.0;
    gen.pmin_mw = g == 2 ? 5.0 : 0.0;
    gen.qmax_mvar = 30.0 * u(rng);
    gen.qmin_mvar = -gen.qmax_mvar;
    gen.power_factor = 0.85 + 0.1 * u(rng);
    gen.is_renewable = g == 0;
    gen.scalable_cap = g == 0;
    gen.cost = g == 0 ? CostCurve::zero() : CostCurve::quadratic(std::abs(awkward(rng)) * 1e-2 + 0.02, 20.0 * u(rng), 100.0 * u(rng));
    if (g == 1) {
      gen.plant_code = "55";
      gen.unit_id = "CT1";
    }
    m.generators.push_back(gen);
  }
  for (int c = 0; c < 2; ++c) {
    Condenser cond;
    cond.bus = c;
    cond.active = c == 0;
    m.condensers.push_back(cond);
  }
  m.load_bus = {0, -1, nb - 1};
  m.load_power_factor = 0.97;
  return m;
}

}  // namespace

TEST_CASE("export then import preserves every field") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto m = random_model(rng);
    auto text = export_case(m);
    auto back = import_case(text.matpower, text.geojson);
    auto diff = compare_models(m, back, 0.0);
    CHECK_MESSAGE(!diff, diff.value_or(""));
    auto again = export_case(back);
    CHECK(again.matpower == text.matpower);
    CHECK(again.geojson == text.geojson);
  }
}

TEST_CASE("one path feature per line and polynomial cost rows") {
  std::mt19937_64 rng(5);
  auto m = random_model(rng);
  auto text = export_case(m);
  auto doc = nlohmann::json::parse(text.geojson);
  CHECK(static_cast<int>(doc["features"].size()) == m.num_lines());
  CHECK(text.matpower.find("mpc.baseMVA = 100;") != std::string::npos);
  auto pos = text.matpower.find("mpc.gencost = [");
  REQUIRE(pos != std::string::npos);
  auto row = text.matpower.substr(text.matpower.find('\n', pos) + 1, 40);
  CHECK(row.rfind("\t2\t0\t0\t3\t", 0) == 0);
}

TEST_CASE("condensers are zero-output generator rows") {
  std::mt19937_64 rng(9);
  auto m = random_model(rng);
  auto text = export_case(m);
  auto back = import_case(text.matpower, text.geojson);
  REQUIRE(back.condensers.size() == 2);
  CHECK(back.condensers[0].active);
  CHECK(!back.condensers[1].active);
  CHECK(back.generators.size() == 3);
}

TEST_CASE("missing impedance is rejected") {
  std::mt19937_64 rng(3);
  auto m = random_model(rng);
  m.branches[0].r = m.branches[0].x = 0.0;
  CHECK_THROWS_AS(export_case(m), ValidationError);
}

TEST_CASE("malformed case text names the problem") {
  std::mt19937_64 rng(4);
  auto text = export_case(random_model(rng));
  auto broken = text.matpower;
  broken.replace(broken.find("mpc.branch_ext"), 14, "mpc.branch_xxx");
  CHECK_THROWS_WITH_AS(import_case(broken, text.geojson), doctest::Contains("branch_ext"), ValidationError);
  CHECK_THROWS_AS(import_case(text.matpower, "{}"), ValidationError);
}

TEST_CASE("files on disk round trip") {
  TempDir dir("caseio");
  std::mt19937_64 rng(8);
  auto m = random_model(rng);
  write_case(dir.path / "case", m);
  auto back = read_case(dir.path / "case");
  CHECK(!compare_models(m, back));
}
