#include <doctest.h>

#include <cmath>
#include <set>

#include "gridsynth/error.hpp"
#include "gridsynth/lineparams.hpp"
#include "temp_dir.hpp"

using namespace gridsynth;
using namespace gridsynth::lineparams;

namespace {

ConductorOption drake(int circuits = 1) {
  return {"Drake", 795.0, 907.0, 0.1284, 0.0375, circuits, 0.0};
}

Branch line_with_options(double kv, const std::vector<CatalogEntry>& catalog, const LineConfig& cfg) {
  Branch br;
  br.id = "L";
  br.kv_from = br.kv_to = kv;
  br.length_miles = 40.0;
  br.options = build_option_table(catalog, kv, cfg);
  return br;
}

std::vector<CatalogEntry> shipped_catalog() { return read_conductor_catalog("config/conductors.csv"); }

TransformerTables shipped_tables() {
  return read_transformer_tables("config/transformer_impedance.csv", "config/transformer_xr.csv");
}

}  // namespace

TEST_CASE("795 kcmil at 230 kV over 100 miles") {
  auto z = impedance_from_conductor(drake(), 230.0, 100.0, 25.0);
  double z_base = 230.0 * 230.0 / 100.0;
  double hand = 0.12134 * std::log(25.0 / 0.0375) * 100.0 / z_base;
  CHECK(std::abs(z.x - hand) <= 1e-12);
  CHECK(std::abs(z.x - 0.14915) <= 1e-5);
  CHECK(z.x >= 0.05);
  CHECK(z.x <= 0.15);
  CHECK(z.r == doctest::Approx(0.1284 * 100.0 / z_base));
}

TEST_CASE("impedance is linear in length and follows the parallel combination") {
  auto one = impedance_from_conductor(drake(), 115.0, 30.0, 10.0);
  auto twice = impedance_from_conductor(drake(), 115.0, 60.0, 10.0);
  CHECK(twice.r == doctest::Approx(2.0 * one.r).epsilon(1e-12));
  CHECK(twice.x == doctest::Approx(2.0 * one.x).epsilon(1e-12));
  CHECK(twice.b == doctest::Approx(2.0 * one.b).epsilon(1e-12));
  auto doubled = impedance_from_conductor(drake(2), 115.0, 30.0, 10.0);
  CHECK(std::abs(doubled.r / one.r - 0.5) <= 1e-9);
  CHECK(std::abs(doubled.x / one.x - 0.5) <= 1e-9);
  CHECK(std::abs(doubled.b / one.b - 2.0) <= 1e-9);
}

TEST_CASE("nonpositive geometry is rejected") {
  auto bad = drake();
  bad.gmr_ft = 0.0;
  CHECK_THROWS_AS(impedance_from_conductor(bad, 230.0, 10.0, 25.0), ValidationError);
  CHECK_THROWS_AS(impedance_from_conductor(drake(), 230.0, 10.0, 0.0), ValidationError);
  CHECK_THROWS_AS(impedance_from_conductor(drake(), 230.0, 0.0, 25.0), ValidationError);
}

TEST_CASE("thermal rating from ampacity") {
  ConductorOption o{"X", 0.0, 1000.0, 0.1, 0.03, 1, 0.0};
  CHECK(mva_rating(o, 230.0) == doctest::Approx(398.37).epsilon(1e-4));
  CHECK(std::abs(mva_rating(o, 230.0) - std::sqrt(3.0) * 230.0) <= 1e-9);
  o.circuits = 2;
  CHECK(mva_rating(o, 230.0) == 2.0 * std::sqrt(3.0) * 230.0);
}

TEST_CASE("option tables are strictly ascending with at most eight circuits") {
  LineConfig cfg;
  auto catalog = shipped_catalog();
  for (double kv : {66.0, 115.0, 230.0, 500.0}) {
    auto opts = build_option_table(catalog, kv, cfg);
    REQUIRE(opts.size() > 8);
    for (std::size_t i = 1; i < opts.size(); ++i) CHECK(opts[i].mva > opts[i - 1].mva * (1.0 + cfg.dedup_tol));
    for (const auto& o : opts) {
      CHECK(o.circuits >= 1);
      CHECK(o.circuits <= 8);
      CHECK(std::abs(o.mva - mva_rating(o, kv)) <= 1e-9);
    }
  }
  CHECK_THROWS_AS(build_option_table({}, 230.0, cfg), ValidationError);
}

TEST_CASE("upgrades walk every option and strictly raise the rating") {
  LineConfig cfg;
  auto catalog = shipped_catalog();
  for (double kv : {66.0, 230.0}) {
    auto br = line_with_options(kv, catalog, cfg);
    br.option_index = 0;
    std::set<int> visited{0};
    int steps = 0;
    for (int next = upgrade_index(br); next >= 0; next = upgrade_index(br)) {
      CHECK(br.options[next].mva > br.options[br.option_index].mva);
      br.option_index = next;
      visited.insert(next);
      REQUIRE(++steps < 200);
    }
    const auto& top = br.options[br.option_index];
    CHECK(top.circuits == 8);
    CHECK(br.option_index == static_cast<int>(br.options.size()) - 1);

    for (int next = downsize_index(br); next >= 0; next = downsize_index(br)) {
      CHECK(br.options[next].mva < br.options[br.option_index].mva);
      br.option_index = next;
    }
    CHECK(br.option_index == 0);
  }
}

TEST_CASE("upgrade moves to the next conductor before adding a circuit") {
  LineConfig cfg;
  std::vector<CatalogEntry> catalog{{230, "A", 300, 500, 0.3, 0.02}, {230, "B", 600, 800, 0.15, 0.03}};
  cfg.max_circuits = 3;
  auto br = line_with_options(230.0, catalog, cfg);
  auto index_of = [&](const std::string& name, int circuits) {
    for (int i = 0; i < static_cast<int>(br.options.size()); ++i) {
      if (br.options[i].name == name && br.options[i].circuits == circuits) return i;
    }
    return -1;
  };
  br.option_index = index_of("A", 1);
  CHECK(upgrade_index(br, 3) == index_of("B", 1));
  br.option_index = index_of("B", 1);
  CHECK(upgrade_index(br, 3) == index_of("B", 2));
  br.option_index = index_of("B", 3);
  CHECK(upgrade_index(br, 3) == -1);
  br.option_index = index_of("A", 1);
  CHECK(downsize_index(br) == -1);
}

TEST_CASE("installed parameters match the option") {
  LineConfig cfg;
  auto br = line_with_options(115.0, shipped_catalog(), cfg);
  for (int i = 0; i < static_cast<int>(br.options.size()); ++i) {
    apply_option(br, i, cfg);
    auto z = impedance_from_conductor(br.options[i], 115.0, br.length_miles, 10.0);
    CHECK(br.r == z.r);
    CHECK(br.x == z.x);
    CHECK(br.b == z.b);
    CHECK(br.rate_mva == br.options[i].mva);
    CHECK(br.circuits == br.options[i].circuits);
  }
  br.doubled = true;
  apply_option(br, 2, cfg);
  CHECK(br.rate_mva == 2.0 * br.options[2].mva);
}

TEST_CASE("Form 1 match picks the closest length") {
  std::vector<Form1Record> f{{"U", 230, 8.0, 1, 795, "ACSR"}, {"U", 230, 11.0, 1, 795, "ACSR"},
                             {"U", 230, 30.0, 1, 795, "ACSR"}};
  geo::LinePath p{"L", {}, 230.0, {}, {}};
  CHECK(match_form1(p, 10.0, f) == 1);
  CHECK(match_form1(p, 30.0, f) == 2);
  CHECK(match_form1(p, 9.5, f) == 0);  // tie between 8 and 11 goes to the lower index
}

TEST_CASE("Form 1 match stays inside the owner's records") {
  std::vector<Form1Record> f{{"A", 230, 10.0, 1, 795, "ACSR"}, {"B", 230, 50.0, 2, 1272, "ACSR"}};
  geo::LinePath p{"L", {}, 230.0, std::string("B"), {}};
  CHECK(match_form1(p, 10.0, f) == 1);
  geo::LinePath other{"L", {}, 230.0, std::string("C"), {}};
  CHECK(match_form1(other, 10.0, f) == 0);
  geo::LinePath off{"L", {}, 220.0, {}, {}};
  CHECK(match_form1(off, 49.0, f) == 1);
}

TEST_CASE("initialized lines fall inside the voltage bands") {
  GridModel m;
  for (int i = 0; i < 3; ++i) {
    Bus b;
    b.id = "B" + std::to_string(i);
    m.buses.push_back(b);
  }
  auto add = [&](std::string id, double kv, double miles, std::optional<std::string> owner) {
    Branch br;
    br.id = std::move(id);
    br.from = 0;
    br.to = 1;
    br.kv_from = br.kv_to = kv;
    br.length_miles = miles;
    br.path.owner = std::move(owner);
    m.branches.push_back(br);
  };
  add("a", 230.0, 12.0, "U");
  add("b", 115.0, 40.0, {});
  add("c", 500.0, 80.0, {});
  std::vector<Form1Record> f{{"U", 230, 10.0, 1, 795, "ACSR"}, {"V", 115, 35.0, 1, 211, "ACSR"},
                             {"V", 500, 70.0, 1, 477, "ACSR"}};
  LineConfig cfg;
  auto rep = init_lines(m, shipped_catalog(), f, cfg);
  CHECK(rep.lines == 3);
  CHECK(rep.out_of_band == 0);
  for (const auto& br : m.branches) {
    auto [lo, hi] = cfg.mva_bands.at(br.kv_from);
    CHECK(br.rate_mva >= lo);
    CHECK(br.rate_mva <= hi);
    auto z = impedance_from_conductor(br.options[br.option_index], br.kv_from, br.length_miles, gmd_for(cfg, br.kv_from));
    CHECK(br.x == z.x);
  }
  CHECK(m.branches[0].options[m.branches[0].option_index].name == "Drake");
}

TEST_CASE("catalog reader rejects bad rows") {
  TempDir dir("cat");
  write_file(dir.path / "bad.csv", "kv,name,kcmil,ampacity_a,r_per_mile,gmr_ft\n230,X,795,-1,0.1,0.03\n");
  CHECK_THROWS_AS(read_conductor_catalog(dir.path / "bad.csv"), ValidationError);
}

TEST_CASE("transformers start at 2000 MVA with a base-changed reactance") {
  auto tables = shipped_tables();
  GridModel m;
  Branch tx;
  tx.id = "T:S:230/115";
  tx.kind = BranchKind::kTransformer;
  tx.kv_from = 230.0;
  tx.kv_to = 115.0;
  m.branches.push_back(tx);
  init_transformers(m, tables);
  const auto& t = m.branches[0];
  CHECK(t.rate_mva == 2000.0);
  CHECK(std::abs(t.x - transformer_x_own(tables, 230, 115, 2000) * 100.0 / 2000.0) <= 1e-15);
  CHECK(t.r == t.x / t.xr_ratio);
  CHECK(t.b == 0.0);
}

TEST_CASE("transformer tables interpolate and fall back to the nearest pair") {
  TransformerTables t;
  t.impedance = {{230, 115, 100, 0.08}, {230, 115, 500, 0.12}};
  t.xr = {{100, 30}, {500, 50}};
  CHECK(transformer_x_own(t, 230, 115, 300) == doctest::Approx(0.10));
  CHECK(transformer_x_own(t, 230, 115, 50) == 0.08);
  CHECK(transformer_x_own(t, 230, 115, 900) == 0.12);
  CHECK(transformer_x_own(t, 230, 138, 300) == doctest::Approx(0.10));
  CHECK(transformer_xr(t, 300) == doctest::Approx(40.0));
}

TEST_CASE("resizing rounds up on the size ladder") {
  auto ladder = default_size_ladder();
  CHECK(ladder.front() == 100.0);
  CHECK(ladder.back() == 2000.0);
  CHECK(ladder.size() == 20);
  CHECK(ladder_size(ladder, 120.0) == 200.0);
  CHECK(ladder_size(ladder, 200.0) == 200.0);
  CHECK(ladder_size(ladder, 0.0) == 100.0);
  CHECK(ladder_size(ladder, 2500.0) == 2000.0);

  auto tables = shipped_tables();
  GridModel m;
  Branch tx;
  tx.kind = BranchKind::kTransformer;
  tx.kv_from = 500.0;
  tx.kv_to = 230.0;
  m.branches = {tx, tx};
  init_transformers(m, tables);
  std::vector<double> flows{-120.0, 2600.0};
  CHECK(resize_transformers(m, flows, tables, ladder) == 1);
  CHECK(m.branches[0].rate_mva == 200.0);
  CHECK(m.branches[1].rate_mva == 2000.0);
  CHECK(std::abs(m.branches[0].x - transformer_x_own(tables, 500, 230, 200) * 100.0 / 200.0) <= 1e-9);
}
