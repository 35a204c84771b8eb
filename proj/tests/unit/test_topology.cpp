#include <doctest.h>

#include <cmath>
#include <numbers>
#include <queue>
#include <set>

#include "gridsynth/error.hpp"
#include "gridsynth/topology.hpp"

using namespace gridsynth;
using geo::GeoPoint;
using geo::LinePath;
using topology::TopologyState;

namespace {

constexpr GeoPoint kOrigin{36.0, -120.0};

GeoPoint offset(GeoPoint p, double north_m, double east_m) {
  const double m_per_deg = 6'371'000.0 * std::numbers::pi / 180.0;
  return {p.lat + north_m / m_per_deg, p.lon + east_m / (m_per_deg * std::cos(p.lat * std::numbers::pi / 180.0))};
}

GeoPoint at(double north_m, double east_m) { return offset(kOrigin, north_m, east_m); }

LinePath line(std::string id, std::vector<GeoPoint> pts, double kv = 230.0) {
  return LinePath{std::move(id), std::move(pts), kv, {}, {}};
}

geo::SubstationRecord sub(std::string id, GeoPoint p) { return {std::move(id), p, {}}; }

int count_kind(const TopologyState& s, BusKind kind) {
  return static_cast<int>(std::count_if(s.buses.begin(), s.buses.end(), [&](const Bus& b) { return b.kind == kind; }));
}

// Breadth-first component sizes, independent of the union-find in the library.
std::vector<int> bfs_component_sizes(const GridModel& m) {
  std::vector<std::vector<int>> adj(m.num_buses());
  for (const auto& br : m.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  std::vector<bool> seen(m.num_buses(), false);
  std::vector<int> sizes;
  for (int s = 0; s < m.num_buses(); ++s) {
    if (seen[s]) continue;
    int count = 0;
    std::queue<int> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      ++count;
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
      }
    }
    sizes.push_back(count);
  }
  return sizes;
}

}  // namespace

TEST_CASE("endpoint 5 m from a substation maps to it") {
  auto s = topology::make_state({line("L", {at(5, 0), at(0, 20'000)})}, {sub("S", kOrigin), sub("E", at(0, 20'000))});
  CHECK(topology::connect_endpoints(s) == 0);
  CHECK(s.endpoint_bus[0][0] == s.find_bus("S"));
}

TEST_CASE("endpoint 13 m from a substation creates an added bus") {
  auto s = topology::make_state({line("L", {at(13, 0), at(0, 20'000)})}, {sub("S", kOrigin), sub("E", at(0, 20'000))});
  CHECK(topology::connect_endpoints(s) == 1);
  int b = s.endpoint_bus[0][0];
  CHECK(s.buses[b].kind == BusKind::kAdded);
  CHECK(geo::geo_distance(s.buses[b].location, at(13, 0)) < 1e-9);
}

TEST_CASE("identical endpoints share one added bus") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(0, 5000), at(0, 9000)})}, {});
  topology::connect_endpoints(s);
  CHECK(s.buses.size() == 3);
  CHECK(s.endpoint_bus[0][1] == s.endpoint_bus[1][0]);
}

TEST_CASE("connect_endpoints is idempotent") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(3, 5000), at(0, 9000)})}, {});
  topology::connect_endpoints(s);
  auto before = s.buses.size();
  CHECK(topology::connect_endpoints(s) == 0);
  CHECK(s.buses.size() == before);
}

TEST_CASE("T-branch splits the main line into two") {
  auto s = topology::make_state(
      {line("M", {at(0, 0), at(0, 10'000), at(0, 20'000)}), line("T", {at(0, 10'000), at(8'000, 10'000)})},
      {sub("A", at(0, 0)), sub("B", at(0, 20'000)), sub("C", at(8'000, 10'000))});
  topology::connect_endpoints(s);
  CHECK(topology::segment_branching_lines(s) == 1);
  CHECK(s.lines.size() == 3);
  CHECK(s.buses.size() == 4);
  CHECK(s.find_line("M.1") >= 0);
  CHECK(s.find_line("M.2") >= 0);
  int mid = s.endpoint_bus[s.find_line("T")][0];
  CHECK(s.endpoint_bus[s.find_line("M.1")][1] == mid);
  CHECK(s.endpoint_bus[s.find_line("M.2")][0] == mid);
}

TEST_CASE("lines without interior proximity are unchanged") {
  auto s = topology::make_state({line("A", {at(0, 0), at(500, 5000), at(0, 10'000)}),
                                 line("B", {at(0, 10'000), at(3000, 15'000)})},
                                {});
  topology::connect_endpoints(s);
  auto lines = s.lines;
  CHECK(topology::segment_branching_lines(s) == 0);
  CHECK(s.lines == lines);
}

TEST_CASE("split point under a meter from the end emits a micro-segment diagnostic") {
  auto s = topology::make_state(
      {line("M", {at(0, 0), at(0, 5000), at(0, 9999.5), at(0, 10'000)}), line("X", {at(0, 10'000), at(4000, 10'000)})},
      {sub("A", at(0, 0)), sub("B", at(0, 10'000)), sub("C", at(4000, 10'000))});
  topology::connect_endpoints(s);
  CHECK(topology::segment_branching_lines(s) == 0);
  REQUIRE(s.diagnostics.size() == 1);
  CHECK(s.diagnostics[0].kind == topology::DefectKind::kMicroSegment);
  CHECK(s.diagnostics[0].line == "M");
  CHECK(s.lines.size() == 2);
}

TEST_CASE("two voltages at a bus become two buses and one transformer") {
  auto s = topology::make_state({line("H", {at(0, 0), at(0, 10'000)}, 230.0), line("L", {at(0, 0), at(9000, 0)}, 115.0)},
                                {sub("S", at(0, 0)), sub("E", at(0, 10'000)), sub("N", at(9000, 0))});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto rep = topology::split_voltage_levels(m);
  CHECK(rep.buses_split == 1);
  CHECK(rep.transformers_added == 1);
  CHECK(m.num_buses() == 4);
  int tx = m.find_branch("T:S:230/115");
  REQUIRE(tx >= 0);
  CHECK(m.branches[tx].kv_from == 230.0);
  CHECK(m.branches[tx].kv_to == 115.0);
  for (const auto& br : m.branches) {
    if (br.is_line()) {
      CHECK(m.buses[br.from].voltage_kv == br.kv_from);
      CHECK(m.buses[br.to].voltage_kv == br.kv_to);
    }
  }
}

TEST_CASE("single-voltage bus is untouched by the split") {
  auto s = topology::make_state({line("H", {at(0, 0), at(0, 10'000)})}, {sub("S", at(0, 0)), sub("E", at(0, 10'000))});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto rep = topology::split_voltage_levels(m);
  CHECK(rep.transformers_added == 0);
  CHECK(m.num_buses() == 2);
}

TEST_CASE("three voltages chain two transformers with the generator on the top level") {
  auto s = topology::make_state({line("H", {at(0, 0), at(0, 10'000)}, 230.0), line("M", {at(0, 0), at(9000, 0)}, 115.0),
                                 line("L", {at(0, 0), at(-9000, 0)}, 66.0)},
                                {sub("S", at(0, 0)), sub("E", at(0, 10'000)), sub("N", at(9000, 0)), sub("W", at(-9000, 0))});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  topology::attach_generators(m, {geo::GeneratorRecord{"G", at(1, 1), geo::FuelType::kGasCombinedCycle, 100, 10, 0.9, {}, {}}});
  auto rep = topology::split_voltage_levels(m);
  CHECK(rep.buses_added == 2);
  CHECK(rep.transformers_added == 2);
  CHECK(m.find_branch("T:S:230/115") >= 0);
  CHECK(m.find_branch("T:S:115/66") >= 0);
  CHECK(m.buses[m.generators[0].bus].voltage_kv == 230.0);
  for (int b = 0; b < m.num_buses(); ++b) {
    std::set<double> kv;
    for (const auto& br : m.branches) {
      if (br.is_line() && (br.from == b || br.to == b)) kv.insert(br.kv_from);
    }
    CHECK(kv.size() <= 1);
  }
}

TEST_CASE("largest component keeps the three-bus island") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(0, 5000), at(0, 10'000)}),
                                 line("C", {at(50'000, 0), at(50'000, 5000)})},
                                {});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto sizes = bfs_component_sizes(m);
  int largest = *std::max_element(sizes.begin(), sizes.end());
  auto rep = topology::largest_component(m);
  CHECK(m.num_buses() == largest);
  CHECK(m.num_buses() == 3);
  CHECK(m.num_branches() == 2);
  CHECK(rep.bus_fraction() == doctest::Approx(3.0 / 5.0));
  CHECK(bfs_component_sizes(m).size() == 1);
}

TEST_CASE("connected graph is retained in full") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(0, 5000), at(0, 10'000)})}, {});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto rep = topology::largest_component(m);
  CHECK(rep.bus_fraction() == 1.0);
  CHECK(rep.branch_fraction() == 1.0);
}

TEST_CASE("empty graph is an error") {
  GridModel m;
  CHECK_THROWS_AS(topology::largest_component(m), ValidationError);
}

TEST_CASE("nearby buses joined only by a long detour are flagged") {
  // P and Q sit 50 m apart; the only path between them runs out 10 mi and back.
  GeoPoint p = at(0, 0), q = at(0, 50), far = at(16'093, 25);
  auto s = topology::make_state({line("Out", {p, far}), line("Back", {far, q})}, {sub("P", p), sub("Q", q)});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto diags = topology::diagnose(m);
  REQUIRE(diags.size() == 1);
  CHECK(diags[0].kind == topology::DefectKind::kDistanceDiscrepancy);
  CHECK(diags[0].ratio > 10.0);
  double expected_graph = (geo::geo_distance(p, far) + geo::geo_distance(far, q)) / geo::kMetersPerMile;
  CHECK(diags[0].graph_miles == doctest::Approx(expected_graph).epsilon(1e-9));
}

TEST_CASE("line with both ends on one bus is reported then dropped") {
  auto s = topology::make_state({line("Loop", {at(0, 0), at(3000, 3000), at(5, 0)}), line("Tail", {at(0, 0), at(0, 8000)})},
                                {});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  auto diags = topology::diagnose(m);
  bool found = std::any_of(diags.begin(), diags.end(), [](const auto& d) {
    return d.kind == topology::DefectKind::kSameNodeBothEnds && d.line == "Loop";
  });
  CHECK(found);
  auto dropped = topology::drop_self_loops(m);
  CHECK(dropped == std::vector<std::string>{"Loop"});
  CHECK(m.num_branches() == 1);
}

TEST_CASE("clean radial feeder has no diagnostics") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(0, 5000), at(0, 10'000)}),
                                 line("C", {at(0, 10'000), at(4000, 14'000)})},
                                {});
  topology::connect_endpoints(s);
  auto m = topology::build_model(s);
  CHECK(topology::diagnose(m).empty());
  CHECK(topology::diagnostics_csv({}) == "kind,bus_a,bus_b,graph_mi,geo_mi,ratio\n");
}

TEST_CASE("deleting an extra node re-attaches its lines to the substation") {
  // Lines stop 20 m short of the substation, so an extra node appears there.
  auto s = topology::make_state({line("A", {at(0, -9000), at(0, -20)}), line("B", {at(0, -20), at(0, 9000)})},
                                {sub("Mid", at(0, 0)), sub("W", at(0, -9000)), sub("E", at(0, 9000))});
  topology::connect_endpoints(s);
  int extra = s.endpoint_bus[0][1];
  REQUIRE(s.buses[extra].kind == BusKind::kAdded);
  std::string extra_id = s.buses[extra].id;
  topology::apply_edits(s, {topology::DeleteNode{extra_id}});
  topology::connect_endpoints(s);
  CHECK(s.find_bus(extra_id) < 0);
  CHECK(s.endpoint_bus[0][1] == s.find_bus("Mid"));
  CHECK(s.endpoint_bus[1][0] == s.find_bus("Mid"));
}

TEST_CASE("empty edit script is the identity") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)})}, {});
  topology::connect_endpoints(s);
  auto lines = s.lines;
  auto map = s.endpoint_bus;
  topology::apply_edits(s, {});
  CHECK(s.lines == lines);
  CHECK(s.endpoint_bus == map);
}

TEST_CASE("merging collinear halves adds their lengths") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)}), line("B", {at(0, 5000), at(0, 10'000)})}, {});
  topology::connect_endpoints(s);
  double total = geo::path_length(s.lines[0]) + geo::path_length(s.lines[1]);
  topology::apply_edits(s, {topology::MergeLines{"A", "B"}});
  REQUIRE(s.lines.size() == 1);
  CHECK(geo::path_length(s.lines[0]) == doctest::Approx(total).epsilon(1e-9));
  CHECK(s.lines[0].points.size() == 3);
}

TEST_CASE("dangling edit reference names the edit index") {
  auto s = topology::make_state({line("A", {at(0, 0), at(0, 5000)})}, {});
  try {
    topology::apply_edits(s, {topology::DeleteLine{"A"}, topology::DeleteLine{"missing"}});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("edit 1") != std::string::npos);
  }
}

TEST_CASE("edit scripts round-trip through JSON") {
  topology::EditScript script{topology::DeleteNode{"N3"}, topology::MergeLines{"A", "B"}, topology::DeleteLine{"C"},
                              topology::ExtendLine{"D", {36.5, -120.5}}, topology::MoveEndpoint{"E", 1, "S1"}};
  auto again = topology::parse_edit_script(topology::to_json(script));
  CHECK(topology::to_json(again) == topology::to_json(script));
  CHECK_THROWS_AS(topology::parse_edit_script(R"([{"op":"explode"}])"), ValidationError);
}

TEST_CASE("full pass leaves distinct in-radius endpoints and one component") {
  auto s = topology::make_state(
      {line("M", {at(0, 0), at(0, 10'000), at(0, 20'000)}, 230.0), line("T", {at(4, 10'000), at(8'000, 10'000)}, 230.0),
       line("Lo", {at(0, 20'000), at(6'000, 26'000)}, 115.0), line("Far", {at(90'000, 0), at(90'000, 4000)}, 115.0)},
      {sub("A", at(0, 0)), sub("B", at(0, 20'000)), sub("C", at(8'000, 10'000))});
  topology::connect_endpoints(s);
  topology::segment_branching_lines(s);
  auto m = topology::build_model(s);
  topology::drop_self_loops(m);
  topology::split_voltage_levels(m);
  topology::largest_component(m);
  CHECK(bfs_component_sizes(m).size() == 1);
  for (const auto& br : m.branches) {
    CHECK(br.from != br.to);
    if (!br.is_line()) continue;
    CHECK(geo::geo_distance(m.buses[br.from].location, br.path.front()) <= topology::kDefaultRadiusMeters);
    CHECK(geo::geo_distance(m.buses[br.to].location, br.path.back()) <= topology::kDefaultRadiusMeters);
  }
}
