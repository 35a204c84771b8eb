#include "gridsynth/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <queue>
#include <set>
#include <sstream>

#include "gridsynth/error.hpp"
#include "gridsynth/union_find.hpp"

namespace gridsynth::topology {

namespace {

constexpr double kMetersPerDegreeLat = 111'195.0;

// Nearest bus to p within radius (ties to lowest index), or -1.
int nearest_bus(const std::vector<Bus>& buses, const geo::GeoPoint& p, double radius_m,
                const std::vector<bool>* allowed = nullptr) {
  int best = -1;
  double best_d = radius_m;
  double lat_window = radius_m / kMetersPerDegreeLat * 1.01;
  for (int i = 0; i < static_cast<int>(buses.size()); ++i) {
    if (allowed && !(*allowed)[i]) continue;
    if (std::abs(buses[i].location.lat - p.lat) > lat_window) continue;
    double d = geo::geo_distance(buses[i].location, p);
    if (d < best_d || (best < 0 && d <= best_d)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

int nearest_bus_any(const std::vector<Bus>& buses, const geo::GeoPoint& p,
                    const std::vector<bool>* allowed = nullptr) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(buses.size()); ++i) {
    if (allowed && !(*allowed)[i]) continue;
    double d = geo::geo_distance(buses[i].location, p);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

const geo::GeoPoint& endpoint(const geo::LinePath& line, int end) {
  return end == 0 ? line.front() : line.back();
}

}  // namespace

std::string_view to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::kDistanceDiscrepancy: return "distance_discrepancy";
    case DefectKind::kSameNodeBothEnds: return "same_node_both_ends";
    case DefectKind::kMicroSegment: return "micro_segment";
  }
  return "distance_discrepancy";
}

int TopologyState::find_bus(const std::string& id) const {
  for (int i = 0; i < static_cast<int>(buses.size()); ++i) {
    if (buses[i].id == id) return i;
  }
  return -1;
}

int TopologyState::find_line(const std::string& id) const {
  for (int i = 0; i < static_cast<int>(lines.size()); ++i) {
    if (lines[i].id == id) return i;
  }
  return -1;
}

TopologyState make_state(std::vector<geo::LinePath> lines,
                         const std::vector<geo::SubstationRecord>& substations) {
  TopologyState state;
  for (const auto& s : substations) {
    Bus b;
    b.id = s.id;
    b.kind = BusKind::kSubstation;
    b.location = s.location;
    b.origin = s.id;
    state.buses.push_back(std::move(b));
  }
  state.lines = std::move(lines);
  state.endpoint_bus.assign(state.lines.size(), {-1, -1});
  return state;
}

int connect_endpoints(TopologyState& state, double radius_m) {
  if (!(radius_m > 0.0)) throw ValidationError("connect_endpoints: radius must be > 0");
  int created = 0;
  for (std::size_t l = 0; l < state.lines.size(); ++l) {
    for (int end = 0; end < 2; ++end) {
      if (state.endpoint_bus[l][end] >= 0) continue;
      const auto& p = endpoint(state.lines[l], end);
      int bus = nearest_bus(state.buses, p, radius_m);
      if (bus < 0) {
        std::string id;
        do {
          id = "N" + std::to_string(++state.next_added);
        } while (state.find_bus(id) >= 0);
        Bus b;
        b.id = id;
        b.kind = BusKind::kAdded;
        b.location = p;
        state.buses.push_back(std::move(b));
        bus = static_cast<int>(state.buses.size()) - 1;
        ++created;
      }
      state.endpoint_bus[l][end] = bus;
    }
  }
  return created;
}

int segment_branching_lines(TopologyState& state, double radius_m) {
  // Buses that terminate each line, to test "another line's endpoint-bus".
  std::vector<std::set<int>> lines_at_bus(state.buses.size());
  for (std::size_t l = 0; l < state.lines.size(); ++l) {
    for (int end = 0; end < 2; ++end) {
      int b = state.endpoint_bus[l][end];
      if (b >= 0) lines_at_bus[b].insert(static_cast<int>(l));
    }
  }

  std::vector<geo::LinePath> out_lines;
  std::vector<std::array<int, 2>> out_map;
  int splits = 0;
  for (std::size_t l = 0; l < state.lines.size(); ++l) {
    const auto& line = state.lines[l];
    const auto ends = state.endpoint_bus[l];
    std::vector<bool> allowed(state.buses.size(), false);
    for (std::size_t b = 0; b < state.buses.size(); ++b) {
      const auto& ls = lines_at_bus[b];
      allowed[b] = !ls.empty() && !(ls.size() == 1 && *ls.begin() == static_cast<int>(l));
    }

    const int n = static_cast<int>(line.points.size());
    std::vector<double> cum(n, 0.0);
    for (int i = 1; i < n; ++i) cum[i] = cum[i - 1] + geo::geo_distance(line.points[i - 1], line.points[i]);

    std::vector<std::pair<int, int>> cuts;  // (vertex, bus)
    int last_vertex = 0;
    int last_bus = ends[0];
    for (int v = 1; v + 1 < n; ++v) {
      int bus = nearest_bus(state.buses, line.points[v], radius_m, &allowed);
      if (bus < 0) continue;
      double before = cum[v] - cum[last_vertex];
      double after = cum[n - 1] - cum[v];
      if (before < kMicroSegmentMeters || after < kMicroSegmentMeters) {
        double piece = std::min(before, after);
        int other = before < after ? last_bus : ends[1];
        TopologyDiagnostic d;
        d.kind = DefectKind::kMicroSegment;
        d.bus_a = state.buses[bus].id;
        d.bus_b = other >= 0 ? state.buses[other].id : std::string{};
        d.graph_miles = piece / geo::kMetersPerMile;
        d.geo_miles = d.graph_miles;
        d.ratio = 1.0;
        d.line = line.id;
        state.diagnostics.push_back(std::move(d));
        continue;
      }
      if (bus == last_bus || bus == ends[0] || bus == ends[1]) continue;
      cuts.emplace_back(v, bus);
      last_vertex = v;
      last_bus = bus;
    }

    if (cuts.empty()) {
      out_lines.push_back(line);
      out_map.push_back(ends);
      continue;
    }
    splits += static_cast<int>(cuts.size());
    int start = 0;
    int start_bus = ends[0];
    for (std::size_t k = 0; k <= cuts.size(); ++k) {
      int stop = k < cuts.size() ? cuts[k].first : n - 1;
      int stop_bus = k < cuts.size() ? cuts[k].second : ends[1];
      geo::LinePath piece = line;
      piece.id = fmt::format("{}.{}", line.id, k + 1);
      piece.points.assign(line.points.begin() + start, line.points.begin() + stop + 1);
      out_lines.push_back(std::move(piece));
      out_map.push_back({start_bus, stop_bus});
      start = stop;
      start_bus = stop_bus;
    }
  }
  state.lines = std::move(out_lines);
  state.endpoint_bus = std::move(out_map);
  return splits;
}

EditScript parse_edit_script(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("edit script: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("edit script: expected a JSON array");
  EditScript script;
  int index = 0;
  for (const auto& e : doc) {
    auto need = [&](const char* key) -> const nlohmann::json& {
      if (!e.contains(key)) throw ValidationError(fmt::format("edit {}: missing field '{}'", index, key));
      return e[key];
    };
    std::string op = need("op").get<std::string>();
    if (op == "delete_node") {
      script.push_back(DeleteNode{need("id").get<std::string>()});
    } else if (op == "merge_lines") {
      script.push_back(MergeLines{need("first").get<std::string>(), need("second").get<std::string>()});
    } else if (op == "delete_line") {
      script.push_back(DeleteLine{need("id").get<std::string>()});
    } else if (op == "extend_line") {
      script.push_back(ExtendLine{need("id").get<std::string>(),
                                  {need("lat").get<double>(), need("lon").get<double>()}});
    } else if (op == "move_endpoint") {
      std::string end = need("end").get<std::string>();
      if (end != "front" && end != "back") {
        throw ValidationError(fmt::format("edit {}: 'end' must be front or back", index));
      }
      script.push_back(MoveEndpoint{need("id").get<std::string>(), end == "front" ? 0 : 1,
                                    need("node").get<std::string>()});
    } else {
      throw ValidationError(fmt::format("edit {}: unknown op '{}'", index, op));
    }
    ++index;
  }
  return script;
}

EditScript read_edit_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_edit_script(ss.str());
}

std::string to_json(const EditScript& script) {
  auto doc = nlohmann::ordered_json::array();
  for (const auto& edit : script) {
    nlohmann::ordered_json e;
    std::visit(
        [&](const auto& ed) {
          using T = std::decay_t<decltype(ed)>;
          if constexpr (std::is_same_v<T, DeleteNode>) {
            e["op"] = "delete_node";
            e["id"] = ed.id;
          } else if constexpr (std::is_same_v<T, MergeLines>) {
            e["op"] = "merge_lines";
            e["first"] = ed.first;
            e["second"] = ed.second;
          } else if constexpr (std::is_same_v<T, DeleteLine>) {
            e["op"] = "delete_line";
            e["id"] = ed.id;
          } else if constexpr (std::is_same_v<T, ExtendLine>) {
            e["op"] = "extend_line";
            e["id"] = ed.id;
            e["lat"] = ed.point.lat;
            e["lon"] = ed.point.lon;
          } else {
            e["op"] = "move_endpoint";
            e["id"] = ed.id;
            e["end"] = ed.end == 0 ? "front" : "back";
            e["node"] = ed.node;
          }
        },
        edit);
    doc.push_back(std::move(e));
  }
  return doc.dump(1);
}

namespace {

void remove_line(TopologyState& state, int l) {
  state.lines.erase(state.lines.begin() + l);
  state.endpoint_bus.erase(state.endpoint_bus.begin() + l);
}

int require_line(const TopologyState& state, const std::string& id, int index) {
  int l = state.find_line(id);
  if (l < 0) throw ValidationError(fmt::format("edit {}: unknown line '{}'", index, id));
  return l;
}

int require_bus(const TopologyState& state, const std::string& id, int index) {
  int b = state.find_bus(id);
  if (b < 0) throw ValidationError(fmt::format("edit {}: unknown node '{}'", index, id));
  return b;
}

bool same_end(const TopologyState& s, int la, int ea, int lb, int eb) {
  int ba = s.endpoint_bus[la][ea];
  int bb = s.endpoint_bus[lb][eb];
  if (ba >= 0 && ba == bb) return true;
  return geo::geo_distance(endpoint(s.lines[la], ea), endpoint(s.lines[lb], eb)) < 1e-6;
}

}  // namespace

void apply_edits(TopologyState& state, const EditScript& script) {
  for (int index = 0; index < static_cast<int>(script.size()); ++index) {
    const Edit& edit = script[index];
    if (const auto* e = std::get_if<DeleteNode>(&edit)) {
      int bus = require_bus(state, e->id, index);
      std::vector<bool> allowed(state.buses.size(), true);
      allowed[bus] = false;
      for (std::size_t l = 0; l < state.lines.size(); ++l) {
        for (int end = 0; end < 2; ++end) {
          if (state.endpoint_bus[l][end] != bus) continue;
          state.endpoint_bus[l][end] = nearest_bus_any(state.buses, endpoint(state.lines[l], end), &allowed);
        }
      }
      state.buses.erase(state.buses.begin() + bus);
      for (auto& m : state.endpoint_bus) {
        for (int& b : m) {
          if (b > bus) --b;
        }
      }
    } else if (const auto* e = std::get_if<MergeLines>(&edit)) {
      int la = require_line(state, e->first, index);
      int lb = require_line(state, e->second, index);
      if (la == lb) throw ValidationError(fmt::format("edit {}: cannot merge a line with itself", index));
      auto& a = state.lines[la];
      auto b = state.lines[lb];
      auto map_a = state.endpoint_bus[la];
      auto map_b = state.endpoint_bus[lb];
      if (a.voltage_kv != b.voltage_kv) {
        throw ValidationError(fmt::format("edit {}: lines '{}' and '{}' differ in voltage", index, a.id, b.id));
      }
      // Orient so that a.back meets b.front.
      if (same_end(state, la, 1, lb, 0)) {
      } else if (same_end(state, la, 1, lb, 1)) {
        std::reverse(b.points.begin(), b.points.end());
        std::swap(map_b[0], map_b[1]);
      } else if (same_end(state, la, 0, lb, 1)) {
        std::reverse(a.points.begin(), a.points.end());
        std::reverse(b.points.begin(), b.points.end());
        std::swap(map_a[0], map_a[1]);
        std::swap(map_b[0], map_b[1]);
      } else if (same_end(state, la, 0, lb, 0)) {
        std::reverse(a.points.begin(), a.points.end());
        std::swap(map_a[0], map_a[1]);
      } else {
        throw ValidationError(fmt::format("edit {}: lines '{}' and '{}' share no endpoint", index, a.id, b.id));
      }
      auto start = b.points.begin();
      if (a.points.back() == b.points.front()) ++start;
      a.points.insert(a.points.end(), start, b.points.end());
      geo::normalize_path(a);
      state.endpoint_bus[la] = {map_a[0], map_b[1]};
      remove_line(state, lb);
    } else if (const auto* e = std::get_if<DeleteLine>(&edit)) {
      remove_line(state, require_line(state, e->id, index));
    } else if (const auto* e = std::get_if<ExtendLine>(&edit)) {
      int l = require_line(state, e->id, index);
      if (!geo::is_valid(e->point)) throw ValidationError(fmt::format("edit {}: invalid coordinate", index));
      state.lines[l].points.push_back(e->point);
      geo::normalize_path(state.lines[l]);
      state.endpoint_bus[l][1] = -1;
    } else if (const auto* e = std::get_if<MoveEndpoint>(&edit)) {
      int l = require_line(state, e->id, index);
      int bus = require_bus(state, e->node, index);
      state.endpoint_bus[l][e->end] = bus;
    }
  }
}

GridModel build_model(const TopologyState& state) {
  GridModel model;
  model.buses = state.buses;
  for (std::size_t l = 0; l < state.lines.size(); ++l) {
    const auto& line = state.lines[l];
    auto ends = state.endpoint_bus[l];
    if (ends[0] < 0 || ends[1] < 0) {
      throw ValidationError("build_model: line '" + line.id + "' has an unmapped endpoint");
    }
    Branch br;
    br.id = line.id;
    br.from = ends[0];
    br.to = ends[1];
    br.kind = BranchKind::kLine;
    br.path = line;
    br.kv_from = br.kv_to = line.voltage_kv;
    br.length_miles = geo::path_length(line);
    model.branches.push_back(std::move(br));
  }
  return model;
}

std::vector<std::string> drop_self_loops(GridModel& model) {
  std::vector<std::string> dropped;
  std::erase_if(model.branches, [&](const Branch& b) {
    if (b.from != b.to) return false;
    dropped.push_back(b.id);
    return true;
  });
  return dropped;
}

void attach_generators(GridModel& model, const std::vector<geo::GeneratorRecord>& records) {
  std::vector<bool> has_line(model.buses.size(), false);
  for (const auto& br : model.branches) {
    if (br.is_line() && br.from != br.to) has_line[br.from] = has_line[br.to] = true;
  }
  for (const auto& rec : records) {
    Generator g;
    g.id = rec.id;
    g.bus = nearest_bus_any(model.buses, rec.location, &has_line);
    if (g.bus < 0) throw ValidationError("attach_generators: model has no connected bus");
    g.fuel = rec.fuel;
    g.pmax_mw = rec.pmax_mw;
    g.pmin_mw = rec.pmin_mw;
    g.power_factor = rec.power_factor;
    g.is_renewable = geo::is_renewable(rec.fuel);
    g.scalable_cap = geo::is_scalable(rec.fuel);
    g.plant_code = rec.plant_code;
    g.unit_id = rec.unit_id;
    model.generators.push_back(std::move(g));
  }
}

VoltageSplitReport split_voltage_levels(GridModel& model) {
  VoltageSplitReport report;
  const int nbus = model.num_buses();
  std::vector<std::set<double, std::greater<>>> levels(nbus);
  for (const auto& br : model.branches) {
    if (!br.is_line()) continue;
    levels[br.from].insert(br.kv_from);
    levels[br.to].insert(br.kv_to);
  }
  // bus_at[b][kv] -> bus index carrying that voltage.
  std::vector<std::map<double, int>> bus_at(nbus);
  for (int b = 0; b < nbus; ++b) {
    if (levels[b].empty()) continue;
    auto it = levels[b].begin();
    model.buses[b].voltage_kv = *it;
    bus_at[b][*it] = b;
    if (levels[b].size() == 1) continue;
    ++report.buses_split;
    int upper = b;
    double upper_kv = *it;
    for (++it; it != levels[b].end(); ++it) {
      Bus nb;
      nb.id = fmt::format("{}@{:g}", model.buses[b].id, *it);
      nb.voltage_kv = *it;
      nb.kind = BusKind::kVoltageSplit;
      nb.location = model.buses[b].location;
      nb.parent = model.buses[b].id;
      model.buses.push_back(std::move(nb));
      int idx = model.num_buses() - 1;
      bus_at[b][*it] = idx;
      ++report.buses_added;

      Branch t;
      t.id = fmt::format("T:{}:{:g}/{:g}", model.buses[b].id, upper_kv, *it);
      t.from = upper;
      t.to = idx;
      t.kind = BranchKind::kTransformer;
      t.kv_from = upper_kv;
      t.kv_to = *it;
      model.branches.push_back(std::move(t));
      ++report.transformers_added;
      upper = idx;
      upper_kv = *it;
    }
  }
  for (auto& br : model.branches) {
    if (!br.is_line()) continue;
    br.from = bus_at[br.from].at(br.kv_from);
    br.to = bus_at[br.to].at(br.kv_to);
  }
  return report;
}

double RetentionReport::bus_fraction() const { return buses_before ? double(buses_after) / buses_before : 1.0; }
double RetentionReport::branch_fraction() const {
  return branches_before ? double(branches_after) / branches_before : 1.0;
}
double RetentionReport::generator_fraction() const {
  return generators_before ? double(generators_after) / generators_before : 1.0;
}
double RetentionReport::load_fraction() const { return loads_before ? double(loads_after) / loads_before : 1.0; }

std::vector<int> component_labels(const GridModel& model) {
  UnionFind uf(model.num_buses());
  for (const auto& br : model.branches) uf.unite(br.from, br.to);
  std::vector<int> label(model.num_buses(), -1);
  std::map<int, int> root_label;
  for (int b = 0; b < model.num_buses(); ++b) {
    int r = uf.find(b);
    auto [it, inserted] = root_label.emplace(r, static_cast<int>(root_label.size()));
    label[b] = it->second;
  }
  return label;
}

RetentionReport largest_component(GridModel& model) {
  if (model.buses.empty()) throw ValidationError("largest_component: empty graph");
  RetentionReport rep;
  auto count_loads = [&] {
    return static_cast<int>(std::count_if(model.load_bus.begin(), model.load_bus.end(), [](int b) { return b >= 0; }));
  };
  rep.buses_before = model.num_buses();
  rep.branches_before = model.num_branches();
  rep.generators_before = static_cast<int>(model.generators.size());
  rep.loads_before = count_loads();

  auto label = component_labels(model);
  int ncomp = *std::max_element(label.begin(), label.end()) + 1;
  std::vector<int> size(ncomp, 0);
  for (int l : label) ++size[l];
  // Labels are assigned in bus order, so the first maximum holds the lowest bus.
  int keep = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
  std::vector<bool> mask(model.num_buses());
  for (int b = 0; b < model.num_buses(); ++b) mask[b] = label[b] == keep;
  retain_buses(model, mask);

  rep.buses_after = model.num_buses();
  rep.branches_after = model.num_branches();
  rep.generators_after = static_cast<int>(model.generators.size());
  rep.loads_after = count_loads();
  return rep;
}

std::vector<TopologyDiagnostic> diagnose(const GridModel& model, const DiagnoseOptions& options) {
  std::vector<TopologyDiagnostic> out;
  for (const auto& br : model.branches) {
    if (br.is_line() && br.from == br.to) {
      TopologyDiagnostic d;
      d.kind = DefectKind::kSameNodeBothEnds;
      d.bus_a = d.bus_b = model.buses[br.from].id;
      d.graph_miles = br.length_miles;
      d.geo_miles = 0.0;
      d.ratio = std::numeric_limits<double>::infinity();
      d.line = br.id;
      out.push_back(std::move(d));
    }
  }

  const int n = model.num_buses();
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& br : model.branches) {
    if (br.from == br.to) continue;
    double w = br.is_line() ? br.length_miles : 0.0;
    adj[br.from].emplace_back(br.to, w);
    adj[br.to].emplace_back(br.from, w);
  }

  double lat_window = options.radius_m / kMetersPerDegreeLat * 1.01;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<int, double>> near;
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(model.buses[i].location.lat - model.buses[j].location.lat) > lat_window) continue;
      double d = geo::geo_distance(model.buses[i].location, model.buses[j].location);
      if (d <= options.radius_m) near.emplace_back(j, d);
    }
    if (near.empty()) continue;

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[i] = 0.0;
    pq.emplace(0.0, i);
    while (!pq.empty()) {
      auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      for (auto [v, w] : adj[u]) {
        if (d + w < dist[v]) {
          dist[v] = d + w;
          pq.emplace(dist[v], v);
        }
      }
    }

    for (auto [j, geo_m] : near) {
      double graph = dist[j];
      double geo_mi = geo_m / geo::kMetersPerMile;
      if (graph == 0.0) continue;
      double ratio = geo_mi > 0.0 ? graph / geo_mi : std::numeric_limits<double>::infinity();
      if (std::isfinite(graph) && ratio <= options.ratio_threshold) continue;
      TopologyDiagnostic d;
      d.kind = DefectKind::kDistanceDiscrepancy;
      d.bus_a = model.buses[i].id;
      d.bus_b = model.buses[j].id;
      d.graph_miles = graph;
      d.geo_miles = geo_mi;
      d.ratio = ratio;
      out.push_back(std::move(d));
    }
  }
  return out;
}

std::string diagnostics_csv(const std::vector<TopologyDiagnostic>& diags) {
  std::string out = "kind,bus_a,bus_b,graph_mi,geo_mi,ratio\n";
  for (const auto& d : diags) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{}\n", to_string(d.kind), d.bus_a, d.bus_b, d.graph_miles,
                       d.geo_miles, std::isfinite(d.ratio) ? fmt::format("{:.6f}", d.ratio) : "inf");
  }
  return out;
}

}  // namespace gridsynth::topology
