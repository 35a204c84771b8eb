#include "gridsynth/geodata.hpp"

#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "gridsynth/csv.hpp"
#include "gridsynth/error.hpp"

namespace gridsynth::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

std::optional<std::string> optional_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::string record_ctx(const csv::Table& t, const csv::Row& r, const std::string& id) {
  return fmt::format("{}:{}: record '{}'", t.source, r.line, id);
}

GeoPoint read_point(const csv::Table& t, const csv::Row& r, const std::string& id) {
  GeoPoint p{csv::to_double(t, r, t.column("lat"), "lat"), csv::to_double(t, r, t.column("lon"), "lon")};
  if (!is_valid(p)) {
    throw ValidationError(fmt::format("{}: coordinate out of range (lat={}, lon={})",
                                      record_ctx(t, r, id), p.lat, p.lon));
  }
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  out << text;
}

}  // namespace

bool is_valid(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

double geo_distance(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = a.lat * kDegToRad;
  double phi2 = b.lat * kDegToRad;
  double dphi = (b.lat - a.lat) * kDegToRad;
  double dlambda = (b.lon - a.lon) * kDegToRad;
  double s1 = std::sin(dphi / 2.0);
  double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, h);
  return 2.0 * kEarthRadiusMeters * std::asin(std::sqrt(h));
}

GeoPoint interpolate(const GeoPoint& a, const GeoPoint& b, double f) {
  double phi1 = a.lat * kDegToRad, lam1 = a.lon * kDegToRad;
  double phi2 = b.lat * kDegToRad, lam2 = b.lon * kDegToRad;
  double delta = geo_distance(a, b) / kEarthRadiusMeters;
  if (delta == 0.0) return a;
  double sa = std::sin((1.0 - f) * delta) / std::sin(delta);
  double sb = std::sin(f * delta) / std::sin(delta);
  double x = sa * std::cos(phi1) * std::cos(lam1) + sb * std::cos(phi2) * std::cos(lam2);
  double y = sa * std::cos(phi1) * std::sin(lam1) + sb * std::cos(phi2) * std::sin(lam2);
  double z = sa * std::sin(phi1) + sb * std::sin(phi2);
  return {std::atan2(z, std::hypot(x, y)) / kDegToRad, std::atan2(y, x) / kDegToRad};
}

double path_length_meters(std::span<const GeoPoint> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += geo_distance(points[i - 1], points[i]);
  return total;
}

double path_length(const LinePath& path) { return path_length_meters(path.points) / kMetersPerMile; }

void normalize_path(LinePath& path) {
  std::vector<GeoPoint> pts;
  pts.reserve(path.points.size());
  for (const auto& p : path.points) {
    if (pts.empty() || !(pts.back() == p)) pts.push_back(p);
  }
  if (pts.size() < 2) {
    throw ValidationError("line '" + path.id + "': path needs at least two distinct points");
  }
  path.points = std::move(pts);
}

std::string_view to_string(FuelType fuel) {
  switch (fuel) {
    case FuelType::kSolar: return "solar";
    case FuelType::kWind: return "wind";
    case FuelType::kGasCombinedCycle: return "ng_cc";
    case FuelType::kGasCombustionTurbine: return "ng_ct";
    case FuelType::kGasSteamTurbine: return "ng_st";
    case FuelType::kOtherNaturalGas: return "ng_other";
    case FuelType::kNuclear: return "nuclear";
    case FuelType::kHydro: return "hydro";
    case FuelType::kGeothermal: return "geothermal";
    case FuelType::kBiomass: return "biomass";
    case FuelType::kLandfillGas: return "landfill_gas";
    case FuelType::kMunicipalSolidWaste: return "msw";
    case FuelType::kImport: return "import";
    case FuelType::kOther: return "other";
  }
  return "other";
}

std::optional<FuelType> parse_fuel(std::string_view token) {
  static constexpr FuelType kAll[] = {
      FuelType::kSolar,          FuelType::kWind,        FuelType::kGasCombinedCycle,
      FuelType::kGasCombustionTurbine, FuelType::kGasSteamTurbine, FuelType::kOtherNaturalGas,
      FuelType::kNuclear,        FuelType::kHydro,       FuelType::kGeothermal,
      FuelType::kBiomass,        FuelType::kLandfillGas, FuelType::kMunicipalSolidWaste,
      FuelType::kImport,         FuelType::kOther};
  for (FuelType f : kAll) {
    if (to_string(f) == token) return f;
  }
  return std::nullopt;
}

bool is_renewable(FuelType fuel) {
  return fuel == FuelType::kSolar || fuel == FuelType::kWind || fuel == FuelType::kHydro ||
         fuel == FuelType::kGeothermal;
}

bool is_scalable(FuelType fuel) { return fuel == FuelType::kSolar || fuel == FuelType::kWind; }

std::vector<LinePath> parse_lines_geojson(std::string_view text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(source + ": invalid JSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw ValidationError(source + ": expected a GeoJSON FeatureCollection");
  }
  std::vector<LinePath> lines;
  std::set<std::string> seen;
  int index = 0;
  for (const auto& feat : doc["features"]) {
    std::string where = fmt::format("{}: feature {}", source, index++);
    const auto& props = feat.value("properties", nlohmann::json::object());
    const auto& geom = feat.value("geometry", nlohmann::json::object());
    if (!props.contains("id")) throw ValidationError(where + ": missing property 'id'");
    LinePath line;
    line.id = props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
    where += " '" + line.id + "'";
    if (geom.value("type", "") != "LineString") {
      throw ValidationError(where + ": geometry must be a LineString");
    }
    if (!props.contains("kv") || !props["kv"].is_number()) {
      throw ValidationError(where + ": property 'kv' missing or not numeric");
    }
    line.voltage_kv = props["kv"].get<double>();
    if (!(line.voltage_kv > 0.0)) throw ValidationError(where + ": property 'kv' must be > 0");
    if (props.contains("owner") && props["owner"].is_string()) line.owner = props["owner"].get<std::string>();
    if (props.contains("name") && props["name"].is_string()) line.name = props["name"].get<std::string>();
    for (const auto& c : geom.value("coordinates", nlohmann::json::array())) {
      if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
        throw ValidationError(where + ": malformed coordinate");
      }
      GeoPoint p{c[1].get<double>(), c[0].get<double>()};
      if (!is_valid(p)) {
        throw ValidationError(fmt::format("{}: coordinate out of range (lat={}, lon={})", where, p.lat, p.lon));
      }
      line.points.push_back(p);
    }
    try {
      normalize_path(line);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (!seen.insert(line.id).second) throw ValidationError(where + ": duplicate line id");
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<LinePath> read_lines_geojson(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_lines_geojson(ss.str(), path.string());
}

std::vector<SubstationRecord> read_substations(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_id = t.column("id"), c_name = t.column("name");
  t.column("lat");
  t.column("lon");
  std::vector<SubstationRecord> out;
  std::set<std::string> seen;
  for (const auto& r : t.rows) {
    SubstationRecord s;
    s.id = r.fields[c_id];
    if (s.id.empty()) throw ValidationError(fmt::format("{}:{}: field 'id' is empty", t.source, r.line));
    s.location = read_point(t, r, s.id);
    s.name = optional_field(r.fields[c_name]);
    if (!seen.insert(s.id).second) {
      throw ValidationError(record_ctx(t, r, s.id) + ": duplicate substation id");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<GeneratorRecord> read_generators(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_id = t.column("id"), c_fuel = t.column("fuel"), c_pmax = t.column("pmax_mw"),
      c_pmin = t.column("pmin_mw"), c_pf = t.column("pf"), c_plant = t.column("plant_code"),
      c_unit = t.column("unit_id");
  t.column("lat");
  t.column("lon");
  std::vector<GeneratorRecord> out;
  std::set<std::string> seen;
  for (const auto& r : t.rows) {
    GeneratorRecord g;
    g.id = r.fields[c_id];
    if (g.id.empty()) throw ValidationError(fmt::format("{}:{}: field 'id' is empty", t.source, r.line));
    g.location = read_point(t, r, g.id);
    auto fuel = parse_fuel(r.fields[c_fuel]);
    if (!fuel) {
      throw ValidationError(record_ctx(t, r, g.id) + ": field 'fuel' has unknown value '" +
                            r.fields[c_fuel] + "'");
    }
    g.fuel = *fuel;
    g.pmax_mw = csv::to_double(t, r, c_pmax, "pmax_mw");
    g.pmin_mw = csv::to_double(t, r, c_pmin, "pmin_mw");
    g.power_factor = csv::to_double(t, r, c_pf, "pf");
    if (!(g.pmax_mw > 0.0)) throw ValidationError(record_ctx(t, r, g.id) + ": field 'pmax_mw' must be > 0");
    if (!(g.pmin_mw >= 0.0) || g.pmin_mw > g.pmax_mw) {
      throw ValidationError(record_ctx(t, r, g.id) + ": field 'pmin_mw' must satisfy 0 <= pmin <= pmax");
    }
    if (!(g.power_factor > 0.0 && g.power_factor <= 1.0)) {
      throw ValidationError(record_ctx(t, r, g.id) + ": field 'pf' must lie in (0, 1]");
    }
    g.plant_code = optional_field(r.fields[c_plant]);
    g.unit_id = optional_field(r.fields[c_unit]);
    if (!seen.insert(g.id).second) throw ValidationError(record_ctx(t, r, g.id) + ": duplicate generator id");
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<LoadRecord> read_loads(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_id = t.column("tract_id");
  t.column("lat");
  t.column("lon");
  std::vector<int> hour_cols;
  for (int h = 0;; ++h) {
    int c = t.find_column("h" + std::to_string(h));
    if (c < 0) break;
    hour_cols.push_back(c);
  }
  if (hour_cols.empty()) throw ValidationError(t.source + ": no hourly columns h0..h{H-1}");
  std::vector<LoadRecord> out;
  std::set<std::string> seen;
  for (const auto& r : t.rows) {
    LoadRecord l;
    l.tract_id = r.fields[c_id];
    if (l.tract_id.empty()) {
      throw ValidationError(fmt::format("{}:{}: field 'tract_id' is empty", t.source, r.line));
    }
    l.location = read_point(t, r, l.tract_id);
    l.profile.reserve(hour_cols.size());
    for (std::size_t h = 0; h < hour_cols.size(); ++h) {
      std::string field = "h" + std::to_string(h);
      double v = csv::to_double(t, r, hour_cols[h], field);
      if (!(v >= 0.0)) throw ValidationError(record_ctx(t, r, l.tract_id) + ": field '" + field + "' is negative");
      l.profile.push_back(v);
    }
    if (!seen.insert(l.tract_id).second) throw ValidationError(record_ctx(t, r, l.tract_id) + ": duplicate tract id");
    out.push_back(std::move(l));
  }
  return out;
}

Dataset load_dataset(const DatasetPaths& paths) {
  Dataset d;
  d.lines = read_lines_geojson(paths.lines);
  d.substations = read_substations(paths.substations);
  d.generators = read_generators(paths.generators);
  d.loads = read_loads(paths.loads);
  return d;
}

void write_lines_geojson(const std::filesystem::path& path, const std::vector<LinePath>& lines) {
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = nlohmann::ordered_json::array();
  for (const auto& l : lines) {
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["properties"]["id"] = l.id;
    f["properties"]["kv"] = l.voltage_kv;
    if (l.owner) f["properties"]["owner"] = *l.owner;
    if (l.name) f["properties"]["name"] = *l.name;
    f["geometry"]["type"] = "LineString";
    auto coords = nlohmann::ordered_json::array();
    for (const auto& p : l.points) coords.push_back({p.lon, p.lat});
    f["geometry"]["coordinates"] = std::move(coords);
    doc["features"].push_back(std::move(f));
  }
  write_text(path, doc.dump(1) + "\n");
}

void write_substations(const std::filesystem::path& path, const std::vector<SubstationRecord>& subs) {
  std::string out = "id,lat,lon,name\n";
  for (const auto& s : subs) {
    out += fmt::format("{},{},{},{}\n", csv::escape(s.id), fmt_double(s.location.lat),
                       fmt_double(s.location.lon), csv::escape(s.name.value_or("")));
  }
  write_text(path, out);
}

void write_generators(const std::filesystem::path& path, const std::vector<GeneratorRecord>& gens) {
  std::string out = "id,lat,lon,fuel,pmax_mw,pmin_mw,pf,plant_code,unit_id\n";
  for (const auto& g : gens) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv::escape(g.id), fmt_double(g.location.lat),
                       fmt_double(g.location.lon), to_string(g.fuel), fmt_double(g.pmax_mw),
                       fmt_double(g.pmin_mw), fmt_double(g.power_factor),
                       csv::escape(g.plant_code.value_or("")), csv::escape(g.unit_id.value_or("")));
  }
  write_text(path, out);
}

void write_loads(const std::filesystem::path& path, const std::vector<LoadRecord>& loads) {
  std::size_t hours = loads.empty() ? 0 : loads.front().profile.size();
  std::string out = "tract_id,lat,lon";
  for (std::size_t h = 0; h < hours; ++h) out += ",h" + std::to_string(h);
  out += "\n";
  for (const auto& l : loads) {
    out += fmt::format("{},{},{}", csv::escape(l.tract_id), fmt_double(l.location.lat),
                       fmt_double(l.location.lon));
    for (double v : l.profile) out += "," + fmt_double(v);
    out += "\n";
  }
  write_text(path, out);
}

void write_dataset(const DatasetPaths& paths, const Dataset& data) {
  write_lines_geojson(paths.lines, data.lines);
  write_substations(paths.substations, data.substations);
  write_generators(paths.generators, data.generators);
  write_loads(paths.loads, data.loads);
}

}  // namespace gridsynth::geo
