#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridsynth::geo {

inline constexpr double kEarthRadiusMeters = 6'371'000.0;
inline constexpr double kMetersPerMile = 1609.344;

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p);

/// Great-circle (haversine) distance in meters.
double geo_distance(const GeoPoint& a, const GeoPoint& b);

/// Point on the great circle through a and b at fraction f of the arc.
GeoPoint interpolate(const GeoPoint& a, const GeoPoint& b, double f);

struct LinePath {
  std::string id;
  std::vector<GeoPoint> points;
  double voltage_kv = 0.0;
  std::optional<std::string> owner;
  std::optional<std::string> name;

  const GeoPoint& front() const { return points.front(); }
  const GeoPoint& back() const { return points.back(); }

  friend bool operator==(const LinePath&, const LinePath&) = default;
};

/// Sum of segment great-circle lengths, in miles.
double path_length(const LinePath& path);
double path_length_meters(std::span<const GeoPoint> points);

/// Removes consecutive duplicate points. Throws ValidationError if fewer than
/// two distinct points remain.
void normalize_path(LinePath& path);

struct SubstationRecord {
  std::string id;
  GeoPoint location;
  std::optional<std::string> name;

  friend bool operator==(const SubstationRecord&, const SubstationRecord&) = default;
};

enum class FuelType {
  kSolar,
  kWind,
  kGasCombinedCycle,
  kGasCombustionTurbine,
  kGasSteamTurbine,
  kOtherNaturalGas,
  kNuclear,
  kHydro,
  kGeothermal,
  kBiomass,
  kLandfillGas,
  kMunicipalSolidWaste,
  kImport,
  kOther,
};

std::string_view to_string(FuelType fuel);
std::optional<FuelType> parse_fuel(std::string_view token);
/// Solar, wind, hydro and geothermal carry zero marginal cost.
bool is_renewable(FuelType fuel);
/// Solar and wind capacities follow the system-wide hourly totals.
bool is_scalable(FuelType fuel);

struct GeneratorRecord {
  std::string id;
  GeoPoint location;
  FuelType fuel = FuelType::kOther;
  double pmax_mw = 0.0;
  double pmin_mw = 0.0;
  double power_factor = 1.0;
  std::optional<std::string> plant_code;
  std::optional<std::string> unit_id;

  friend bool operator==(const GeneratorRecord&, const GeneratorRecord&) = default;
};

struct LoadRecord {
  std::string tract_id;
  GeoPoint location;
  std::vector<double> profile;  // hourly MW

  friend bool operator==(const LoadRecord&, const LoadRecord&) = default;
};

struct Dataset {
  std::vector<LinePath> lines;
  std::vector<SubstationRecord> substations;
  std::vector<GeneratorRecord> generators;
  std::vector<LoadRecord> loads;

  int hours() const { return loads.empty() ? 0 : static_cast<int>(loads.front().profile.size()); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetPaths {
  std::filesystem::path lines;        // GeoJSON FeatureCollection
  std::filesystem::path substations;  // id,lat,lon,name
  std::filesystem::path generators;   // id,lat,lon,fuel,pmax_mw,pmin_mw,pf,plant_code,unit_id
  std::filesystem::path loads;        // tract_id,lat,lon,h0,...
};

std::vector<LinePath> read_lines_geojson(const std::filesystem::path& path);
std::vector<LinePath> parse_lines_geojson(std::string_view text, const std::string& source);
std::vector<SubstationRecord> read_substations(const std::filesystem::path& path);
std::vector<GeneratorRecord> read_generators(const std::filesystem::path& path);
std::vector<LoadRecord> read_loads(const std::filesystem::path& path);

/// Reads and validates all four sources. Throws ValidationError naming the
/// file, record and field on any schema or invariant violation.
Dataset load_dataset(const DatasetPaths& paths);

void write_lines_geojson(const std::filesystem::path& path, const std::vector<LinePath>& lines);
void write_substations(const std::filesystem::path& path, const std::vector<SubstationRecord>& subs);
void write_generators(const std::filesystem::path& path, const std::vector<GeneratorRecord>& gens);
void write_loads(const std::filesystem::path& path, const std::vector<LoadRecord>& loads);
void write_dataset(const DatasetPaths& paths, const Dataset& data);

}  // namespace gridsynth::geo
