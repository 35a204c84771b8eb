#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridsynth/geodata.hpp"
#include "gridsynth/model.hpp"

namespace gridsynth::lineparams {

struct CatalogEntry {
  double kv = 0.0;
  std::string name;
  double kcmil = 0.0;
  double ampacity_a = 0.0;
  double r_per_mile = 0.0;
  double gmr_ft = 0.0;
};

/// CSV columns: kv,name,kcmil,ampacity_a,r_per_mile,gmr_ft
std::vector<CatalogEntry> read_conductor_catalog(const std::filesystem::path& path);

struct Form1Record {
  std::string utility;
  double voltage_kv = 0.0;
  double length_miles = 0.0;
  int conductors_per_phase = 1;
  double size_kcmil = 0.0;
  std::string material;
};

/// CSV columns: utility,voltage_kv,length_miles,conductors_per_phase,size_kcmil,material
std::vector<Form1Record> read_form1(const std::filesystem::path& path);

struct LineConfig {
  /// Phase spacing (ft) by nominal voltage; the nearest voltage is used.
  std::map<double, double> gmd_ft{{66.0, 5.0}, {115.0, 10.0}, {230.0, 25.0}, {500.0, 45.0}};
  /// Acceptable MVA range of an initial rating by nominal voltage.
  std::map<double, std::pair<double, double>> mva_bands{
      {66.0, {40.0, 400.0}}, {115.0, {80.0, 700.0}}, {230.0, {150.0, 1500.0}}, {500.0, {500.0, 4000.0}}};
  int max_circuits = 8;
  double dedup_tol = 0.01;
  double base_mva = 100.0;
};

double gmd_for(const LineConfig& config, double kv);

/// Index of the Form 1 record closest in length at the line's voltage
/// (restricted to the line's utility when it has records there).
int match_form1(const geo::LinePath& line, double length_miles, std::span<const Form1Record> form1);

struct Impedance {
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
};

inline constexpr double kReactancePerMile = 0.12134;    // ohm/mi per ln unit at 60 Hz
inline constexpr double kSusceptancePerMile = 3.3754e-5;  // S/mi per 1/ln unit at 60 Hz

Impedance impedance_from_conductor(const ConductorOption& option, double kv, double length_miles, double gmd_ft,
                                   double base_mva = 100.0);

double mva_rating(const ConductorOption& option, double kv);

/// Catalog conductors at `kv` (nearest voltage when absent), crossed with
/// 1..max_circuits, sorted ascending by MVA with near-duplicates removed.
std::vector<ConductorOption> build_option_table(std::span<const CatalogEntry> catalog, double kv,
                                                const LineConfig& config);

/// Next option per the upgrade rules, or -1 when at the top conductor with
/// the maximum circuit count.
int upgrade_index(const Branch& line, int max_circuits = 8);

/// Next option per the downsize rules, or -1 at one circuit of the smallest
/// conductor.
int downsize_index(const Branch& line);

/// Installs option `index` and recomputes r, x, b and the rating.
void apply_option(Branch& line, int index, const LineConfig& config);

struct LineInitReport {
  int lines = 0;
  int band_adjusted = 0;
  int out_of_band = 0;
  int voltage_fallbacks = 0;
};

LineInitReport init_lines(GridModel& model, std::span<const CatalogEntry> catalog,
                          std::span<const Form1Record> form1, const LineConfig& config);

struct TransformerImpedanceRow {
  double kv_hi = 0.0;
  double kv_lo = 0.0;
  double mva = 0.0;
  double x_pu = 0.0;  // on the transformer's own base
};

struct XrRow {
  double mva = 0.0;
  double xr = 0.0;
};

struct TransformerTables {
  std::vector<TransformerImpedanceRow> impedance;
  std::vector<XrRow> xr;
};

/// Reads `kv_hi,kv_lo,mva,x_pu` and `mva,xr` tables.
TransformerTables read_transformer_tables(const std::filesystem::path& impedance_csv,
                                          const std::filesystem::path& xr_csv);

/// Own-base reactance for a voltage pair at `mva` (linear in MVA, clamped at
/// the table ends). A missing pair uses the nearest listed pair.
double transformer_x_own(const TransformerTables& tables, double kv_hi, double kv_lo, double mva);
double transformer_xr(const TransformerTables& tables, double mva);

/// Sets rating, x (system base), xr and r = x / xr.
void set_transformer_rating(Branch& tx, double mva, const TransformerTables& tables, double base_mva = 100.0);

inline constexpr double kInitialTransformerMva = 2000.0;

void init_transformers(GridModel& model, const TransformerTables& tables);

std::vector<double> default_size_ladder();

/// Resizes every transformer to the smallest ladder size covering its
/// maximum flow (`max_flow_mw` indexed by branch). Returns the count changed.
int resize_transformers(GridModel& model, std::span<const double> max_flow_mw, const TransformerTables& tables,
                        std::span<const double> ladder);

/// Smallest ladder size ≥ flow; the top size when flow exceeds it.
double ladder_size(std::span<const double> ladder, double flow_mw);

}  // namespace gridsynth::lineparams
