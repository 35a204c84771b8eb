#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "gridsynth/model.hpp"

namespace gridsynth::caseio {

struct ExportOptions {
  std::string case_name = "gridsynth_case";
  /// Hour whose bus loads fill Pd/Qd; negative selects the peak system hour.
  int load_hour = -1;
  double vmin = 0.95;
  double vmax = 1.05;
  /// Checkpoints taken before sizing carry branches without impedances.
  bool require_parameters = true;
};

struct CaseText {
  std::string matpower;  // case .m text
  std::string geojson;   // line paths keyed by branch id
};

/// Bus, branch, generator and cost tables in MATPOWER layout (100 MVA base,
/// per-unit impedances, RATE_A in MVA) plus extension tables that carry the
/// remaining model fields. Condensers are generator rows with Pmax = Pmin = 0.
/// Throws ValidationError when a branch has no impedance, unless
/// `require_parameters` is off.
CaseText export_case(const GridModel& model, const ExportOptions& options = {});

/// Inverse of export_case. Load profiles are not part of the case; the
/// returned model has `loads` unset and `load_bus` restored.
GridModel import_case(std::string_view matpower, std::string_view geojson);

void write_case(const std::filesystem::path& stem, const GridModel& model, const ExportOptions& options = {});
GridModel read_case(const std::filesystem::path& stem);

/// Load record ids in the order of `load_bus`, as stored in a case.
std::vector<std::string> case_load_ids(std::string_view matpower);

/// First field that differs by more than `tol` (relative for magnitudes
/// above one), or nullopt when the models match.
std::optional<std::string> compare_models(const GridModel& a, const GridModel& b, double tol = 1e-12);

}  // namespace gridsynth::caseio
