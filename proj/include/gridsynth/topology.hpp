#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gridsynth/geodata.hpp"
#include "gridsynth/model.hpp"

namespace gridsynth::topology {

inline constexpr double kDefaultRadiusMeters = 12.0;
inline constexpr double kMicroSegmentMeters = 1.0;

enum class DefectKind { kDistanceDiscrepancy, kSameNodeBothEnds, kMicroSegment };

std::string_view to_string(DefectKind kind);

struct TopologyDiagnostic {
  DefectKind kind = DefectKind::kDistanceDiscrepancy;
  std::string bus_a;
  std::string bus_b;
  double graph_miles = 0.0;
  double geo_miles = 0.0;
  double ratio = 0.0;
  std::string line;  // offending line, when the defect concerns one
};

/// Line paths plus the bus each path endpoint is attached to. This is the
/// working state of the geometric passes before a GridModel exists.
struct TopologyState {
  std::vector<Bus> buses;
  std::vector<geo::LinePath> lines;
  /// endpoint_bus[l][0] is the bus at the front of line l, [1] at the back;
  /// -1 while unmapped.
  std::vector<std::array<int, 2>> endpoint_bus;
  std::vector<TopologyDiagnostic> diagnostics;
  int next_added = 0;

  int find_bus(const std::string& id) const;
  int find_line(const std::string& id) const;
};

TopologyState make_state(std::vector<geo::LinePath> lines, const std::vector<geo::SubstationRecord>& substations);

/// Maps every unmapped endpoint to the nearest bus within `radius_m`
/// (ties: lowest bus index), creating an `added` bus when none is in range.
/// Endpoints are processed in line order, front before back. Returns the
/// number of buses created.
int connect_endpoints(TopologyState& state, double radius_m = kDefaultRadiusMeters);

/// Splits lines at interior vertices lying within `radius_m` of a bus that
/// terminates some other line. Splits that would leave a piece shorter than
/// one meter are skipped and reported as micro-segment diagnostics.
/// Returns the number of splits performed.
int segment_branching_lines(TopologyState& state, double radius_m = kDefaultRadiusMeters);

struct DeleteNode { std::string id; };
struct MergeLines { std::string first; std::string second; };
struct DeleteLine { std::string id; };
struct ExtendLine { std::string id; geo::GeoPoint point; };
struct MoveEndpoint { std::string id; int end = 0; std::string node; };

using Edit = std::variant<DeleteNode, MergeLines, DeleteLine, ExtendLine, MoveEndpoint>;
using EditScript = std::vector<Edit>;

EditScript parse_edit_script(std::string_view json_text);
EditScript read_edit_script(const std::filesystem::path& path);
std::string to_json(const EditScript& script);

/// Applies edits in order. Throws ValidationError naming the edit index on a
/// dangling reference. Unmapped endpoints are left for connect_endpoints.
void apply_edits(TopologyState& state, const EditScript& script);

/// Builds a GridModel from the state: one line branch per path, including
/// paths whose two ends share a bus (see drop_self_loops).
GridModel build_model(const TopologyState& state);

/// Removes lines whose two ends map to one bus; returns their ids.
std::vector<std::string> drop_self_loops(GridModel& model);

/// Attaches each generator record to the nearest bus that terminates at
/// least one line. Cost and reactive limits are filled in by assignment.
void attach_generators(GridModel& model, const std::vector<geo::GeneratorRecord>& records);

struct VoltageSplitReport {
  int buses_split = 0;
  int buses_added = 0;
  int transformers_added = 0;
};

/// Gives every bus the voltage of its lines; a bus touched by V > 1 voltages
/// keeps the highest and gains V-1 split buses chained by transformers in
/// descending voltage. Generators stay on the highest-voltage bus.
VoltageSplitReport split_voltage_levels(GridModel& model);

struct RetentionReport {
  int buses_before = 0, buses_after = 0;
  int branches_before = 0, branches_after = 0;
  int generators_before = 0, generators_after = 0;
  int loads_before = 0, loads_after = 0;

  double bus_fraction() const;
  double branch_fraction() const;
  double generator_fraction() const;
  double load_fraction() const;
};

/// Keeps only the largest connected component (by bus count; ties to the
/// component holding the lowest bus index). Throws on an empty graph.
RetentionReport largest_component(GridModel& model);

/// Connected-component label per bus, labels numbered from 0 in bus order.
std::vector<int> component_labels(const GridModel& model);

struct DiagnoseOptions {
  double radius_m = 500.0;
  double ratio_threshold = 10.0;
};

/// Flags nearby bus pairs whose graph distance (line miles) greatly exceeds
/// their geographic distance, and lines whose two ends share a bus.
std::vector<TopologyDiagnostic> diagnose(const GridModel& model, const DiagnoseOptions& options = {});

std::string diagnostics_csv(const std::vector<TopologyDiagnostic>& diags);

}  // namespace gridsynth::topology
