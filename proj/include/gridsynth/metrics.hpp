#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridsynth/assignment.hpp"
#include "gridsynth/model.hpp"
#include "gridsynth/powerflow.hpp"
#include "gridsynth/scenarios.hpp"

namespace gridsynth::metrics {

/// Buses per line degree; transformer branches do not count.
std::map<int, int> degree_distribution(const GridModel& model);

struct BranchStatsRow {
  double kv = 0.0;
  int lines = 0;
  double percent = 0.0;
  double miles = 0.0;
  double gva_miles = 0.0;
};

std::vector<BranchStatsRow> branch_stats(const GridModel& model);

struct HourRow {
  int hour = 0;
  double dc_cost = 0.0;
  double ac_cost = 0.0;
  double dc_gen_mw = 0.0;
  double ac_gen_mw = 0.0;
  int dc_binding = 0;
  int ac_binding = 0;
  double curtailed_mw = 0.0;
  bool dc_feasible = false;
  bool ac_feasible = false;
  std::vector<double> ac_pg_mw;  // per generator
  std::string note;

  bool feasible() const { return dc_feasible && ac_feasible; }
};

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
};

Summary summarize(std::vector<double> values);

struct EvaluationReport {
  std::vector<HourRow> rows;
  std::map<std::string, Summary> summary;  // over feasible hours
  std::map<int, int> degree_histogram;
  std::vector<BranchStatsRow> branch_stats;
  std::map<std::string, double> fuel_mix;  // share of AC generation
  double feasible_fraction = 0.0;
};

struct EvaluationOptions {
  int first_hour = 0;
  int hours = 0;  // 0 means through the end of the data
  scenarios::CommitmentOptions commitment;
  powerflow::AcOpfOptions opf;
};

/// Independent DC OPF and AC surrogate solves for every hour in the window,
/// each with economic commitment at the hour's scaled renewable caps.
EvaluationReport yearly_evaluation(const GridModel& model, const assignment::RenewableTotals& renewables,
                                   const EvaluationOptions& options = {});

/// Recomputes summary, histogram, branch table and fuel mix from the rows.
void finalize_report(const GridModel& model, EvaluationReport& report);

/// `hour,dc_cost,ac_cost,dc_gen_mw,ac_gen_mw,dc_binding,ac_binding,curtailed_mw,feasible`
std::string report_csv(const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

/// AC generation by fuel for hours in [first_hour, last_hour], CSV `hour,fuel,mw`.
std::string dispatch_stack(const GridModel& model, const EvaluationReport& report, int first_hour, int last_hour);

}  // namespace gridsynth::metrics
