#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridsynth/assignment.hpp"
#include "gridsynth/model.hpp"

namespace gridsynth::scenarios {

enum class DispatchKind { kEconomic, kUneconomic };

enum class ScenarioTag { kMaxLoadWindow, kMinLoadWindow, kMaxSolar, kMaxWind, kMinRenewable, kYearlyEval };

std::string_view to_string(DispatchKind kind);
std::string_view to_string(ScenarioTag tag);

inline constexpr int kWindowHalfWidth = 60;
inline constexpr int kWindowLength = 2 * kWindowHalfWidth + 1;
inline constexpr int kLoadScenarioCount = 2 * kWindowLength + 3;

struct HourSelection {
  int hour = 0;
  ScenarioTag tag = ScenarioTag::kYearlyEval;
};

/// The 245 load scenarios: 121 hours around the peak, 121 around the
/// minimum, then the maximum-solar, maximum-wind and minimum-renewable hours.
/// Windows clipped at the data boundary shift inward to keep 121 hours.
std::vector<HourSelection> select_scenarios(std::span<const double> system_load,
                                            const assignment::RenewableTotals& renewables);

/// First and last hour (inclusive) of the 121-hour window around `center`.
std::pair<int, int> window_bounds(int center, int hours);

struct Scenario {
  int hour = 0;
  std::vector<double> bus_load_mw;
  std::vector<double> caps;  // per generator, MW
  DispatchKind kind = DispatchKind::kEconomic;
  ScenarioTag tag = ScenarioTag::kYearlyEval;

  double total_load() const;
};

struct DispatchResult {
  std::vector<bool> committed;
  std::vector<double> pg_mw;
  double total_cost = 0.0;  // $/h

  double total_generation() const;
};

struct CommitmentOptions {
  double reserve_frac = 0.10;
  /// Zero-cost renewables stay committed in both commitment schemes.
  bool exempt_renewables = true;
};

/// Average cost at full output, the ranking key for commitment.
double average_cost_at_pmax(const Generator& g);

/// Decommits units most-expensive-first while committed capacity stays at or
/// above (1 + reserve) * load. Throws InfeasibleError if installed capacity
/// already falls short.
std::vector<bool> unit_commitment(const std::vector<Generator>& generators, std::span<const double> caps,
                                  double load_mw, const CommitmentOptions& options = {});

/// Same rule, removing the cheapest units first.
std::vector<bool> uneconomic_commitment(const std::vector<Generator>& generators, std::span<const double> caps,
                                        double load_mw, const CommitmentOptions& options = {});

/// Cost-minimizing dispatch of committed units against a single balance
/// constraint (equal marginal cost with floor/cap clamping).
DispatchResult economic_dispatch(const std::vector<Generator>& generators, std::span<const double> caps,
                                 const std::vector<bool>& committed, double load_mw);

DispatchResult uneconomic_dispatch(const std::vector<Generator>& generators, std::span<const double> caps,
                                   double load_mw, const CommitmentOptions& options = {});

struct InjectionScenario {
  Scenario scenario;
  DispatchResult dispatch;
};

Scenario make_scenario(const GridModel& model, const assignment::RenewableTotals& renewables, int hour,
                       DispatchKind kind, ScenarioTag tag);

/// Economic and uneconomic injections for every selected hour (490 in total
/// for a full selection), in selection order with economic first.
std::vector<InjectionScenario> build_injection_scenarios(const GridModel& model,
                                                         const assignment::RenewableTotals& renewables,
                                                         const CommitmentOptions& options = {});

/// One JSON object per line: {hour, kind, tag, pg: {...}, caps: {...}, committed: [...]}.
std::string to_jsonl(const GridModel& model, const std::vector<InjectionScenario>& scenarios);
std::vector<InjectionScenario> from_jsonl(const GridModel& model, std::string_view text);

}  // namespace gridsynth::scenarios
