#include "gridsynth/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "gridsynth/error.hpp"

namespace gridsynth::scenarios {

std::string_view to_string(DispatchKind kind) {
  return kind == DispatchKind::kEconomic ? "economic" : "uneconomic";
}

std::string_view to_string(ScenarioTag tag) {
  switch (tag) {
    case ScenarioTag::kMaxLoadWindow: return "max_load_window";
    case ScenarioTag::kMinLoadWindow: return "min_load_window";
    case ScenarioTag::kMaxSolar: return "max_solar";
    case ScenarioTag::kMaxWind: return "max_wind";
    case ScenarioTag::kMinRenewable: return "min_renewable";
    case ScenarioTag::kYearlyEval: return "yearly_eval";
  }
  return "yearly_eval";
}

namespace {

ScenarioTag parse_tag(const std::string& s) {
  for (auto t : {ScenarioTag::kMaxLoadWindow, ScenarioTag::kMinLoadWindow, ScenarioTag::kMaxSolar,
                 ScenarioTag::kMaxWind, ScenarioTag::kMinRenewable, ScenarioTag::kYearlyEval}) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown scenario tag '" + s + "'");
}

DispatchKind parse_kind(const std::string& s) {
  if (s == "economic") return DispatchKind::kEconomic;
  if (s == "uneconomic") return DispatchKind::kUneconomic;
  throw ValidationError("unknown dispatch kind '" + s + "'");
}

}  // namespace

std::pair<int, int> window_bounds(int center, int hours) {
  if (hours < kWindowLength) {
    throw ValidationError(fmt::format("scenario selection needs at least {} hours, got {}", kWindowLength, hours));
  }
  int first = center - kWindowHalfWidth;
  int last = center + kWindowHalfWidth;
  if (first < 0) {
    last -= first;
    first = 0;
  }
  if (last > hours - 1) {
    first -= last - (hours - 1);
    last = hours - 1;
  }
  return {first, last};
}

std::vector<HourSelection> select_scenarios(std::span<const double> system_load,
                                            const assignment::RenewableTotals& renewables) {
  const int hours = static_cast<int>(system_load.size());
  if (hours < kWindowLength) {
    throw ValidationError(fmt::format("scenario selection needs at least {} hours, got {}", kWindowLength, hours));
  }
  if (renewables.hours() != hours) {
    throw ValidationError(fmt::format("renewable totals cover {} hours but loads cover {}", renewables.hours(), hours));
  }
  auto argmax = [](auto first, auto last) { return static_cast<int>(std::max_element(first, last) - first); };
  auto argmin = [](auto first, auto last) { return static_cast<int>(std::min_element(first, last) - first); };

  std::vector<HourSelection> out;
  out.reserve(kLoadScenarioCount);
  auto [a0, a1] = window_bounds(argmax(system_load.begin(), system_load.end()), hours);
  for (int h = a0; h <= a1; ++h) out.push_back({h, ScenarioTag::kMaxLoadWindow});
  auto [b0, b1] = window_bounds(argmin(system_load.begin(), system_load.end()), hours);
  for (int h = b0; h <= b1; ++h) out.push_back({h, ScenarioTag::kMinLoadWindow});

  std::vector<double> total(hours);
  for (int h = 0; h < hours; ++h) total[h] = renewables.solar_mw[h] + renewables.wind_mw[h];
  out.push_back({argmax(renewables.solar_mw.begin(), renewables.solar_mw.end()), ScenarioTag::kMaxSolar});
  out.push_back({argmax(renewables.wind_mw.begin(), renewables.wind_mw.end()), ScenarioTag::kMaxWind});
  out.push_back({argmin(total.begin(), total.end()), ScenarioTag::kMinRenewable});
  return out;
}

double Scenario::total_load() const { return std::accumulate(bus_load_mw.begin(), bus_load_mw.end(), 0.0); }

double DispatchResult::total_generation() const { return std::accumulate(pg_mw.begin(), pg_mw.end(), 0.0); }

double average_cost_at_pmax(const Generator& g) { return g.cost.average(g.pmax_mw); }

namespace {

std::vector<bool> decommit(const std::vector<Generator>& gens, std::span<const double> caps, double load,
                           const CommitmentOptions& options, bool most_expensive_first) {
  const int n = static_cast<int>(gens.size());
  std::vector<bool> committed(n, true);
  double capacity = 0.0;
  for (int i = 0; i < n; ++i) capacity += caps[i];
  double floor = (1.0 + options.reserve_frac) * load;
  if (capacity < floor - 1e-9) {
    throw InfeasibleError(fmt::format("unit commitment: capacity {:.3f} MW below required {:.3f} MW", capacity, floor));
  }
  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    if (options.exempt_renewables && gens[i].is_renewable) continue;
    order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double ca = average_cost_at_pmax(gens[a]);
    double cb = average_cost_at_pmax(gens[b]);
    return most_expensive_first ? ca > cb : ca < cb;
  });
  for (int i : order) {
    if (capacity - caps[i] < floor - 1e-9) break;
    capacity -= caps[i];
    committed[i] = false;
  }
  return committed;
}

}  // namespace

std::vector<bool> unit_commitment(const std::vector<Generator>& generators, std::span<const double> caps,
                                  double load_mw, const CommitmentOptions& options) {
  return decommit(generators, caps, load_mw, options, true);
}

std::vector<bool> uneconomic_commitment(const std::vector<Generator>& generators, std::span<const double> caps,
                                        double load_mw, const CommitmentOptions& options) {
  return decommit(generators, caps, load_mw, options, false);
}

DispatchResult economic_dispatch(const std::vector<Generator>& generators, std::span<const double> caps,
                                 const std::vector<bool>& committed, double load_mw) {
  const int n = static_cast<int>(generators.size());
  std::vector<int> units;
  double lo_total = 0.0, hi_total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!committed[i]) continue;
    units.push_back(i);
    double lo = std::min(generators[i].pmin_mw, caps[i]);
    lo_total += lo;
    hi_total += caps[i];
  }
  double tol = 1e-9 * std::max(1.0, load_mw);
  if (load_mw < lo_total - tol || load_mw > hi_total + tol) {
    throw InfeasibleError(fmt::format("economic dispatch: load {:.3f} MW outside committed range [{:.3f}, {:.3f}]",
                                      load_mw, lo_total, hi_total));
  }

  auto floor_of = [&](int i) { return std::min(generators[i].pmin_mw, caps[i]); };
  // Output of unit i at marginal price lambda; linear units at exactly their
  // price report the floor (`upper` = false) or the cap (`upper` = true).
  auto output = [&](int i, double lambda, bool upper) {
    const auto& c = generators[i].cost;
    double lo = floor_of(i), hi = caps[i];
    if (c.c2 > 0.0) return std::clamp((lambda - c.c1) / (2.0 * c.c2), lo, hi);
    if (lambda > c.c1 || (upper && lambda == c.c1)) return hi;
    return lo;
  };
  auto total = [&](double lambda, bool upper) {
    double s = 0.0;
    for (int i : units) s += output(i, lambda, upper);
    return s;
  };

  DispatchResult res;
  res.committed = committed;
  res.pg_mw.assign(n, 0.0);
  if (!units.empty()) {
    double lam_lo = std::numeric_limits<double>::infinity(), lam_hi = -lam_lo;
    for (int i : units) {
      lam_lo = std::min(lam_lo, generators[i].cost.marginal(floor_of(i)));
      lam_hi = std::max(lam_hi, generators[i].cost.marginal(caps[i]));
    }
    lam_lo -= 1.0;
    lam_hi += 1.0;
    // Smallest lambda whose upper output covers the load.
    for (int it = 0; it < 200 && lam_hi - lam_lo > 1e-13 * std::max(1.0, std::abs(lam_hi)); ++it) {
      double mid = 0.5 * (lam_lo + lam_hi);
      if (total(mid, true) >= load_mw) {
        lam_hi = mid;
      } else {
        lam_lo = mid;
      }
    }
    double lambda = lam_hi;
    // Snap to a linear unit's price when within bisection resolution.
    for (int i : units) {
      const auto& c = generators[i].cost;
      if (c.c2 == 0.0 && std::abs(c.c1 - lambda) <= 1e-9 * std::max(1.0, std::abs(lambda))) lambda = c.c1;
    }
    double sum = 0.0;
    for (int i : units) {
      res.pg_mw[i] = output(i, lambda, false);
      sum += res.pg_mw[i];
    }
    // Marginal linear units at lambda take the remainder in index order,
    // then any unit with headroom absorbs bisection residue.
    double residual = load_mw - sum;
    for (int pass = 0; pass < 2 && std::abs(residual) > 0.0; ++pass) {
      for (int i : units) {
        const auto& c = generators[i].cost;
        bool marginal_linear = c.c2 == 0.0 && c.c1 == lambda;
        if (pass == 0 && !marginal_linear) continue;
        double room = residual > 0.0 ? caps[i] - res.pg_mw[i] : res.pg_mw[i] - floor_of(i);
        double take = std::min(std::abs(residual), std::max(0.0, room));
        res.pg_mw[i] += residual > 0.0 ? take : -take;
        residual += residual > 0.0 ? -take : take;
        if (residual == 0.0) break;
      }
    }
  }
  for (int i : units) res.total_cost += generators[i].cost.cost(res.pg_mw[i]);
  return res;
}

DispatchResult uneconomic_dispatch(const std::vector<Generator>& generators, std::span<const double> caps,
                                   double load_mw, const CommitmentOptions& options) {
  auto committed = uneconomic_commitment(generators, caps, load_mw, options);
  return economic_dispatch(generators, caps, committed, load_mw);
}

Scenario make_scenario(const GridModel& model, const assignment::RenewableTotals& renewables, int hour,
                       DispatchKind kind, ScenarioTag tag) {
  Scenario s;
  s.hour = hour;
  s.kind = kind;
  s.tag = tag;
  s.bus_load_mw = model.bus_load_mw(hour);
  s.caps = assignment::scale_renewables(model.generators, renewables.solar_mw.at(hour), renewables.wind_mw.at(hour)).caps;
  return s;
}

std::vector<InjectionScenario> build_injection_scenarios(const GridModel& model,
                                                         const assignment::RenewableTotals& renewables,
                                                         const CommitmentOptions& options) {
  auto hours = select_scenarios(model.system_load_mw(), renewables);
  std::vector<InjectionScenario> out;
  out.reserve(hours.size() * 2);
  for (const auto& sel : hours) {
    for (auto kind : {DispatchKind::kEconomic, DispatchKind::kUneconomic}) {
      InjectionScenario inj;
      inj.scenario = make_scenario(model, renewables, sel.hour, kind, sel.tag);
      double load = inj.scenario.total_load();
      const auto& caps = inj.scenario.caps;
      if (kind == DispatchKind::kEconomic) {
        auto committed = unit_commitment(model.generators, caps, load, options);
        inj.dispatch = economic_dispatch(model.generators, caps, committed, load);
      } else {
        inj.dispatch = uneconomic_dispatch(model.generators, caps, load, options);
      }
      out.push_back(std::move(inj));
    }
  }
  return out;
}

std::string to_jsonl(const GridModel& model, const std::vector<InjectionScenario>& scenarios) {
  std::string out;
  for (const auto& inj : scenarios) {
    nlohmann::ordered_json j;
    j["hour"] = inj.scenario.hour;
    j["kind"] = to_string(inj.scenario.kind);
    j["tag"] = to_string(inj.scenario.tag);
    nlohmann::ordered_json pg = nlohmann::ordered_json::object();
    nlohmann::ordered_json caps = nlohmann::ordered_json::object();
    auto committed = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < model.generators.size(); ++g) {
      pg[model.generators[g].id] = inj.dispatch.pg_mw[g];
      caps[model.generators[g].id] = inj.scenario.caps[g];
      if (inj.dispatch.committed[g]) committed.push_back(model.generators[g].id);
    }
    j["pg"] = std::move(pg);
    j["caps"] = std::move(caps);
    j["committed"] = std::move(committed);
    j["cost"] = inj.dispatch.total_cost;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<InjectionScenario> from_jsonl(const GridModel& model, std::string_view text) {
  std::map<std::string, int> gen_index;
  for (std::size_t g = 0; g < model.generators.size(); ++g) gen_index[model.generators[g].id] = static_cast<int>(g);
  std::vector<InjectionScenario> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("scenarios line {}: {}", line_no, e.what()));
    }
    InjectionScenario inj;
    inj.scenario.hour = j.at("hour").get<int>();
    inj.scenario.kind = parse_kind(j.at("kind").get<std::string>());
    inj.scenario.tag = parse_tag(j.at("tag").get<std::string>());
    inj.scenario.bus_load_mw = model.bus_load_mw(inj.scenario.hour);
    const auto n = model.generators.size();
    inj.scenario.caps.assign(n, 0.0);
    inj.dispatch.pg_mw.assign(n, 0.0);
    inj.dispatch.committed.assign(n, false);
    auto lookup = [&](const std::string& id) {
      auto it = gen_index.find(id);
      if (it == gen_index.end()) throw ValidationError(fmt::format("scenarios line {}: unknown generator '{}'", line_no, id));
      return it->second;
    };
    for (auto& [id, v] : j.at("pg").items()) inj.dispatch.pg_mw[lookup(id)] = v.get<double>();
    for (auto& [id, v] : j.at("caps").items()) inj.scenario.caps[lookup(id)] = v.get<double>();
    for (const auto& id : j.at("committed")) inj.dispatch.committed[lookup(id.get<std::string>())] = true;
    inj.dispatch.total_cost = j.value("cost", 0.0);
    out.push_back(std::move(inj));
  }
  return out;
}

}  // namespace gridsynth::scenarios
