#include "gridsynth/model.hpp"

#include <algorithm>

#include "gridsynth/error.hpp"

namespace gridsynth {

CostCurve CostCurve::quadratic(double c2, double c1, double c0) {
  if (c2 < 0.0) throw ValidationError("cost curve c2 must be >= 0");
  CostCurve c{c2, c1, c0, CostKind::kQuadratic};
  if (c2 == 0.0) c.kind = (c1 == 0.0 && c0 == 0.0) ? CostKind::kZero : CostKind::kLinear;
  return c;
}

int GridModel::num_lines() const {
  return static_cast<int>(std::count_if(branches.begin(), branches.end(),
                                        [](const Branch& b) { return b.is_line(); }));
}

int GridModel::hours() const {
  if (!loads || loads->empty()) return 0;
  return static_cast<int>(loads->front().profile.size());
}

int GridModel::find_bus(const std::string& id) const {
  for (int i = 0; i < num_buses(); ++i) {
    if (buses[i].id == id) return i;
  }
  return -1;
}

int GridModel::find_branch(const std::string& id) const {
  for (int i = 0; i < num_branches(); ++i) {
    if (branches[i].id == id) return i;
  }
  return -1;
}

std::vector<double> GridModel::bus_load_mw(int hour) const {
  std::vector<double> pd(buses.size(), 0.0);
  if (!loads) return pd;
  for (std::size_t k = 0; k < loads->size(); ++k) {
    int b = load_bus[k];
    if (b >= 0) pd[b] += (*loads)[k].profile[hour];
  }
  return pd;
}

std::vector<double> GridModel::system_load_mw() const {
  std::vector<double> total(hours(), 0.0);
  if (!loads) return total;
  for (std::size_t k = 0; k < loads->size(); ++k) {
    if (load_bus[k] < 0) continue;
    const auto& prof = (*loads)[k].profile;
    for (std::size_t h = 0; h < prof.size(); ++h) total[h] += prof[h];
  }
  return total;
}

void retain_buses(GridModel& model, const std::vector<bool>& keep) {
  std::vector<int> remap(model.buses.size(), -1);
  std::vector<Bus> buses;
  for (std::size_t i = 0; i < model.buses.size(); ++i) {
    if (keep[i]) {
      remap[i] = static_cast<int>(buses.size());
      buses.push_back(std::move(model.buses[i]));
    }
  }
  model.buses = std::move(buses);

  std::vector<Branch> branches;
  for (auto& br : model.branches) {
    if (remap[br.from] < 0 || remap[br.to] < 0) continue;
    br.from = remap[br.from];
    br.to = remap[br.to];
    branches.push_back(std::move(br));
  }
  model.branches = std::move(branches);

  std::erase_if(model.generators, [&](const Generator& g) { return g.bus < 0 || remap[g.bus] < 0; });
  for (auto& g : model.generators) g.bus = remap[g.bus];
  std::erase_if(model.condensers, [&](const Condenser& c) { return remap[c.bus] < 0; });
  for (auto& c : model.condensers) c.bus = remap[c.bus];
  for (auto& b : model.load_bus) b = b >= 0 ? remap[b] : -1;
}

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::kSubstation: return "substation";
    case BusKind::kAdded: return "added";
    case BusKind::kVoltageSplit: return "voltage_split";
  }
  return "added";
}

std::string_view to_string(BranchKind kind) {
  return kind == BranchKind::kLine ? "line" : "transformer";
}

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::kQuadratic: return "quadratic";
    case CostKind::kLinear: return "linear";
    case CostKind::kZero: return "zero";
  }
  return "zero";
}

}  // namespace gridsynth
