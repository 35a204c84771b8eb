#include "gridsynth/lineparams.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <spdlog/spdlog.h>

#include "gridsynth/csv.hpp"
#include "gridsynth/error.hpp"

namespace gridsynth::lineparams {

namespace {

double require_positive(const csv::Table& t, const csv::Row& r, int col, std::string_view field) {
  double v = csv::to_double(t, r, col, field);
  if (!(v > 0.0)) throw ValidationError(fmt::format("{}:{}: field '{}' must be > 0", t.source, r.line, field));
  return v;
}

template <typename Map>
auto nearest_key(const Map& m, double kv) {
  auto best = m.begin();
  for (auto it = m.begin(); it != m.end(); ++it) {
    if (std::abs(it->first - kv) < std::abs(best->first - kv)) best = it;
  }
  return best;
}

bool same_kv(double a, double b) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(a)); }

}  // namespace

std::vector<CatalogEntry> read_conductor_catalog(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_kv = t.column("kv"), c_name = t.column("name"), c_kcmil = t.column("kcmil"),
      c_amp = t.column("ampacity_a"), c_r = t.column("r_per_mile"), c_gmr = t.column("gmr_ft");
  std::vector<CatalogEntry> out;
  for (const auto& r : t.rows) {
    CatalogEntry e;
    e.kv = require_positive(t, r, c_kv, "kv");
    e.name = r.fields[c_name];
    e.kcmil = require_positive(t, r, c_kcmil, "kcmil");
    e.ampacity_a = require_positive(t, r, c_amp, "ampacity_a");
    e.r_per_mile = csv::to_double(t, r, c_r, "r_per_mile");
    if (e.r_per_mile < 0.0) throw ValidationError(fmt::format("{}:{}: field 'r_per_mile' must be >= 0", t.source, r.line));
    e.gmr_ft = require_positive(t, r, c_gmr, "gmr_ft");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Form1Record> read_form1(const std::filesystem::path& path) {
  auto t = csv::read(path);
  int c_util = t.column("utility"), c_kv = t.column("voltage_kv"), c_len = t.column("length_miles"),
      c_cpp = t.column("conductors_per_phase"), c_size = t.column("size_kcmil"), c_mat = t.column("material");
  std::vector<Form1Record> out;
  for (const auto& r : t.rows) {
    Form1Record f;
    f.utility = r.fields[c_util];
    f.voltage_kv = require_positive(t, r, c_kv, "voltage_kv");
    f.length_miles = require_positive(t, r, c_len, "length_miles");
    f.conductors_per_phase = static_cast<int>(csv::to_int(t, r, c_cpp, "conductors_per_phase"));
    if (f.conductors_per_phase < 1) {
      throw ValidationError(fmt::format("{}:{}: field 'conductors_per_phase' must be >= 1", t.source, r.line));
    }
    f.size_kcmil = require_positive(t, r, c_size, "size_kcmil");
    f.material = r.fields[c_mat];
    out.push_back(std::move(f));
  }
  return out;
}

double gmd_for(const LineConfig& config, double kv) {
  if (config.gmd_ft.empty()) throw ValidationError("no GMD values configured");
  return nearest_key(config.gmd_ft, kv)->second;
}

int match_form1(const geo::LinePath& line, double length_miles, std::span<const Form1Record> form1) {
  if (form1.empty()) throw ValidationError(fmt::format("line '{}': Form 1 table is empty", line.id));
  double kv = line.voltage_kv;
  bool any_at_kv = std::any_of(form1.begin(), form1.end(), [&](const auto& f) { return same_kv(f.voltage_kv, kv); });
  if (!any_at_kv) {
    double best = form1[0].voltage_kv;
    for (const auto& f : form1) {
      if (std::abs(f.voltage_kv - line.voltage_kv) < std::abs(best - line.voltage_kv)) best = f.voltage_kv;
    }
    spdlog::warn("line '{}': no Form 1 records at {} kV, using {} kV", line.id, line.voltage_kv, best);
    kv = best;
  }
  bool utility_match = line.owner && std::any_of(form1.begin(), form1.end(), [&](const auto& f) {
                         return same_kv(f.voltage_kv, kv) && f.utility == *line.owner;
                       });
  int best = -1;
  double best_diff = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(form1.size()); ++i) {
    const auto& f = form1[i];
    if (!same_kv(f.voltage_kv, kv)) continue;
    if (utility_match && f.utility != *line.owner) continue;
    double d = std::abs(f.length_miles - length_miles);
    if (d < best_diff) {
      best_diff = d;
      best = i;
    }
  }
  return best;
}

Impedance impedance_from_conductor(const ConductorOption& option, double kv, double length_miles, double gmd_ft,
                                   double base_mva) {
  if (!(gmd_ft > 0.0) || !(option.gmr_ft > 0.0)) {
    throw ValidationError(fmt::format("conductor '{}': GMD and GMR must be positive", option.name));
  }
  if (!(length_miles > 0.0)) throw ValidationError(fmt::format("conductor '{}': length must be positive", option.name));
  double spacing = std::log(gmd_ft / option.gmr_ft);
  if (!(spacing > 0.0)) {
    throw ValidationError(fmt::format("conductor '{}': GMD {} ft not above GMR {} ft", option.name, gmd_ft, option.gmr_ft));
  }
  double n = option.circuits;
  double z_base = kv * kv / base_mva;
  Impedance z;
  z.r = option.r_per_mile / n * length_miles / z_base;
  z.x = kReactancePerMile * spacing / n * length_miles / z_base;
  z.b = kSusceptancePerMile / spacing * n * length_miles * z_base;
  return z;
}

double mva_rating(const ConductorOption& option, double kv) {
  return std::sqrt(3.0) * kv * (option.ampacity_a / 1000.0) * option.circuits;
}

std::vector<ConductorOption> build_option_table(std::span<const CatalogEntry> catalog, double kv,
                                                const LineConfig& config) {
  if (catalog.empty()) throw ValidationError("conductor catalog is empty");
  double use_kv = catalog[0].kv;
  for (const auto& e : catalog) {
    if (std::abs(e.kv - kv) < std::abs(use_kv - kv)) use_kv = e.kv;
  }
  if (!same_kv(use_kv, kv)) spdlog::warn("conductor catalog has no {} kV entries, using {} kV", kv, use_kv);

  std::vector<ConductorOption> all;
  for (const auto& e : catalog) {
    if (!same_kv(e.kv, use_kv)) continue;
    for (int c = 1; c <= config.max_circuits; ++c) {
      ConductorOption o{e.name, e.kcmil, e.ampacity_a, e.r_per_mile, e.gmr_ft, c, 0.0};
      o.mva = mva_rating(o, kv);
      all.push_back(std::move(o));
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.mva != b.mva) return a.mva < b.mva;
    return a.circuits < b.circuits;
  });
  std::vector<ConductorOption> out;
  for (auto& o : all) {
    if (!out.empty() && o.mva <= out.back().mva * (1.0 + config.dedup_tol)) continue;
    out.push_back(std::move(o));
  }
  return out;
}

namespace {

int find_option(const std::vector<ConductorOption>& options, const std::string& name, int circuits) {
  for (int i = 0; i < static_cast<int>(options.size()); ++i) {
    if (options[i].name == name && options[i].circuits == circuits) return i;
  }
  return -1;
}

// Conductor names in ascending single-circuit ampacity.
std::vector<std::string> conductor_ladder(const std::vector<ConductorOption>& options) {
  std::vector<std::pair<double, std::string>> seen;
  for (const auto& o : options) {
    bool known = std::any_of(seen.begin(), seen.end(), [&](const auto& s) { return s.second == o.name; });
    if (!known) seen.emplace_back(o.ampacity_a, o.name);
  }
  std::stable_sort(seen.begin(), seen.end());
  std::vector<std::string> names;
  for (auto& s : seen) names.push_back(std::move(s.second));
  return names;
}

}  // namespace

int upgrade_index(const Branch& line, int max_circuits) {
  const auto& opts = line.options;
  if (line.option_index < 0) return -1;
  const auto& cur = opts[line.option_index];
  auto names = conductor_ladder(opts);
  auto pos = std::find(names.begin(), names.end(), cur.name) - names.begin();
  int target = -1;
  if (pos + 1 < static_cast<long>(names.size())) {
    for (auto k = pos + 1; k < static_cast<long>(names.size()) && target < 0; ++k) {
      target = find_option(opts, names[k], cur.circuits);
    }
  } else if (cur.circuits < max_circuits) {
    target = find_option(opts, cur.name, cur.circuits + 1);
  } else {
    return -1;
  }
  if (target >= 0 && opts[target].mva > cur.mva) return target;
  for (int i = line.option_index + 1; i < static_cast<int>(opts.size()); ++i) {
    if (opts[i].mva > cur.mva && opts[i].circuits <= max_circuits) return i;
  }
  return -1;
}

int downsize_index(const Branch& line) {
  const auto& opts = line.options;
  if (line.option_index < 0) return -1;
  const auto& cur = opts[line.option_index];
  auto names = conductor_ladder(opts);
  auto pos = std::find(names.begin(), names.end(), cur.name) - names.begin();
  int target = -1;
  if (pos > 0) {
    for (auto k = pos - 1; k >= 0 && target < 0; --k) target = find_option(opts, names[k], cur.circuits);
  } else if (cur.circuits > 1) {
    target = find_option(opts, cur.name, cur.circuits - 1);
  } else {
    return -1;
  }
  if (target >= 0 && opts[target].mva < cur.mva) return target;
  for (int i = line.option_index - 1; i >= 0; --i) {
    if (opts[i].mva < cur.mva) return i;
  }
  return -1;
}

void apply_option(Branch& line, int index, const LineConfig& config) {
  const auto& o = line.options.at(index);
  double kv = line.kv_from;
  auto z = impedance_from_conductor(o, kv, line.length_miles, gmd_for(config, kv), config.base_mva);
  line.option_index = index;
  line.circuits = o.circuits;
  line.r = z.r;
  line.x = z.x;
  line.b = z.b;
  line.rate_mva = o.mva * (line.doubled ? 2.0 : 1.0);
}

LineInitReport init_lines(GridModel& model, std::span<const CatalogEntry> catalog,
                          std::span<const Form1Record> form1, const LineConfig& config) {
  LineInitReport report;
  for (auto& br : model.branches) {
    if (!br.is_line()) continue;
    ++report.lines;
    double kv = br.kv_from;
    br.options = build_option_table(catalog, kv, config);
    if (br.options.empty()) throw ValidationError(fmt::format("line '{}': no conductor options at {} kV", br.id, kv));

    geo::LinePath key = br.path;
    key.voltage_kv = kv;
    key.id = br.id;
    int rec = match_form1(key, br.length_miles, form1);
    if (rec < 0) throw ValidationError(fmt::format("line '{}': no Form 1 match", br.id));
    const auto& f = form1[rec];
    if (!same_kv(f.voltage_kv, kv)) ++report.voltage_fallbacks;
    int circuits = std::clamp(f.conductors_per_phase, 1, config.max_circuits);

    auto names = conductor_ladder(br.options);
    std::string conductor;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& name : names) {
      for (const auto& o : br.options) {
        if (o.name == name && std::abs(o.size_kcmil - f.size_kcmil) < best) {
          best = std::abs(o.size_kcmil - f.size_kcmil);
          conductor = name;
        }
      }
    }
    int idx = find_option(br.options, conductor, circuits);
    if (idx < 0) {
      // Removed as a near-duplicate: take the option with the closest rating.
      ConductorOption probe{};
      for (const auto& e : catalog) {
        if (e.name == conductor) probe.ampacity_a = e.ampacity_a;
      }
      probe.circuits = circuits;
      double target = mva_rating(probe, kv);
      double gap = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(br.options.size()); ++i) {
        double d = std::abs(br.options[i].mva - target);
        if (d < gap) {
          gap = d;
          idx = i;
        }
      }
    }
    br.option_index = idx;

    if (!config.mva_bands.empty()) {
      auto [lo, hi] = nearest_key(config.mva_bands, kv)->second;
      bool moved = false;
      while (br.options[br.option_index].mva < lo) {
        int next = upgrade_index(br, config.max_circuits);
        if (next < 0) break;
        br.option_index = next;
        moved = true;
      }
      while (br.options[br.option_index].mva > hi) {
        int next = downsize_index(br);
        if (next < 0 || br.options[next].mva < lo) break;
        br.option_index = next;
        moved = true;
      }
      if (moved) ++report.band_adjusted;
      double mva = br.options[br.option_index].mva;
      if (mva < lo || mva > hi) {
        ++report.out_of_band;
        spdlog::warn("line '{}': initial rating {:.1f} MVA outside [{}, {}]", br.id, mva, lo, hi);
      }
    }
    br.doubled = false;
    apply_option(br, br.option_index, config);
  }
  return report;
}

TransformerTables read_transformer_tables(const std::filesystem::path& impedance_csv,
                                          const std::filesystem::path& xr_csv) {
  TransformerTables tables;
  auto t = csv::read(impedance_csv);
  int c_hi = t.column("kv_hi"), c_lo = t.column("kv_lo"), c_mva = t.column("mva"), c_x = t.column("x_pu");
  for (const auto& r : t.rows) {
    TransformerImpedanceRow row;
    row.kv_hi = require_positive(t, r, c_hi, "kv_hi");
    row.kv_lo = require_positive(t, r, c_lo, "kv_lo");
    row.mva = require_positive(t, r, c_mva, "mva");
    row.x_pu = require_positive(t, r, c_x, "x_pu");
    if (row.kv_lo > row.kv_hi) std::swap(row.kv_lo, row.kv_hi);
    tables.impedance.push_back(row);
  }
  auto u = csv::read(xr_csv);
  int c_m = u.column("mva"), c_xr = u.column("xr");
  for (const auto& r : u.rows) {
    tables.xr.push_back({require_positive(u, r, c_m, "mva"), require_positive(u, r, c_xr, "xr")});
  }
  if (tables.impedance.empty()) throw ValidationError(impedance_csv.string() + ": no rows");
  if (tables.xr.empty()) throw ValidationError(xr_csv.string() + ": no rows");
  std::sort(tables.xr.begin(), tables.xr.end(), [](const auto& a, const auto& b) { return a.mva < b.mva; });
  return tables;
}

namespace {

double interpolate(std::vector<std::pair<double, double>> pts, double at) {
  std::sort(pts.begin(), pts.end());
  if (at <= pts.front().first) return pts.front().second;
  if (at >= pts.back().first) return pts.back().second;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (at <= pts[i].first) {
      auto [x0, y0] = pts[i - 1];
      auto [x1, y1] = pts[i];
      if (x1 == x0) return y1;
      return y0 + (y1 - y0) * (at - x0) / (x1 - x0);
    }
  }
  return pts.back().second;
}

}  // namespace

double transformer_x_own(const TransformerTables& tables, double kv_hi, double kv_lo, double mva) {
  if (kv_lo > kv_hi) std::swap(kv_lo, kv_hi);
  if (tables.impedance.empty()) throw ValidationError("transformer impedance table is empty");
  double best_hi = tables.impedance[0].kv_hi, best_lo = tables.impedance[0].kv_lo;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& row : tables.impedance) {
    double d = std::abs(row.kv_hi - kv_hi) + std::abs(row.kv_lo - kv_lo);
    if (d < best_d) {
      best_d = d;
      best_hi = row.kv_hi;
      best_lo = row.kv_lo;
    }
  }
  if (best_d > 1e-6) {
    spdlog::warn("no transformer impedance entry for {}/{} kV, using {}/{} kV", kv_hi, kv_lo, best_hi, best_lo);
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : tables.impedance) {
    if (row.kv_hi == best_hi && row.kv_lo == best_lo) pts.emplace_back(row.mva, row.x_pu);
  }
  return interpolate(std::move(pts), mva);
}

double transformer_xr(const TransformerTables& tables, double mva) {
  if (tables.xr.empty()) throw ValidationError("transformer X/R table is empty");
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : tables.xr) pts.emplace_back(row.mva, row.xr);
  return interpolate(std::move(pts), mva);
}

void set_transformer_rating(Branch& tx, double mva, const TransformerTables& tables, double base_mva) {
  double hi = std::max(tx.kv_from, tx.kv_to), lo = std::min(tx.kv_from, tx.kv_to);
  tx.rate_mva = mva;
  tx.x = transformer_x_own(tables, hi, lo, mva) * (base_mva / mva);
  tx.xr_ratio = transformer_xr(tables, mva);
  tx.r = tx.x / tx.xr_ratio;
  tx.b = 0.0;
}

void init_transformers(GridModel& model, const TransformerTables& tables) {
  for (auto& br : model.branches) {
    if (br.is_transformer()) set_transformer_rating(br, kInitialTransformerMva, tables, model.base_mva);
  }
}

std::vector<double> default_size_ladder() {
  std::vector<double> ladder;
  for (int m = 100; m <= 2000; m += 100) ladder.push_back(m);
  return ladder;
}

double ladder_size(std::span<const double> ladder, double flow_mw) {
  if (ladder.empty()) throw ValidationError("transformer size ladder is empty");
  for (double size : ladder) {
    if (size >= flow_mw) return size;
  }
  return ladder.back();
}

int resize_transformers(GridModel& model, std::span<const double> max_flow_mw, const TransformerTables& tables,
                        std::span<const double> ladder) {
  std::vector<double> sorted(ladder.begin(), ladder.end());
  std::sort(sorted.begin(), sorted.end());
  int changed = 0;
  for (int k = 0; k < model.num_branches(); ++k) {
    auto& br = model.branches[k];
    if (!br.is_transformer()) continue;
    double flow = std::abs(max_flow_mw[k]);
    if (flow > sorted.back()) {
      spdlog::warn("transformer '{}': flow {:.1f} MW exceeds the largest size {}", br.id, flow, sorted.back());
    }
    double size = ladder_size(sorted, flow);
    if (size != br.rate_mva) ++changed;
    set_transformer_rating(br, size, tables, model.base_mva);
  }
  return changed;
}

}  // namespace gridsynth::lineparams
