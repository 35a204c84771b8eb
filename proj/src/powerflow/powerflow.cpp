#include "gridsynth/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fmt/format.h>
#include <numeric>

#include "gridsynth/error.hpp"
#include "gridsynth/union_find.hpp"

namespace gridsynth::powerflow {

using Complex = std::complex<double>;

std::vector<double> bus_injections(const GridModel& model, std::span<const double> pg_mw,
                                   std::span<const double> bus_load_mw) {
  std::vector<double> inj(model.num_buses(), 0.0);
  for (std::size_t g = 0; g < model.generators.size(); ++g) inj[model.generators[g].bus] += pg_mw[g];
  for (int i = 0; i < model.num_buses(); ++i) inj[i] -= bus_load_mw[i];
  return inj;
}

int choose_slack(const GridModel& model, std::span<const double> pg_mw) {
  int best = -1;
  for (std::size_t g = 0; g < model.generators.size(); ++g) {
    if (!pg_mw.empty() && !(pg_mw[g] > 1e-6)) continue;
    if (best < 0 || model.generators[g].pmax_mw > model.generators[best].pmax_mw) best = static_cast<int>(g);
  }
  return best < 0 ? 0 : model.generators[best].bus;
}

namespace {

void check_connected(const GridModel& model, int slack) {
  UnionFind uf(model.num_buses());
  for (const auto& br : model.branches) uf.unite(br.from, br.to);
  for (int i = 0; i < model.num_buses(); ++i) {
    if (uf.find(i) != uf.find(slack)) {
      throw NumericalError(fmt::format("bus '{}' is islanded from slack bus '{}'", model.buses[i].id,
                                       model.buses[slack].id));
    }
  }
}

}  // namespace

PFSolution dc_powerflow(const GridModel& model, std::span<const double> injection_mw, int slack) {
  const int n = model.num_buses();
  if (slack < 0) slack = choose_slack(model);
  PFSolution pf;
  pf.theta_rad.assign(n, 0.0);
  pf.vm_pu.assign(n, 1.0);
  pf.p_from_mw.assign(model.num_branches(), 0.0);
  pf.p_to_mw.assign(model.num_branches(), 0.0);
  pf.q_from_mvar.assign(model.num_branches(), 0.0);
  pf.q_to_mvar.assign(model.num_branches(), 0.0);
  if (n == 0) {
    pf.converged = true;
    return pf;
  }
  check_connected(model, slack);

  std::vector<int> pos(n, -1);
  int dim = 0;
  for (int i = 0; i < n; ++i) {
    if (i != slack) pos[i] = dim++;
  }
  solver::SparseMatrix b(dim);
  for (const auto& br : model.branches) {
    if (!(br.x != 0.0)) throw NumericalError(fmt::format("branch '{}' has zero reactance", br.id));
    double y = 1.0 / br.x;
    int f = pos[br.from], t = pos[br.to];
    if (f >= 0) b.add(f, f, y);
    if (t >= 0) b.add(t, t, y);
    if (f >= 0 && t >= 0) {
      b.add(f, t, -y);
      b.add(t, f, -y);
    }
  }
  b.compress();
  std::vector<double> rhs(dim);
  for (int i = 0; i < n; ++i) {
    if (pos[i] >= 0) rhs[pos[i]] = injection_mw[i] / model.base_mva;
  }
  if (dim > 0) {
    auto theta = solver::solve_linear(b, rhs);
    for (int i = 0; i < n; ++i) {
      if (pos[i] >= 0) pf.theta_rad[i] = theta[pos[i]];
    }
  }
  for (int k = 0; k < model.num_branches(); ++k) {
    const auto& br = model.branches[k];
    double p = model.base_mva * (pf.theta_rad[br.from] - pf.theta_rad[br.to]) / br.x;
    pf.p_from_mw[k] = p;
    pf.p_to_mw[k] = -p;
  }
  pf.converged = true;
  return pf;
}

double dispatch_cost(const GridModel& model, std::span<const double> pg_mw) {
  double total = 0.0;
  for (std::size_t g = 0; g < model.generators.size(); ++g) {
    if (pg_mw[g] > 1e-6) total += model.generators[g].cost.cost(pg_mw[g]);
  }
  return total;
}

OPFSolution dc_opf(const GridModel& model, std::span<const double> caps, std::span<const double> bus_load_mw,
                   const DcOpfOptions& options) {
  const int n = model.num_buses();
  const int ng = static_cast<int>(model.generators.size());
  const int nb = model.num_branches();
  const double base = model.base_mva;
  const int slack = choose_slack(model);

  solver::LinearProgram lp;
  std::vector<std::vector<int>> seg_vars(ng);
  std::vector<double> floor(ng, 0.0);
  std::vector<double> bus_rhs(bus_load_mw.begin(), bus_load_mw.end());
  for (int g = 0; g < ng; ++g) {
    const auto& gen = model.generators[g];
    bool on = options.committed.empty() || options.committed[g];
    double cap = on ? std::max(0.0, caps[g]) : 0.0;
    double lo = on ? std::min(gen.pmin_mw, cap) : 0.0;
    floor[g] = lo;
    bus_rhs[gen.bus] -= lo;
    double span = cap - lo;
    int segs = (gen.cost.c2 > 0.0 && span > 0.0) ? std::max(1, options.cost_segments) : 1;
    for (int s = 0; s < segs; ++s) {
      double a = lo + span * s / segs;
      double b = lo + span * (s + 1) / segs;
      double slope = segs == 1 ? gen.cost.marginal(lo) : (gen.cost.cost(b) - gen.cost.cost(a)) / (b - a);
      if (gen.cost.c2 > 0.0 && segs == 1) slope = gen.cost.c1 + gen.cost.c2 * (lo + cap);
      seg_vars[g].push_back(lp.add_variable(slope, 0.0, b - a));
    }
  }
  std::vector<int> theta(n);
  for (int i = 0; i < n; ++i) {
    theta[i] = i == slack ? lp.add_variable(0.0, 0.0, 0.0) : lp.add_variable(0.0, -solver::kInf, solver::kInf);
  }
  std::vector<int> flow(nb);
  for (int k = 0; k < nb; ++k) {
    const auto& br = model.branches[k];
    double lim = options.limits_mw.empty() ? br.rate_mva : options.limits_mw[k];
    if (!(lim > 0.0)) lim = solver::kInf;
    flow[k] = lp.add_variable(0.0, -lim, lim);
  }
  for (int k = 0; k < nb; ++k) {
    const auto& br = model.branches[k];
    double y = base / br.x;
    solver::Constraint row;
    row.cols = {flow[k], theta[br.from], theta[br.to]};
    row.coefs = {1.0, -y, y};
    row.sense = solver::Sense::kEqual;
    row.rhs = 0.0;
    row.name = "flow " + br.id;
    lp.add_constraint(std::move(row));
  }
  std::vector<solver::Constraint> balance(n);
  for (int i = 0; i < n; ++i) {
    balance[i].sense = solver::Sense::kEqual;
    balance[i].rhs = bus_rhs[i];
    balance[i].name = "balance " + model.buses[i].id;
  }
  for (int g = 0; g < ng; ++g) {
    for (int v : seg_vars[g]) {
      balance[model.generators[g].bus].cols.push_back(v);
      balance[model.generators[g].bus].coefs.push_back(1.0);
    }
  }
  for (int k = 0; k < nb; ++k) {
    const auto& br = model.branches[k];
    balance[br.from].cols.push_back(flow[k]);
    balance[br.from].coefs.push_back(-1.0);
    balance[br.to].cols.push_back(flow[k]);
    balance[br.to].coefs.push_back(1.0);
  }
  for (auto& row : balance) lp.add_constraint(std::move(row));

  auto res = solver::solve_lp(lp);
  OPFSolution sol;
  sol.iterations = res.iterations;
  if (res.status != solver::LpStatus::kOptimal) {
    sol.feasible = false;
    std::string where = res.worst_row >= 0 ? lp.rows()[res.worst_row].name : std::string("unknown constraint");
    sol.violations.push_back(fmt::format("DC OPF {}: {}", solver::to_string(res.status), where));
    return sol;
  }
  sol.feasible = true;
  sol.pg_mw.assign(ng, 0.0);
  for (int g = 0; g < ng; ++g) {
    double p = floor[g];
    for (int v : seg_vars[g]) p += res.x[v];
    sol.pg_mw[g] = p;
  }
  sol.qg_mvar.assign(ng, 0.0);
  sol.condenser_q.assign(model.condensers.size(), 0.0);
  sol.theta_rad.resize(n);
  sol.vm_pu.assign(n, 1.0);
  for (int i = 0; i < n; ++i) sol.theta_rad[i] = res.x[theta[i]];
  sol.flow_mw.resize(nb);
  sol.loading.assign(nb, 0.0);
  for (int k = 0; k < nb; ++k) {
    sol.flow_mw[k] = res.x[flow[k]];
    double rate = model.branches[k].rate_mva;
    if (rate > 0.0) sol.loading[k] = std::abs(sol.flow_mw[k]) / rate;
    if (sol.loading[k] >= options.binding_threshold) ++sol.binding_lines;
    sol.max_loading = std::max(sol.max_loading, sol.loading[k]);
  }
  sol.total_pg_mw = std::accumulate(sol.pg_mw.begin(), sol.pg_mw.end(), 0.0);
  sol.objective = dispatch_cost(model, sol.pg_mw);
  return sol;
}

namespace {

struct Admittance {
  std::vector<Complex> diag;
  std::vector<std::vector<std::pair<int, Complex>>> off;  // merged per neighbor
};

Admittance build_ybus(const GridModel& model) {
  const int n = model.num_buses();
  Admittance y;
  y.diag.assign(n, Complex{});
  y.off.assign(n, {});
  auto add_off = [&](int i, int j, Complex v) {
    for (auto& [k, val] : y.off[i]) {
      if (k == j) {
        val += v;
        return;
      }
    }
    y.off[i].emplace_back(j, v);
  };
  for (const auto& br : model.branches) {
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex sh(0.0, br.b / 2.0);
    y.diag[br.from] += ys + sh;
    y.diag[br.to] += ys + sh;
    add_off(br.from, br.to, -ys);
    add_off(br.to, br.from, -ys);
  }
  return y;
}

std::vector<Complex> injected_power(const Admittance& y, const std::vector<double>& vm,
                                    const std::vector<double>& th) {
  const int n = static_cast<int>(vm.size());
  std::vector<Complex> v(n), s(n);
  for (int i = 0; i < n; ++i) v[i] = std::polar(vm[i], th[i]);
  for (int i = 0; i < n; ++i) {
    Complex current = y.diag[i] * v[i];
    for (const auto& [j, yij] : y.off[i]) current += yij * v[j];
    s[i] = v[i] * std::conj(current);
  }
  return s;
}

enum class BusType { kPQ, kPV, kSlack };

}  // namespace

PFSolution ac_powerflow(const GridModel& model, std::span<const double> pg_mw, std::span<const double> bus_load_mw,
                        const AcOptions& options) {
  const int n = model.num_buses();
  const int ng = static_cast<int>(model.generators.size());
  const double base = model.base_mva;
  const int slack = options.slack >= 0 ? options.slack : choose_slack(model, pg_mw);
  if (n > 0) check_connected(model, slack);
  auto ybus = build_ybus(model);

  double q_ratio = std::tan(std::acos(std::clamp(model.load_power_factor, 0.0, 1.0)));
  std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0), q_load(n, 0.0), qmax(n, 0.0), qmin(n, 0.0);
  std::vector<bool> online(ng, false);
  for (int i = 0; i < n; ++i) {
    q_load[i] = bus_load_mw[i] * q_ratio / base;
    p_spec[i] = -bus_load_mw[i] / base;
    q_spec[i] = -q_load[i];
  }
  for (int g = 0; g < ng; ++g) {
    const auto& gen = model.generators[g];
    p_spec[gen.bus] += pg_mw[g] / base;
    if (pg_mw[g] > 1e-6) {
      online[g] = true;
      qmax[gen.bus] += gen.qmax_mvar / base;
      qmin[gen.bus] += gen.qmin_mvar / base;
    }
  }
  for (const auto& c : model.condensers) {
    if (!c.active) continue;
    qmax[c.bus] += c.qmax_mvar / base;
    qmin[c.bus] += c.qmin_mvar() / base;
  }
  std::vector<BusType> type(n, BusType::kPQ);
  for (int i = 0; i < n; ++i) {
    if (qmax[i] > qmin[i]) type[i] = BusType::kPV;
  }
  if (n > 0) type[slack] = BusType::kSlack;

  std::vector<double> vm(n, options.v_setpoint), th(n, 0.0);
  PFSolution pf;
  int total_iterations = 0;
  bool converged = false;
  double worst = 0.0;
  int worst_bus = -1;

  for (int round = 0; round <= n; ++round) {
    std::vector<int> ang_idx(n, -1), mag_idx(n, -1);
    int dim = 0;
    for (int i = 0; i < n; ++i) {
      if (type[i] != BusType::kSlack) ang_idx[i] = dim++;
    }
    for (int i = 0; i < n; ++i) {
      if (type[i] == BusType::kPQ) mag_idx[i] = dim++;
    }
    converged = false;
    for (int it = 0;; ++it) {
      auto s = injected_power(ybus, vm, th);
      std::vector<double> f(dim, 0.0);
      worst = 0.0;
      worst_bus = -1;
      for (int i = 0; i < n; ++i) {
        if (ang_idx[i] >= 0) {
          f[ang_idx[i]] = s[i].real() - p_spec[i];
          if (std::abs(f[ang_idx[i]]) > worst) {
            worst = std::abs(f[ang_idx[i]]);
            worst_bus = i;
          }
        }
        if (mag_idx[i] >= 0) {
          f[mag_idx[i]] = s[i].imag() - q_spec[i];
          if (std::abs(f[mag_idx[i]]) > worst) {
            worst = std::abs(f[mag_idx[i]]);
            worst_bus = i;
          }
        }
      }
      if (worst <= options.tolerance) {
        converged = true;
        break;
      }
      if (it >= options.max_iterations || !std::isfinite(worst)) break;

      solver::SparseMatrix jac(dim);
      for (int i = 0; i < n; ++i) {
        if (ang_idx[i] < 0 && mag_idx[i] < 0) continue;
        double gii = ybus.diag[i].real(), bii = ybus.diag[i].imag();
        double pi = s[i].real(), qi = s[i].imag(), vi = vm[i];
        int rp = ang_idx[i], rq = mag_idx[i];
        if (rp >= 0) {
          jac.add(rp, ang_idx[i], -qi - bii * vi * vi);
          if (mag_idx[i] >= 0) jac.add(rp, mag_idx[i], pi / vi + gii * vi);
        }
        if (rq >= 0) {
          jac.add(rq, ang_idx[i], pi - gii * vi * vi);
          jac.add(rq, mag_idx[i], qi / vi - bii * vi);
        }
        for (const auto& [k, yik] : ybus.off[i]) {
          double g = yik.real(), b = yik.imag();
          double t = th[i] - th[k];
          double st = std::sin(t), ct = std::cos(t);
          if (rp >= 0) {
            if (ang_idx[k] >= 0) jac.add(rp, ang_idx[k], vi * vm[k] * (g * st - b * ct));
            if (mag_idx[k] >= 0) jac.add(rp, mag_idx[k], vi * (g * ct + b * st));
          }
          if (rq >= 0) {
            if (ang_idx[k] >= 0) jac.add(rq, ang_idx[k], -vi * vm[k] * (g * ct + b * st));
            if (mag_idx[k] >= 0) jac.add(rq, mag_idx[k], vi * (g * st - b * ct));
          }
        }
      }
      jac.compress();
      for (double& v : f) v = -v;
      std::vector<double> dx;
      try {
        dx = solver::solve_linear(jac, f);
      } catch (const NumericalError&) {
        break;
      }
      for (int i = 0; i < n; ++i) {
        if (ang_idx[i] >= 0) th[i] += dx[ang_idx[i]];
        if (mag_idx[i] >= 0) vm[i] += dx[mag_idx[i]];
      }
      ++total_iterations;
    }
    if (!converged || !options.enforce_q_limits) break;

    // Buses whose reactive output leaves the device range hold Q at the limit.
    auto s = injected_power(ybus, vm, th);
    bool switched = false;
    for (int i = 0; i < n; ++i) {
      if (type[i] != BusType::kPV) continue;
      double qg = s[i].imag() + q_load[i];
      if (qg > qmax[i] + 1e-9) {
        type[i] = BusType::kPQ;
        q_spec[i] = qmax[i] - q_load[i];
        switched = true;
      } else if (qg < qmin[i] - 1e-9) {
        type[i] = BusType::kPQ;
        q_spec[i] = qmin[i] - q_load[i];
        switched = true;
      }
    }
    if (!switched) break;
  }

  pf.converged = converged;
  pf.iterations = total_iterations;
  pf.max_mismatch = worst;
  pf.worst_bus = worst_bus;
  pf.vm_pu = vm;
  pf.theta_rad = th;

  const int nb = model.num_branches();
  pf.p_from_mw.assign(nb, 0.0);
  pf.p_to_mw.assign(nb, 0.0);
  pf.q_from_mvar.assign(nb, 0.0);
  pf.q_to_mvar.assign(nb, 0.0);
  pf.losses_mw = 0.0;
  for (int k = 0; k < nb; ++k) {
    const auto& br = model.branches[k];
    Complex vf = std::polar(vm[br.from], th[br.from]);
    Complex vt = std::polar(vm[br.to], th[br.to]);
    Complex ys = 1.0 / Complex(br.r, br.x);
    Complex sh(0.0, br.b / 2.0);
    Complex sf = vf * std::conj((vf - vt) * ys + vf * sh) * base;
    Complex st = vt * std::conj((vt - vf) * ys + vt * sh) * base;
    pf.p_from_mw[k] = sf.real();
    pf.q_from_mvar[k] = sf.imag();
    pf.p_to_mw[k] = st.real();
    pf.q_to_mvar[k] = st.imag();
    pf.losses_mw += sf.real() + st.real();
  }

  auto s = injected_power(ybus, vm, th);
  pf.pg_mw.assign(pg_mw.begin(), pg_mw.end());
  pf.qg_mvar.assign(ng, 0.0);
  pf.condenser_q.assign(model.condensers.size(), 0.0);
  if (n > 0) {
    double p_slack = s[slack].real() * base + bus_load_mw[slack];
    double scheduled = 0.0;
    int slack_gen = -1;
    for (int g = 0; g < ng; ++g) {
      if (model.generators[g].bus != slack) continue;
      scheduled += pg_mw[g];
      if (slack_gen < 0 || (online[g] && !online[slack_gen]) ||
          (online[g] == online[slack_gen] && model.generators[g].pmax_mw > model.generators[slack_gen].pmax_mw)) {
        slack_gen = g;
      }
    }
    if (slack_gen >= 0) {
      pf.pg_mw[slack_gen] += p_slack - scheduled;
      if (pf.pg_mw[slack_gen] > 1e-6 && !online[slack_gen]) {
        online[slack_gen] = true;
        qmax[slack] += model.generators[slack_gen].qmax_mvar / base;
        qmin[slack] += model.generators[slack_gen].qmin_mvar / base;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double qg = (s[i].imag() + q_load[i]) * base;
    double range = 0.0;
    for (int g = 0; g < ng; ++g) {
      if (online[g] && model.generators[g].bus == i) range += model.generators[g].qmax_mvar;
    }
    for (const auto& c : model.condensers) {
      if (c.active && c.bus == i) range += c.qmax_mvar;
    }
    if (range <= 0.0) continue;
    for (int g = 0; g < ng; ++g) {
      if (online[g] && model.generators[g].bus == i) pf.qg_mvar[g] = qg * model.generators[g].qmax_mvar / range;
    }
    for (std::size_t c = 0; c < model.condensers.size(); ++c) {
      const auto& cond = model.condensers[c];
      if (cond.active && cond.bus == i) pf.condenser_q[c] = qg * cond.qmax_mvar / range;
    }
  }
  return pf;
}

std::vector<double> ac_mismatch(const GridModel& model, const PFSolution& pf, std::span<const double> bus_load_mw) {
  const int n = model.num_buses();
  const double base = model.base_mva;
  double q_ratio = std::tan(std::acos(std::clamp(model.load_power_factor, 0.0, 1.0)));
  std::vector<double> p(n, 0.0), q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    p[i] = -bus_load_mw[i];
    q[i] = -bus_load_mw[i] * q_ratio;
  }
  for (std::size_t g = 0; g < model.generators.size(); ++g) {
    p[model.generators[g].bus] += pf.pg_mw[g];
    q[model.generators[g].bus] += pf.qg_mvar[g];
  }
  for (std::size_t c = 0; c < model.condensers.size(); ++c) {
    if (model.condensers[c].active) q[model.condensers[c].bus] += pf.condenser_q[c];
  }
  for (int k = 0; k < model.num_branches(); ++k) {
    const auto& br = model.branches[k];
    p[br.from] -= pf.p_from_mw[k];
    q[br.from] -= pf.q_from_mvar[k];
    p[br.to] -= pf.p_to_mw[k];
    q[br.to] -= pf.q_to_mvar[k];
  }
  std::vector<double> out;
  out.reserve(2 * n);
  for (int i = 0; i < n; ++i) out.push_back(p[i] / base);
  for (int i = 0; i < n; ++i) out.push_back(q[i] / base);
  return out;
}

namespace {

OPFSolution surrogate_attempt(const GridModel& model, std::span<const double> caps,
                              std::span<const double> bus_load_mw, const AcOpfOptions& options) {
  const int nb = model.num_branches();
  const int ng = static_cast<int>(model.generators.size());
  auto dc_opts = options.dc;
  if (dc_opts.limits_mw.empty()) {
    dc_opts.limits_mw.resize(nb);
    for (int k = 0; k < nb; ++k) dc_opts.limits_mw[k] = model.branches[k].rate_mva;
  }
  std::vector<double> work_caps(caps.begin(), caps.end());
  auto dc = dc_opf(model, work_caps, bus_load_mw, dc_opts);
  if (!dc.feasible) return dc;

  const double total_load = std::accumulate(bus_load_mw.begin(), bus_load_mw.end(), 0.0);
  std::vector<double> adjusted(bus_load_mw.begin(), bus_load_mw.end());
  PFSolution ac;
  int iterations = 0;
  for (int outer = 0; outer < std::max(1, options.outer_iterations); ++outer) {
    auto ac_opts = options.ac;
    if (ac_opts.slack < 0) ac_opts.slack = choose_slack(model, dc.pg_mw);
    ac = ac_powerflow(model, dc.pg_mw, bus_load_mw, ac_opts);
    iterations += ac.iterations;
    if (!ac.converged) break;
    double gap = std::accumulate(ac.pg_mw.begin(), ac.pg_mw.end(), 0.0) - dc.total_pg_mw;

    bool tightened = false;
    auto limits = dc_opts.limits_mw;
    for (int k = 0; k < nb; ++k) {
      double rate = model.branches[k].rate_mva;
      double flow = std::max(std::hypot(ac.p_from_mw[k], ac.q_from_mvar[k]), std::hypot(ac.p_to_mw[k], ac.q_to_mvar[k]));
      if (rate > 0.0 && flow > rate * (1.0 + 1e-9)) {
        limits[k] *= rate / flow;
        tightened = true;
      }
    }
    // Units that pick up losses beyond their capacity are capped in the redispatch.
    bool capped = false;
    auto trial_caps = work_caps;
    for (int g = 0; g < ng; ++g) {
      double over = ac.pg_mw[g] - caps[g] - std::max(0.0, gap);
      if (over > 1e-6 * std::max(1.0, total_load)) {
        trial_caps[g] = std::max(0.0, std::min(trial_caps[g], dc.pg_mw[g]) - over - options.balance_tol_mw);
        capped = true;
      }
    }
    if (std::abs(gap) <= options.balance_tol_mw && !tightened && !capped) break;
    if (outer + 1 >= options.outer_iterations) break;

    if (total_load > 0.0) {
      double scale = 1.0 + ac.losses_mw / total_load;
      for (std::size_t i = 0; i < adjusted.size(); ++i) adjusted[i] = bus_load_mw[i] * scale;
    }
    auto trial_opts = dc_opts;
    trial_opts.limits_mw = limits;
    auto next = dc_opf(model, trial_caps, adjusted, trial_opts);
    if (!next.feasible) break;
    dc_opts = std::move(trial_opts);
    work_caps = std::move(trial_caps);
    dc = std::move(next);
  }

  OPFSolution sol;
  sol.iterations = iterations;
  if (!ac.converged) {
    sol.feasible = false;
    std::string where = ac.worst_bus >= 0 ? model.buses[ac.worst_bus].id : std::string("unknown");
    sol.violations.push_back(fmt::format("AC power flow did not converge; worst mismatch {:.3e} pu at bus {}",
                                         ac.max_mismatch, where));
    return sol;
  }

  sol.pg_mw = ac.pg_mw;
  sol.qg_mvar = ac.qg_mvar;
  sol.condenser_q = ac.condenser_q;
  sol.vm_pu = ac.vm_pu;
  sol.theta_rad = ac.theta_rad;
  sol.flow_mw = ac.p_from_mw;
  sol.losses_mw = ac.losses_mw;
  sol.total_pg_mw = std::accumulate(sol.pg_mw.begin(), sol.pg_mw.end(), 0.0);
  sol.objective = dispatch_cost(model, sol.pg_mw);
  sol.loading.assign(nb, 0.0);
  for (int k = 0; k < nb; ++k) {
    double rate = model.branches[k].rate_mva;
    double s = std::max(std::hypot(ac.p_from_mw[k], ac.q_from_mvar[k]), std::hypot(ac.p_to_mw[k], ac.q_to_mvar[k]));
    if (rate > 0.0) sol.loading[k] = s / rate;
    if (sol.loading[k] >= options.dc.binding_threshold) ++sol.binding_lines;
    sol.max_loading = std::max(sol.max_loading, sol.loading[k]);
    if (sol.loading[k] > 1.0 + 1e-6) {
      sol.violations.push_back(fmt::format("branch {} loading {:.4f}", model.branches[k].id, sol.loading[k]));
    }
  }
  for (int i = 0; i < model.num_buses(); ++i) {
    if (ac.vm_pu[i] < options.vmin - 1e-6 || ac.vm_pu[i] > options.vmax + 1e-6) {
      sol.violations.push_back(fmt::format("bus {} voltage {:.4f}", model.buses[i].id, ac.vm_pu[i]));
    }
  }
  const double ptol = 1e-6 * std::max(1.0, total_load);
  for (int g = 0; g < ng; ++g) {
    const auto& gen = model.generators[g];
    double p = sol.pg_mw[g];
    if (p > caps[g] + ptol || (p > 1e-6 && p < std::min(gen.pmin_mw, caps[g]) - ptol) || p < -ptol) {
      sol.violations.push_back(fmt::format("generator {} output {:.3f} MW outside limits", gen.id, p));
    }
    double q = sol.qg_mvar[g];
    if (q > gen.qmax_mvar + 1e-6 || q < gen.qmin_mvar - 1e-6) {
      sol.violations.push_back(fmt::format("generator {} reactive {:.3f} MVAr outside limits", gen.id, q));
    }
  }
  for (std::size_t c = 0; c < model.condensers.size(); ++c) {
    const auto& cond = model.condensers[c];
    double q = sol.condenser_q[c];
    if (cond.active && (q > cond.qmax_mvar + 1e-6 || q < cond.qmin_mvar() - 1e-6)) {
      sol.violations.push_back(
          fmt::format("condenser at bus {} reactive {:.3f} MVAr outside limits", model.buses[cond.bus].id, q));
    }
  }
  sol.feasible = sol.violations.empty();
  return sol;
}

}  // namespace

OPFSolution ac_opf_surrogate(const GridModel& model, std::span<const double> caps,
                             std::span<const double> bus_load_mw, const AcOpfOptions& options) {
  auto sol = surrogate_attempt(model, caps, bus_load_mw, options);
  if (sol.feasible || sol.vm_pu.empty()) return sol;
  // Move the regulated voltage in steps toward the violated side's opposite
  // limit until the limits hold.
  const auto [lo, hi] = std::minmax_element(sol.vm_pu.begin(), sol.vm_pu.end());
  const bool lower = *hi > options.vmax + 1e-6 && *lo >= options.vmin - 1e-6;
  const double target = lower ? options.vmin : options.vmax;
  auto opts = options;
  while (!sol.feasible && std::abs(target - opts.ac.v_setpoint) > 1e-9) {
    double step = std::min(options.setpoint_step, std::abs(target - opts.ac.v_setpoint));
    opts.ac.v_setpoint += lower ? -step : step;
    auto next = surrogate_attempt(model, caps, bus_load_mw, opts);
    if (next.vm_pu.empty()) break;
    sol = std::move(next);
  }
  return sol;
}

std::string solutions_csv(std::span<const int> hours, std::span<const OPFSolution> solutions) {
  std::string out = "hour,objective,total_pg,binding_lines,max_loading,converged\n";
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    const auto& s = solutions[i];
    out += fmt::format("{},{:.17g},{:.17g},{},{:.17g},{}\n", hours[i], s.objective, s.total_pg_mw, s.binding_lines,
                       s.max_loading, s.feasible ? 1 : 0);
  }
  return out;
}

}  // namespace gridsynth::powerflow
