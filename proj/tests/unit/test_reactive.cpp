#include <doctest.h>

#include <cmath>

#include "gridsynth/error.hpp"
#include "gridsynth/reactive.hpp"

using namespace gridsynth;
using namespace gridsynth::reactive;

namespace {

GridModel chain(int n, double r, double x, double rate) {
  GridModel m;
  for (int i = 0; i < n; ++i) {
    Bus b;
    b.id = "B" + std::to_string(i + 1);
    m.buses.push_back(b);
  }
  for (int i = 1; i < n; ++i) {
    Branch br;
    br.id = "L" + std::to_string(i);
    br.from = i - 1;
    br.to = i;
    br.r = r;
    br.x = x;
    br.b = 0.01;
    br.rate_mva = rate;
    m.branches.push_back(br);
  }
  Generator g;
  g.id = "G1";
  g.bus = 0;
  g.pmax_mw = 1000.0;
  g.qmax_mvar = 600.0;
  g.qmin_mvar = -600.0;
  g.cost = CostCurve::linear(10.0);
  m.generators.push_back(g);
  return m;
}

std::vector<double> caps(const GridModel& m) {
  std::vector<double> c;
  for (const auto& g : m.generators) c.push_back(g.pmax_mw);
  return c;
}

}  // namespace

TEST_CASE("doubling touches line ratings only") {
  auto m = chain(3, 0.01, 0.1, 100.0);
  Branch tx;
  tx.id = "T";
  tx.kind = BranchKind::kTransformer;
  tx.from = 0;
  tx.to = 2;
  tx.x = 0.05;
  tx.rate_mva = 300.0;
  m.branches.push_back(tx);
  auto before = m.branches;
  auto saved = double_limits(m);
  for (std::size_t k = 0; k < before.size(); ++k) {
    CHECK(saved.rate_mva[k] == before[k].rate_mva);
    CHECK(m.branches[k].r == before[k].r);
    CHECK(m.branches[k].x == before[k].x);
    CHECK(m.branches[k].b == before[k].b);
  }
  CHECK(m.branches[0].rate_mva == 200.0);
  CHECK(m.branches[1].rate_mva == 200.0);
  CHECK(m.branches[2].rate_mva == 300.0);
}

TEST_CASE("a grid feasible without support prunes to below the coverage floor") {
  auto m = chain(10, 0.001, 0.01, 500.0);
  std::vector<double> load(10, 5.0);
  load[0] = 0.0;
  auto saved = double_limits(m);
  auto res = place_and_prune(m, caps(m), load, {});
  CHECK(res.coverage_reached);
  CHECK(res.active < 2);
  CHECK(res.rollbacks == 0);
  CHECK(res.solution.feasible);
  (void)saved;
}

TEST_CASE("a long radial feeder keeps support at its far end") {
  auto m = chain(6, 0.002, 0.06, 400.0);
  std::vector<double> load{0.0, 20.0, 20.0, 20.0, 20.0, 120.0};
  ReactiveConfig cfg;
  auto res = place_and_prune(m, caps(m), load, cfg);
  REQUIRE(res.solution.feasible);
  CHECK(res.coverage_reached);
  int prev = static_cast<int>(m.buses.size());
  for (const auto& it : res.trace) {
    CHECK(it.active_condensers <= prev);
    prev = it.active_condensers;
  }
  CHECK(m.condensers[5].active);

  // The kept set must be AC feasible on its own.
  auto check = powerflow::ac_opf_surrogate(m, caps(m), load, cfg.opf);
  CHECK(check.feasible);
  for (double v : check.vm_pu) {
    CHECK(v >= cfg.opf.vmin - 1e-6);
    CHECK(v <= cfg.opf.vmax + 1e-6);
  }
  for (double l : check.loading) CHECK(l <= 1.0 + 1e-6);
}

TEST_CASE("infeasibility with full coverage is an error") {
  auto m = chain(3, 0.01, 0.1, 10.0);
  std::vector<double> load{0.0, 0.0, 100.0};
  CHECK_THROWS_AS(place_and_prune(m, caps(m), load, {}), InfeasibleError);
}

TEST_CASE("restore keeps heavily loaded lines doubled") {
  auto m = chain(4, 0.01, 0.1, 100.0);
  auto saved = double_limits(m);
  std::vector<double> loading{0.10, 0.70, 0.50};
  int kept = restore_limits(m, saved, loading, 0.5);
  CHECK(kept == 2);
  CHECK(m.branches[0].rate_mva == 100.0);
  CHECK(!m.branches[0].doubled);
  CHECK(m.branches[1].rate_mva == 200.0);
  CHECK(m.branches[1].doubled);
  CHECK(m.branches[2].doubled);
  for (int k = 0; k < 3; ++k) CHECK(m.branches[k].rate_mva >= saved.rate_mva[k]);
}

TEST_CASE("full pass leaves the peak case AC feasible") {
  auto m = chain(8, 0.003, 0.04, 150.0);
  std::vector<double> load{0.0, 30.0, 30.0, 30.0, 30.0, 30.0, 30.0, 60.0};
  ReactiveConfig cfg;
  auto saved = double_limits(m);
  auto res = place_and_prune(m, caps(m), load, cfg);
  restore_limits(m, saved, res.solution.loading, cfg.restore_threshold);
  auto pf = powerflow::ac_powerflow(m, res.solution.pg_mw, load);
  REQUIRE(pf.converged);
  for (double v : pf.vm_pu) {
    CHECK(v >= cfg.opf.vmin - 1e-6);
    CHECK(v <= cfg.opf.vmax + 1e-6);
  }
  for (int k = 0; k < m.num_branches(); ++k) {
    double s = std::max(std::hypot(pf.p_from_mw[k], pf.q_from_mvar[k]), std::hypot(pf.p_to_mw[k], pf.q_to_mvar[k]));
    CHECK(s <= m.branches[k].rate_mva * (1.0 + 1e-6));
  }
  CHECK(!trace_jsonl(res).empty());
}

TEST_CASE("fractions are validated") {
  ReactiveConfig cfg;
  cfg.prune_frac = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
