#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridsynth/model.hpp"
#include "gridsynth/solver.hpp"

namespace gridsynth::powerflow {

struct PFSolution {
  std::vector<double> theta_rad;  // per bus
  std::vector<double> vm_pu;      // per bus; 1.0 for DC
  std::vector<double> p_from_mw;  // per branch, measured at the from end
  std::vector<double> p_to_mw;
  std::vector<double> q_from_mvar;
  std::vector<double> q_to_mvar;
  std::vector<double> pg_mw;          // per generator
  std::vector<double> qg_mvar;        // per generator
  std::vector<double> condenser_q;    // per condenser
  double losses_mw = 0.0;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;  // pu
  int worst_bus = -1;
};

/// Real-power injection per bus: generation minus load (MW).
std::vector<double> bus_injections(const GridModel& model, std::span<const double> pg_mw,
                                   std::span<const double> bus_load_mw);

/// Bus of the largest-capacity generator with pg above 1e-6 MW (all
/// generators when `pg_mw` is empty); bus 0 if there is none.
int choose_slack(const GridModel& model, std::span<const double> pg_mw = {});

/// Solves B' theta = P with theta(slack) = 0; the slack absorbs any imbalance.
/// Throws NumericalError naming a bus when part of the network is islanded.
PFSolution dc_powerflow(const GridModel& model, std::span<const double> injection_mw, int slack = -1);

struct DcOpfOptions {
  int cost_segments = 3;
  /// Generators allowed to run; empty means all.
  std::vector<bool> committed;
  /// Per-branch limit override (MW); empty means rate_mva.
  std::vector<double> limits_mw;
  double binding_threshold = 0.9999;
};

struct OPFSolution {
  bool feasible = false;
  std::vector<double> pg_mw;
  std::vector<double> qg_mvar;
  std::vector<double> condenser_q;
  std::vector<double> flow_mw;   // per branch, DC or from-end AC real flow
  std::vector<double> loading;   // per branch, |flow| (or MVA) / rating
  std::vector<double> vm_pu;
  std::vector<double> theta_rad;
  double objective = 0.0;  // true cost of pg, $/h
  double total_pg_mw = 0.0;
  double losses_mw = 0.0;
  int binding_lines = 0;
  double max_loading = 0.0;
  int iterations = 0;
  std::vector<std::string> violations;
};

/// Cost of a dispatch over units producing more than 1e-6 MW.
double dispatch_cost(const GridModel& model, std::span<const double> pg_mw);

/// Least-cost dispatch under DC flow and hard branch limits.
OPFSolution dc_opf(const GridModel& model, std::span<const double> caps, std::span<const double> bus_load_mw,
                   const DcOpfOptions& options = {});

struct AcOptions {
  double tolerance = 1e-8;  // pu
  int max_iterations = 30;
  double v_setpoint = 1.0;
  bool enforce_q_limits = true;
  int slack = -1;
};

/// Newton-Raphson power flow in polar form. Buses with an online generator or
/// an active condenser regulate voltage until their reactive limit binds.
PFSolution ac_powerflow(const GridModel& model, std::span<const double> pg_mw, std::span<const double> bus_load_mw,
                        const AcOptions& options = {});

/// Complex power mismatch (pu) of a solved state, evaluated directly from
/// branch flows rather than the Newton internals.
std::vector<double> ac_mismatch(const GridModel& model, const PFSolution& pf, std::span<const double> bus_load_mw);

struct AcOpfOptions {
  DcOpfOptions dc;
  AcOptions ac;
  int outer_iterations = 10;
  double balance_tol_mw = 1e-3;
  double vmin = 0.95;
  double vmax = 1.05;
  double setpoint_step = 0.01;
};

/// DC OPF dispatch, AC power flow, loss redistribution and limit
/// tightening, followed by voltage, thermal and generator limit checks.
/// When limits fail, the regulated voltage setpoint moves in `setpoint_step`
/// increments toward vmax (or toward vmin on overvoltage) and the dispatch is
/// repeated.
OPFSolution ac_opf_surrogate(const GridModel& model, std::span<const double> caps,
                             std::span<const double> bus_load_mw, const AcOpfOptions& options = {});

/// CSV `hour,objective,total_pg,binding_lines,max_loading,converged`.
std::string solutions_csv(std::span<const int> hours, std::span<const OPFSolution> solutions);

}  // namespace gridsynth::powerflow
