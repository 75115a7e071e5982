/** @file stepper.cpp
 *  @brief Initial-data projection, the cached one-step driver, and full runs.
 */
#include "fpsi/stepper.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "fpsi/diagnostics.hpp"
#include "fpsi/errors.hpp"

namespace fpsi {

namespace {

/// Interpolate component expressions at (collocation grid) x (mesh nodes)
/// and convert to modal coefficients. The transverse node coordinate is bound
/// to both x3 and s, so fluid/Biot fields use x3 and plate fields use s.
Eigen::MatrixXcd interpolate_field(const std::vector<Expr>& comps, const TransverseMesh& mesh,
                                   const Discretization& disc, const PlaneTransform& tr) {
  const int nn = mesh.n_nodes();
  const int ncomp = static_cast<int>(comps.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(ncomp * nn, disc.n_modes());
  Eigen::VectorXcd phys(tr.n_points()), modes(disc.n_modes());
  for (int c = 0; c < ncomp; ++c) {
    if (comps[static_cast<std::size_t>(c)].is_zero()) continue;
    for (int node = 0; node < nn; ++node) {
      for (int i = 0; i < tr.n_points(); ++i) {
        ExprVars v{};
        const Eigen::Vector2d pt = tr.point(i);
        v.x1 = pt(0);
        v.x2 = pt(1);
        v.x3 = mesh.nodes[static_cast<std::size_t>(node)];
        v.s = v.x3;
        phys(i) = comps[static_cast<std::size_t>(c)].eval(v);
      }
      tr.to_modes(phys, modes);
      out.row(c * nn + node) = modes.transpose();
    }
  }
  return out;
}

Eigen::RowVectorXcd midsurface_modes(const Expr& e, const Discretization& disc,
                                     const PlaneTransform& tr) {
  Eigen::RowVectorXcd out = Eigen::RowVectorXcd::Zero(disc.n_modes());
  if (e.is_zero()) return out;
  Eigen::VectorXcd phys(tr.n_points()), modes(disc.n_modes());
  for (int i = 0; i < tr.n_points(); ++i) {
    ExprVars v{};
    const Eigen::Vector2d pt = tr.point(i);
    v.x1 = pt(0);
    v.x2 = pt(1);
    phys(i) = e.eval(v);
  }
  tr.to_modes(phys, modes);
  out = modes.transpose();
  return out;
}

std::string join_violations(const std::vector<std::string>& v) {
  std::string out;
  for (const std::string& s : v) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

bool same_perm_field(const PermField& a, const PermField& b) {
  if (a.mean.size() != b.mean.size() || a.has_fluct != b.has_fluct) return false;
  if ((a.mean.array() != b.mean.array()).any()) return false;
  if (a.has_fluct) {
    if (a.fluct.rows() != b.fluct.rows() || a.fluct.cols() != b.fluct.cols()) return false;
    if ((a.fluct.array() != b.fluct.array()).any()) return false;
  }
  return true;
}

} // namespace

// ===========================================================================
// Initial data
// ===========================================================================

State project_initial_data(const InitialData& init, const Discretization& disc,
                           const PlaneTransform& tr, const PhysicalParams& p,
                           double* div_correction) {
  validate_params(p);
  const int nc = disc.domain.n_comp();
  const auto check_comp = [nc](const std::vector<Expr>& v, const char* name) {
    if (!v.empty() && static_cast<int>(v.size()) != nc)
      throw ConfigError(std::string(name) + " must have one entry per component");
  };
  check_comp(init.u0, "u0");
  check_comp(init.eta0, "eta0");
  check_comp(init.etadot0, "etadot0");
  if (p.mode != RunMode::DynamicLinear && !init.etadot0.empty())
    throw ConfigError("quasistatic runs recover etadot by difference quotients; "
                      "etadot0 must not be prescribed");
  if (p.rho_p == 0.0 && init.has_wdot0)
    throw ConfigError("wdot0 prescribed but the plate carries no inertia (rho_p = 0)");

  State s = make_state(disc);
  if (!init.u0.empty()) s.u = interpolate_field(init.u0, disc.fluid_velocity, disc, tr);
  s.w.row(0) = midsurface_modes(init.w0, disc, tr);
  if (init.has_wdot0) s.wdot.row(0) = midsurface_modes(init.wdot0, disc, tr);
  if (!init.pp0.is_zero())
    s.pp = interpolate_field({init.pp0}, disc.plate, disc, tr);
  if (!init.eta0.empty()) s.eta = interpolate_field(init.eta0, disc.biot, disc, tr);
  if (!init.etadot0.empty())
    s.etadot = interpolate_field(init.etadot0, disc.biot, disc, tr);
  if (!init.pb0.is_zero())
    s.pb = interpolate_field({init.pb0}, disc.biot, disc, tr);
  s.t = 0.0;
  hermitianize(s, disc);

  // Reject incompatible data outright (everything except the divergence
  // defect, which interpolation cannot be expected to satisfy and which the
  // projection below repairs).
  {
    std::vector<std::string> bad;
    for (std::string& v : state_violations(s, disc))
      if (v.find("divergence") == std::string::npos) bad.push_back(std::move(v));
    if (!bad.empty()) throw ConfigError("initial data rejected: " + join_violations(bad));
  }

  apply_constraints(s, disc);
  const double corr = project_divergence_free(s, disc);
  if (div_correction) *div_correction = corr;
  apply_constraints(s, disc);

  const std::vector<std::string> after = state_violations(s, disc);
  if (!after.empty())
    throw ConfigError("initial data inadmissible after projection: " +
                      join_violations(after));
  return s;
}

// ===========================================================================
// One-step driver
// ===========================================================================

RotheDriver::RotheDriver(const Discretization& disc, const PhysicalParams& p,
                         const PermeabilityModel& perm, double dt, IterativeOptions opts)
    : disc_(disc), p_(p), perm_(perm), dt_(dt), opts_(opts),
      lay_(build_layout(disc)), tr_(disc.domain.d_plane, disc.M, disc.n_colloc),
      cacheable_(!permeability_time_dependent(perm)) {
  validate_params(p_);
  validate_permeability(perm_);
  if (!(dt > 0.0)) throw ConfigError("step size must be positive");
}

State RotheDriver::advance(const State& prev, const SampledSources& src, StepRecord* rec) {
  const PermField k = eval_permeability(perm_, p_, disc_, tr_, prev, prev.t);
  return run_step(prev, k, src, rec);
}

State RotheDriver::advance_with_permeability(const State& prev, const PermField& k,
                                             const SampledSources& src, StepRecord* rec) {
  return run_step(prev, k, src, rec);
}

State RotheDriver::run_step(const State& prev, const PermField& k,
                            const SampledSources& src, StepRecord* rec) {
  // Rebuild the condensed operator only when the permeability actually
  // changed; bitwise-equal fields (constant and steady laws) reuse the cached
  // factorizations, which is exact because assembly is deterministic.
  if (!op_ || !same_perm_field(k, last_k_))
    op_ = std::make_unique<StepOperator>(disc_, lay_, p_, dt_, k, tr_);
  last_k_ = k;

  const Eigen::VectorXcd rhs = assemble_rhs(disc_, lay_, p_, dt_, prev, src);
  SolveReport srep;
  const Eigen::VectorXcd x = solve_step(*op_, rhs, opts_, &srep);

  State next = prev;
  apply_solution(next, disc_, lay_, x);
  next.t = prev.t + dt_;
  next.wdot = (next.w - prev.w) / dt_;
  next.etadot = (next.eta - prev.eta) / dt_;
  if (rec) {
    rec->t = next.t;
    rec->solve = srep;
    rec->clamp_count = k.clamp_count;
  }
  return next;
}

// ===========================================================================
// Full runs
// ===========================================================================

Trajectory rothe_run(const RunSetup& cfg, const Discretization& disc, const State& init) {
  if (cfg.N < 1) throw ConfigError("a run needs at least one step");
  if (!(cfg.T > 0.0)) throw ConfigError("final time must be positive");
  if (cfg.replay && static_cast<int>(cfg.replay->size()) != cfg.N)
    throw ConfigError("replay expects exactly one permeability field per step");

  const double dt = cfg.T / cfg.N;
  RotheDriver driver(disc, cfg.params, cfg.perm, dt, cfg.solver);

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(cfg.N) + 1);
  traj.records.reserve(static_cast<std::size_t>(cfg.N));
  traj.states.push_back(init);

  const SampledSources zero = zero_sources(disc);

  EnergyReport eprev;
  double e0 = 0.0;
  if (cfg.strict) {
    const std::vector<std::string> v = state_violations(init, disc);
    if (!v.empty()) throw InvariantViolation("initial state: " + join_violations(v));
    const PermField k0 =
        eval_permeability(cfg.perm, cfg.params, disc, driver.transform(), init, init.t);
    eprev = compute_energy(init, disc, cfg.params, k0, &driver.transform());
    e0 = eprev.energy;
  }

  for (int n = 1; n <= cfg.N; ++n) {
    const State& prev = traj.states.back();
    SampledSources sampled;
    const SampledSources* sp = &zero;
    if (cfg.sources) {
      sampled = cfg.sources(prev.t + dt);
      sp = &sampled;
    }
    StepRecord rec;
    rec.n = n;
    State next;
    try {
      next = cfg.replay
                 ? driver.advance_with_permeability(
                       prev, (*cfg.replay)[static_cast<std::size_t>(n - 1)], *sp, &rec)
                 : driver.advance(prev, *sp, &rec);
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(n) + ": " + e.what());
    }
    if (cfg.record_permeability)
      traj.recorded_permeability.push_back(driver.last_permeability());

    if (cfg.strict) {
      const std::vector<std::string> v = state_violations(next, disc);
      if (!v.empty())
        throw InvariantViolation("step " + std::to_string(n) + ": " + join_violations(v));
      const EnergyReport er =
          compute_energy(next, disc, cfg.params, driver.last_permeability(),
                         &driver.transform());
      const double work = source_work_bound(*sp, next, disc, cfg.params);
      const double margin = eprev.energy + dt * work - er.energy - dt * er.dissipation;
      const double scale = std::max(e0, er.energy);
      if (margin < -cfg.strict_tol_rel * scale)
        throw InvariantViolation("step " + std::to_string(n) +
                                 ": energy inequality violated (margin " +
                                 std::to_string(margin) + ")");
      eprev = er;
    }

    traj.states.push_back(std::move(next));
    traj.records.push_back(rec);
    if (cfg.on_step) cfg.on_step(traj.records.back());
  }
  return traj;
}

} // namespace fpsi
