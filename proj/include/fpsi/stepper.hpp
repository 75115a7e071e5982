/** @file stepper.hpp
 *  @brief The time loop: initial-data projection, one implicit-Euler step,
 *         and the full constructive run with per-step records.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fpsi/assembly.hpp"
#include "fpsi/linsolve.hpp"
#include "fpsi/physics.hpp"
#include "fpsi/state.hpp"
#include "fpsi/transform.hpp"

namespace fpsi {

// ===========================================================================
// Initial data
// ===========================================================================

/** Field expressions for the initial state. Volume fields use (x1, x2, x3)
 *  -- the plate pressure uses s -- and midsurface fields use (x1, x2).
 *  Empty vectors / default expressions mean zero. Quasistatic runs must not
 *  prescribe etadot0 (no Biot inertia); wdot0 is likewise rejected when
 *  rho_p = 0.
 */
struct InitialData {
  std::vector<Expr> u0;      ///< ncomp entries (empty = zero)
  Expr w0, wdot0;
  bool has_wdot0 = false;
  Expr pp0;
  std::vector<Expr> eta0;    ///< ncomp entries
  std::vector<Expr> etadot0; ///< ncomp entries
  Expr pb0;
};

/** Interpolate the expressions on the collocation grid x transverse nodes,
 *  verify admissibility, and return the state at t = 0. Essential-trace or
 *  finiteness violations are rejected (ConfigError naming the condition); the
 *  velocity is then projected onto the discrete divergence-free manifold and
 *  `div_correction` (if given) receives the relative size of that projection.
 */
State project_initial_data(const InitialData& init, const Discretization& disc,
                           const PlaneTransform& tr, const PhysicalParams& p,
                           double* div_correction = nullptr);

// ===========================================================================
// One-step driver
// ===========================================================================

/// Per-step record: solver work, permeability clamps, and timing-free
/// provenance for logs and CSV output.
struct StepRecord {
  int n = 0;          ///< step index (state n+1 produced)
  double t = 0.0;     ///< time reached
  SolveReport solve;
  long clamp_count = 0;
};

/** Drives repeated implicit-Euler steps. The condensed step operator is
 *  cached whenever the permeability of consecutive steps is identical
 *  (constant and steady prescribed laws); time-dependent and nonlinear laws
 *  rebuild it each step with the one-step lag (the field for the step to
 *  t^{n+1} is evaluated at t^n / on state n's fluid content).
 */
class RotheDriver {
public:
  RotheDriver(const Discretization& disc, const PhysicalParams& p,
              const PermeabilityModel& perm, double dt,
              IterativeOptions opts = IterativeOptions{});

  /// Advance one step; `src` are the sources already sampled at t^{n+1}.
  State advance(const State& prev, const SampledSources& src, StepRecord* rec = nullptr);

  /// Advance with an externally supplied permeability field (trajectory
  /// replay); bypasses the model evaluation entirely.
  State advance_with_permeability(const State& prev, const PermField& k,
                                  const SampledSources& src, StepRecord* rec = nullptr);

  /// Permeability field used by the most recent step.
  const PermField& last_permeability() const { return last_k_; }

  const PlaneTransform& transform() const { return tr_; }
  const FieldLayout& layout() const { return lay_; }
  double dt() const { return dt_; }

private:
  const Discretization& disc_;
  PhysicalParams p_;
  PermeabilityModel perm_;
  double dt_;
  IterativeOptions opts_;
  FieldLayout lay_;
  PlaneTransform tr_;
  bool cacheable_;
  std::unique_ptr<StepOperator> op_;
  PermField last_k_;

  State run_step(const State& prev, const PermField& k, const SampledSources& src,
                 StepRecord* rec);
};

// ===========================================================================
// Full runs
// ===========================================================================

struct RunSetup {
  PhysicalParams params;
  PermeabilityModel perm;
  double T = 1.0;
  int N = 1;
  SourceProvider sources;            ///< empty = zero sources
  bool strict = false;               ///< per-step admissibility + margin checks
  double strict_tol_rel = 1e-9;      ///< margin tolerance, relative to max(E^0, E^n)
  bool record_permeability = false;  ///< keep each step's field (replay input)
  const std::vector<PermField>* replay = nullptr; ///< recorded fields to reuse
  IterativeOptions solver;
  std::function<void(const StepRecord&)> on_step; ///< progress callback
};

struct Trajectory {
  std::vector<State> states;       ///< N+1 entries, states[0] = initial
  std::vector<StepRecord> records; ///< N entries
  std::vector<PermField> recorded_permeability; ///< filled when requested
};

/** Run N implicit-Euler steps of size T/N from `init` (already projected /
 *  validated). Throws SolverError with the step index on solve failure and
 *  InvariantViolation when strict checks fail.
 */
Trajectory rothe_run(const RunSetup& cfg, const Discretization& disc, const State& init);

} // namespace fpsi
