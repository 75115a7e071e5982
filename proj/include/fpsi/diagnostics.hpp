/** @file diagnostics.hpp
 *  @brief Energy/dissipation bookkeeping, the per-step energy inequality,
 *         interface residuals, the trace-coupling norm probe, and the
 *         two-trajectory stability experiment.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/physics.hpp"
#include "fpsi/state.hpp"
#include "fpsi/transform.hpp"

namespace fpsi {

// ===========================================================================
// Energy and dissipation
// ===========================================================================

/** Itemized energy/dissipation terms of one state. Energies carry the 1/2
 *  factors; dissipation entries are the undamped rates (multiplied by dt when
 *  they enter the step inequality). All entries are >= 0 and the totals are
 *  the sums of their parts.
 */
struct EnergyReport {
  // Kinetic: 1/2 rho_f ||u||^2, 1/2 rho_p ||wdot||^2, 1/2 rho_b ||etadot||^2.
  double kinetic_fluid = 0.0, kinetic_plate = 0.0, kinetic_biot = 0.0;
  // Potential: 1/2 c_p ||p_p||^2, 1/2 ||eta||_E^2, 1/2 c_b ||p_b||^2,
  // 1/2 D ||lap w||^2, 1/2 gamma ||w||^2.
  double potential_plate_pressure = 0.0, potential_elastic = 0.0;
  double potential_biot_pressure = 0.0, potential_bending = 0.0;
  double potential_spring = 0.0;
  // Dissipation rates: 2 mu_f ||D(u)||^2, beta ||u_tang||^2 at the interface,
  // k_p ||d_s p_p||^2, ||k^{1/2} grad p_b||^2 (collocation form).
  double diss_fluid = 0.0, diss_bjs = 0.0, diss_plate_pressure = 0.0;
  double diss_biot_pressure = 0.0;

  double energy = 0.0;      ///< sum of kinetic + potential terms
  double dissipation = 0.0; ///< sum of dissipation rates
};

/** Evaluate every term by quadrature. The permeability field (and, when it
 *  carries an in-plane fluctuation, the transform) is needed only for the
 *  Darcy dissipation; pass the field used to assemble the step that produced
 *  the state.
 */
EnergyReport compute_energy(const State& s, const Discretization& disc,
                            const PhysicalParams& p, const PermField& k,
                            const PlaneTransform* tr = nullptr);

/** Young-split bound on the source work of one step: each active pairing
 *  (F, phi) contributes young * ||F||^2 + young * ||phi||^2 with young = 1/2,
 *  and pairings with vanishing data contribute exactly zero, so zero-source
 *  margins reduce to the backward-Euler jump terms.
 */
double source_work_bound(const SampledSources& src, const State& s,
                         const Discretization& disc, const PhysicalParams& p);

/** Per-step margins of the discrete energy inequality along a trajectory:
 *    margin_n = E^{n-1} + dt W^n - E^n - dt Diss^n  (n = 1..N),
 *  where W is the Young-split source bound evaluated on step n's data. The
 *  check passes when every margin >= -tol_rel * E^0. The permeability model
 *  is re-evaluated with the same one-step lag the stepper uses.
 */
struct EnergyCheck {
  std::vector<double> energies;     ///< N+1 entries
  std::vector<double> dissipations; ///< N entries, step n at index n-1
  std::vector<double> work_bounds;  ///< N entries
  std::vector<double> margins;      ///< N entries
  double e0 = 0.0;
  double min_margin = 0.0;
  double young_constant = 0.5; ///< split constant recorded for reproducibility
  bool pass = false;
};

EnergyCheck check_energy_inequality(const std::vector<State>& traj,
                                    const Discretization& disc, const PhysicalParams& p,
                                    const PermeabilityModel& perm,
                                    const PlaneTransform& tr,
                                    const SourceProvider& sources, double tol_rel);

// ===========================================================================
// Interface residuals
// ===========================================================================

/** L2(omega_p) norms of the interface conditions. Essential entries vanish to
 *  elimination precision on every constructed state; natural entries measure
 *  how well the weak solution recovers the flux/traction couplings and shrink
 *  under refinement on manufactured problems.
 */
struct InterfaceResiduals {
  // Essential: || eta(.,0) - w e3 || (all components) and || p_p(h/2) - p_b(0) ||.
  double kinematic = 0.0, pressure_trace = 0.0;
  // Natural: || k_p d_s p_p(h/2) - k_b d_3 p_b(0) ||,
  //          || wdot - u_z(0) - k_p d_s p_p(-h/2) ||,
  //          || -sigma_f e3.e3 - p_p(-h/2) ||,
  //          || sigma_f e3.t + beta u.t ||  (summed over tangential comps),
  //          || sigma_b^tot e3 || at x3 = 1 (all components).
  double flux = 0.0, filtration = 0.0, normal_stress = 0.0, bjs = 0.0;
  double biot_traction = 0.0;
};

/** Evaluate the residuals; `correction` (optional) holds manufactured
 *  interface data sampled at the state's time, subtracted before the norms so
 *  manufactured runs measure pure discretization error. The permeability
 *  model supplies the k at the Biot bottom trace (nonlinear laws evaluate on
 *  the state's own fluid content).
 */
InterfaceResiduals interface_residuals(const State& s, const Discretization& disc,
                                       const PlaneTransform& tr, const PhysicalParams& p,
                                       const PermeabilityModel& perm,
                                       const SampledSources* correction = nullptr);

// ===========================================================================
// Trace-coupling norm probe
// ===========================================================================

/** Largest ratios ||eta||_{L2}^2 / ||.||_{sd}^2 and ||p_b||_{L2}^2 / ||.||_{sd}^2
 *  over the constrained space (per-mode generalized eigenproblems, maximized
 *  over modes). With the interface ties removed, zero-mode translations carry
 *  L2 mass at zero sd-energy; the probe then reports divergence instead of a
 *  constant.
 */
struct PoincareReport {
  double c_eta = 0.0, c_pb = 0.0; ///< squared-norm ratios (inf when divergent)
  bool divergent_eta = false, divergent_pb = false;
};

/// `interface_constraints = false` is the ablation variant. Throws ConfigError
/// if the per-mode dense eigenproblem exceeds `dense_cap` rows.
PoincareReport poincare_probe(const Discretization& disc, bool interface_constraints = true,
                              int dense_cap = 2000);

// ===========================================================================
// Stability (uniqueness surrogate)
// ===========================================================================

/** Two zero-source trajectories from initial states base and
 *  base + delta * perturbation; reports max_n E_diff(t_n) / E_diff(t_0) for
 *  the quadratic energy functional of the difference. `valid` is false when
 *  delta = 0 (identical runs, ratio undefined).
 */
struct StabilityReport {
  double ratio = 0.0;
  double e_diff0 = 0.0;
  bool valid = false;
};

StabilityReport stability_experiment(const Discretization& disc, const PhysicalParams& p,
                                     const PermeabilityModel& perm, const State& base,
                                     double T, int N, double delta,
                                     std::uint64_t perturbation_seed);

// ===========================================================================
// Optional spectral-decay report
// ===========================================================================

/** Mode-amplitude profile of eta: for each |xi|_inf shell the maximal modal
 *  L2 amplitude, plus the least-squares decay rate of log-amplitude vs
 *  |xi|_inf (informative only; not an acceptance gate).
 */
struct SpectralDecay {
  std::vector<double> shell_amplitude; ///< index = |xi|_inf
  double decay_rate = 0.0;             ///< slope of log amplitude per shell
};

SpectralDecay spectral_decay_report(const State& s, const Discretization& disc);

} // namespace fpsi
