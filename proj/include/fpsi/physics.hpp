/** @file physics.hpp
 *  @brief Physical parameters, run modes, permeability models, and source
 *         terms of the coupled fluid / poroelastic-plate / Biot system.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/expression.hpp"
#include "fpsi/geometry.hpp"
#include "fpsi/state.hpp"
#include "fpsi/transform.hpp"

namespace fpsi {

// ===========================================================================
// Parameters
// ===========================================================================

enum class RunMode {
  DynamicLinear,       ///< full inertia, constant-in-content permeability
  QuasistaticLinear,   ///< rho_b = 0, linear permeability
  QuasistaticNonlinear ///< rho_b = 0, permeability responds to fluid content
};

const char* run_mode_name(RunMode m);

struct PhysicalParams {
  // Fluid.
  double rho_f = 1.0; ///< density
  double mu_f = 1.0;  ///< viscosity; stress is 2 mu_f D(u) - p_f I
  double beta = 1.0;  ///< tangential slip friction on the interface

  // Plate (transversely poroelastic, midsurface dynamics).
  double rho_p = 1.0;   ///< areal density
  double D_bend = 1.0;  ///< bending rigidity
  double gamma = 1.0;   ///< transverse spring stiffness
  double alpha_p = 1.0; ///< plate Biot-Willis coupling
  double c_p = 1.0;     ///< plate storage coefficient
  double k_p = 1.0;     ///< transverse plate permeability

  // Biot layer.
  double rho_b = 1.0;    ///< density (must be 0 in quasistatic modes)
  double mu_b = 1.0;     ///< shear modulus
  double lambda_b = 1.0; ///< first Lame parameter
  double alpha_b = 1.0;  ///< Biot-Willis coupling
  double c_b = 1.0;      ///< storage coefficient
  double mu_v = 0.0;     ///< viscoelastic shear regularization (on eta rate)
  double lambda_v = 0.0; ///< viscoelastic volumetric regularization

  RunMode mode = RunMode::DynamicLinear;
};

/// Throws ConfigError on inconsistent parameters (negative coefficients,
/// inertia in quasistatic modes, vanishing plate storage c_p).
void validate_params(const PhysicalParams& p);

// ===========================================================================
// Permeability
// ===========================================================================

enum class PermeabilityKind {
  Constant,  ///< k = k0 everywhere
  SpaceTime, ///< k = k(x1, x2, x3, t), a prescribed positive expression
  Nonlinear  ///< k = clamp(f(zeta_b), k_min, k_max), zeta_b the fluid content
};

struct PermeabilityModel {
  PermeabilityKind kind = PermeabilityKind::Constant;
  double k0 = 1.0;
  Expr spacetime; ///< SpaceTime law, vars x1 x2 x3 t
  Expr response;  ///< Nonlinear law f(z), var z
  double k_min = 0.5, k_max = 1.5;
};

void validate_permeability(const PermeabilityModel& m);

/// True when the permeability of step n+1 depends on data of step n (the
/// SpaceTime law on t, or the nonlinear response).
bool permeability_time_dependent(const PermeabilityModel& m);

/** Permeability data consumed by one implicit step: values at the Biot
 *  transverse quadrature points, split into the in-plane mean (entering the
 *  per-mode blocks) and the zero-mean fluctuation on the collocation grid
 *  (entering the pseudospectral correction).
 */
struct PermField {
  Eigen::VectorXd mean;  ///< Q, in-plane average at each quadrature point
  Eigen::MatrixXd fluct; ///< Q x n_colloc_total, k - mean (empty when uniform)
  bool has_fluct = false;
  long clamp_count = 0; ///< nonlinear clamps applied during evaluation
};

/** Evaluate the permeability field for the step from time `t`; for the
 *  nonlinear law the fluid content of `lag` (the previous accepted state) is
 *  used. Throws ConfigError if any evaluated value is non-positive.
 */
PermField eval_permeability(const PermeabilityModel& m, const PhysicalParams& p,
                            const Discretization& disc, const PlaneTransform& tr,
                            const State& lag, double t);

// ===========================================================================
// Sources
// ===========================================================================

/** Prescribed right-hand sides as physical-space expressions. Volume sources
 *  use vars (x1, x2, x3, t) -- the plate mass source uses s for its
 *  transverse coordinate -- and interface/surface data use (x1, x2, t).
 *  Default-constructed sources are identically zero.
 */
struct Sources {
  std::vector<Expr> f;  ///< fluid body force, ncomp entries (empty = zero)
  std::vector<Expr> Fb; ///< Biot body force, ncomp entries
  Expr S;               ///< Biot mass source
  Expr Sp;              ///< plate mass source
  Expr Fp;              ///< plate momentum source

  // Interface/boundary data (nonzero chiefly in manufactured runs): slip
  // traction defect per tangential direction, normal-stress defect, plate
  // filtration defect, plate/Biot flux defect, Biot top traction (ncomp), and
  // Biot top flux.
  std::vector<Expr> g_bjs;
  Expr g_pres, g_filt, g_flux, g_btop;
  std::vector<Expr> g_btrac;
};

/// Per-mode samples of all sources at one time level. Volume fields hold
/// modal amplitudes at transverse quadrature points (Q x n_modes); interface
/// fields are rows over modes.
struct SampledSources {
  bool empty = true; ///< true = all contributions vanish, assembly may skip

  std::vector<Eigen::MatrixXcd> f;  ///< ncomp of (Q_fluid x nm)
  std::vector<Eigen::MatrixXcd> Fb; ///< ncomp of (Q_biot x nm)
  Eigen::MatrixXcd S;               ///< Q_biot x nm
  Eigen::MatrixXcd Sp;              ///< Q_plate x nm
  Eigen::RowVectorXcd Fp;           ///< 1 x nm

  std::vector<Eigen::RowVectorXcd> g_bjs; ///< d_plane rows
  Eigen::RowVectorXcd g_pres, g_filt, g_flux, g_btop;
  std::vector<Eigen::RowVectorXcd> g_btrac; ///< ncomp rows
};

/// Sized-to-zero samples for the given discretization.
SampledSources zero_sources(const Discretization& disc);

/// Collocation sampling of expression sources at time t (exact for
/// bandlimited in-plane dependence).
SampledSources sample_sources(const Sources& src, const Discretization& disc,
                              const PlaneTransform& tr, double t);

/// Time -> per-mode samples; every step evaluates it at the target time
/// t^{n+1}. An empty function means zero sources.
using SourceProvider = std::function<SampledSources(double)>;

/// Provider wrapping expression sources (shares the transform by reference).
SourceProvider make_source_provider(const Sources& src, const Discretization& disc,
                                    const PlaneTransform& tr);

// ===========================================================================
// Derived physical fields
// ===========================================================================

/// Darcy discharge -k grad p_b at Biot quadrature points from the in-plane
/// mean permeability; ncomp rows of (Q x nm).
std::vector<Eigen::MatrixXcd> discharge_velocity_quad(const State& s,
                                                      const Discretization& disc,
                                                      const PermField& k);

/// Poroelastic traction sigma_b e3 = [2 mu_b D(eta) + (lambda_b div eta -
/// alpha_b p_b) I] e3 at Biot quadrature points; ncomp rows of (Q x nm).
std::vector<Eigen::MatrixXcd> biot_traction_quad(const State& s, const Discretization& disc,
                                                 const PhysicalParams& p);

} // namespace fpsi
