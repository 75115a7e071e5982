/** @file state.hpp
 *  @brief Discrete state of the coupled system: per-mode coefficient storage,
 *         the constrained-space layout (master-slave elimination), norms, and
 *         admissibility checks.
 *
 *  A state holds, for every Fourier mode, complex transverse nodal
 *  coefficients of: fluid velocity u and pressure multiplier p_f, plate
 *  deflection w and rate wdot (scalars per mode), plate pore pressure p_p,
 *  poroelastic displacement eta and rate etadot, and Biot pore pressure p_b.
 *  Real fields correspond to Hermitian-symmetric coefficient sets
 *  (coeff(-xi) = conj(coeff(xi))), which is an invariant of every state.
 *
 *  The trial/test space of one implicit step is the constrained product
 *  space: no-slip u = 0 at x3 = -1, matching traces eta(x3=0) = w e3 and
 *  p_p(s=h/2) = p_b(x3=0), with in-plane periodicity built into the Fourier
 *  basis. Constraints are realized by master-slave elimination: slave
 *  coefficients are dropped from the free vector and reconstructed from their
 *  masters (w, p_b) by the layout's prolongation matrix C (full = C * free),
 *  identical for every mode.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/geometry.hpp"

namespace fpsi {

struct PhysicalParams; // physics.hpp

// ===========================================================================
// Layout
// ===========================================================================

struct FieldLayout {
  int d_plane = 1, ncomp = 2;
  int nvel = 0, npf = 0, npl = 0, nb = 0;
  bool interface_constraints = true; ///< false only for the Poincare ablation

  // Full (unconstrained) per-mode vector: [u | p_f | w | p_p | eta | p_b],
  // vector fields component-major (component c occupies a contiguous nodal
  // block). Offsets below index into that vector.
  int off_u = 0, off_pf = 0, off_w = 0, off_pp = 0, off_eta = 0, off_pb = 0;
  int n_full = 0, n_free = 0;

  std::vector<int> free_of_full; ///< free index or -1 if constrained
  std::vector<int> full_of_free; ///< inverse on the free subset
  Eigen::MatrixXd C;             ///< n_full x n_free prolongation, full = C free

  int u_index(int comp, int node) const { return off_u + comp * nvel + node; }
  int pf_index(int node) const { return off_pf + node; }
  int w_index() const { return off_w; }
  int pp_index(int node) const { return off_pp + node; }
  int eta_index(int comp, int node) const { return off_eta + comp * nb + node; }
  int pb_index(int node) const { return off_pb + node; }
};

FieldLayout build_layout(const Discretization& disc, bool interface_constraints = true);

// ===========================================================================
// State
// ===========================================================================

/// Columns are modes in Discretization::modes order; rows are transverse
/// nodal coefficients (component-major for vector fields).
struct State {
  double t = 0.0;
  Eigen::MatrixXcd u;      ///< (ncomp*nvel) x n_modes
  Eigen::MatrixXcd pf;     ///< npf x n_modes
  Eigen::MatrixXcd w;      ///< 1 x n_modes
  Eigen::MatrixXcd wdot;   ///< 1 x n_modes
  Eigen::MatrixXcd pp;     ///< npl x n_modes
  Eigen::MatrixXcd eta;    ///< (ncomp*nb) x n_modes
  Eigen::MatrixXcd etadot; ///< (ncomp*nb) x n_modes
  Eigen::MatrixXcd pb;     ///< nb x n_modes
};

State make_state(const Discretization& disc); ///< zeros at t = 0

/// Overwrite slave coefficients from their masters in every mode column
/// (also ties the rate traces: etadot(x3=0) = wdot e3). Idempotent.
void apply_constraints(State& s, const Discretization& disc);

/// Enforce coeff(-xi) = conj(coeff(xi)) exactly, copying from the canonical
/// half; zeroes the imaginary part of the zero mode.
void hermitianize(State& s, const Discretization& disc);

/// (curr - prev) / dt fieldwise; t is taken from curr.
State difference_quotient(const State& curr, const State& prev, double dt);

// --- step-vector packing ----------------------------------------------------

/// Gather the per-mode full step vector [u|p_f|w|p_p|eta|p_b] of mode column m.
Eigen::VectorXcd pack_full(const State& s, const FieldLayout& lay, int m);

/// Scatter a per-mode full step vector back into mode column m (does not
/// touch wdot/etadot).
void scatter_full(State& s, const FieldLayout& lay, int m, const Eigen::VectorXcd& x);

// ===========================================================================
// Quadrature evaluation helpers
// ===========================================================================

/// Values and transverse derivatives of a modal profile at the mesh
/// quadrature points; `coeffs` is the (ncomp*n_nodes) coefficient block of
/// one mode, rows of the outputs are components.
struct QuadEval {
  Eigen::MatrixXcd val;  ///< ncomp x Q
  Eigen::MatrixXcd dval; ///< ncomp x Q
};
QuadEval eval_at_quad(const TransverseMesh& mesh, const Eigen::VectorXcd& coeffs, int ncomp);

/// Per-mode squared seminorms over one transverse mesh; `kappa` is the
/// in-plane wavevector 2*pi*xi and dp the number of in-plane directions.
/// For a vector field the component layout is tangential first, transverse
/// last; scalars pass ncomp = 1 (no symmetric-gradient/divergence forms).
double quad_l2_sq(const TransverseMesh& mesh, const QuadEval& f);
double quad_grad_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                    const QuadEval& f);                                    ///< full gradient
double quad_sym_grad_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                        const QuadEval& f);                                ///< |D(u)|^2
double quad_div_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                   const QuadEval& f);                                     ///< |div u|^2

// ===========================================================================
// Norms and derived fields
// ===========================================================================

/// Elastic energy norm ||eta||_E^2 = 2 mu_b ||D(eta)||^2 + lambda_b ||div eta||^2.
double energy_norm_E_sq(const State& s, const Discretization& disc, double mu_b,
                        double lambda_b);

/** Squared norm of the constrained solution space:
 *    ||u||_{L2}^2 + 2||D(u)||^2          (H1 representative for the velocity)
 *  + ||lap w||^2 + ||w||^2               (per mode |kappa|^4 |w|^2 + |w|^2)
 *  + ||p_p||^2 + ||d_s p_p||^2
 *  + ||eta||_E^2 + ||grad p_b||^2.
 */
double sd_norm_sq(const State& s, const Discretization& disc, double mu_b, double lambda_b);

/// L2(Omega)^2 of one stored field over its mesh (vector fields summed over
/// components); for w this is the squared l2 of the mode coefficients.
double field_l2_sq(const Eigen::MatrixXcd& coeffs, const TransverseMesh& mesh, int ncomp);

/** Biot fluid content zeta_b = c_b p_b + alpha_b div eta, evaluated per mode
 *  at the Biot mesh quadrature points (Q x n_modes). This is the exact field
 *  the permeability lag consumes.
 */
Eigen::MatrixXcd fluid_content_quad(const State& s, const Discretization& disc,
                                    double c_b, double alpha_b);

/// Nodal recovery (consistent L2 projection onto the Biot element space) of
/// fluid_content_quad, for reporting/output.
Eigen::MatrixXcd fluid_content_nodal(const State& s, const Discretization& disc,
                                     double c_b, double alpha_b);

/// Plate fluid content zeta_p = c_p p_p - alpha_p s lap w at plate quadrature
/// points (Q x n_modes).
Eigen::MatrixXcd plate_content_quad(const State& s, const Discretization& disc,
                                    double c_p, double alpha_p);

// ===========================================================================
// Divergence constraint
// ===========================================================================

/// Discrete divergence rows of one mode: B[a][(c,node)] = (div u, psi_a) for
/// the fluid pressure test basis (npf x ncomp*nvel).
Eigen::MatrixXcd divergence_matrix(const Discretization& disc, ModeIndex xi);

/// Euclidean norm of (div u, psi) over all modes, and the L2 norm of u; the
/// invariant is residual <= tol * max(||u||, 1).
struct DivergenceResidual {
  double residual = 0.0;
  double u_norm = 0.0;
};
DivergenceResidual divergence_residual(const State& s, const Discretization& disc);

/** Mass-orthogonal projection of the velocity onto the discrete
 *  divergence-free manifold (per canonical mode, within the no-slip subspace),
 *  followed by exact Hermitian pairing. Returns the relative L2 size of the
 *  correction, ||u_after - u_before|| / ||u_before|| (zero for zero input).
 */
double project_divergence_free(State& s, const Discretization& disc);

// ===========================================================================
// Admissibility
// ===========================================================================

/// Collect human-readable invariant violations: non-finite entries, Hermitian
/// asymmetry, constraint traces, divergence residual. Empty = admissible.
std::vector<std::string> state_violations(const State& s, const Discretization& disc,
                                          double tol = 1e-10);

/** Seeded random admissible state: free coefficients are standard normals
 *  scaled by amplitude * decay^{|xi|_1}, the velocity is then projected onto
 *  the discrete divergence-free manifold (mass-orthogonal projection, per
 *  mode), constraints applied, Hermitian symmetry enforced. Deterministic in
 *  (seed, discretization).
 */
State random_admissible_state(const Discretization& disc, std::uint64_t seed,
                              double amplitude = 1.0, double decay = 0.5);

} // namespace fpsi
