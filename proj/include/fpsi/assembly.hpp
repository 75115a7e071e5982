/** @file assembly.hpp
 *  @brief Assembly of one implicit step of the coupled system: per-mode full
 *         matrices/right-hand sides, constraint condensation, and the step
 *         operator with its permeability-fluctuation correction.
 *
 *  One step advances the state from t^n to t^{n+1} = t^n + dt by solving, for
 *  every Fourier mode, a coupled elliptic system in the unknowns
 *  [u | p_f | w | p_p | eta | p_b]. Rates are backward difference quotients
 *  (wdot^{n+1} = (w^{n+1} - w^n)/dt, same for eta), momentum rows are scaled
 *  by dt, and the trace ties of the solution space are eliminated through the
 *  layout's prolongation C (condensed matrix C^T A C).
 *
 *  A spatially varying permeability splits into the in-plane mean (entering
 *  the per-mode blocks as a weighted Darcy form) plus a zero-mean fluctuation
 *  whose bilinear form dt (k' grad p_b, grad q_b) couples modes; it is applied
 *  matrix-free through collocation products (see StepOperator::apply), with
 *  the in-plane integral defined by the collocation sum.
 */
#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/geometry.hpp"
#include "fpsi/physics.hpp"
#include "fpsi/state.hpp"
#include "fpsi/transform.hpp"

namespace fpsi {

// ===========================================================================
// Per-mode assembly (full, unconstrained variables)
// ===========================================================================

/** Full n_full x n_full step matrix of one mode. `kbar` holds the in-plane
 *  mean permeability at the Biot quadrature points (size Q_biot).
 */
Eigen::MatrixXcd assemble_mode_matrix(const Discretization& disc, const PhysicalParams& p,
                                      double dt, const Eigen::VectorXd& kbar, ModeIndex xi);

/** Full right-hand side of mode column m: previous-state terms plus sources
 *  sampled at the target time t^{n+1}.
 */
Eigen::VectorXcd assemble_mode_rhs(const Discretization& disc, const FieldLayout& lay,
                                   const PhysicalParams& p, double dt, int m,
                                   const State& prev, const SampledSources& src);

/// Symmetric-gradient Gram blocks: (ncomp*n) x (ncomp*n) matrix representing
/// (D(u), D(v)) on the mesh for wavevector kappa. Used by assembly and tests.
Eigen::MatrixXcd sym_grad_form(const TransverseMesh& mesh, const Eigen::Vector2d& kappa,
                               int dp);
/// Divergence Gram (div u, div v), same layout.
Eigen::MatrixXcd div_form(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp);

// ===========================================================================
// Step operator
// ===========================================================================

/** Condensed step operator over all modes: block-diagonal per-mode matrices
 *  (mean permeability) with cached LU factorizations of the canonical half
 *  (mirror modes are handled by conjugation symmetry A(-xi) = conj(A(xi))),
 *  plus the optional mode-coupling fluctuation term.
 *
 *  Vector layout: concatenation of per-mode free vectors in mode order,
 *  total size n_modes * n_free.
 */
class StepOperator {
public:
  StepOperator(const Discretization& disc, const FieldLayout& lay, const PhysicalParams& p,
               double dt, const PermField& k, const PlaneTransform& tr);

  int n_free_total() const { return n_modes_ * lay_.n_free; }
  int n_modes() const { return n_modes_; }
  double dt() const { return dt_; }
  const FieldLayout& layout() const { return lay_; }
  const Discretization& disc() const { return disc_; }
  bool has_correction() const { return has_fluct_; }

  /// Full operator action (block diagonal + fluctuation correction).
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;

  /// Per-mode LU solves with the mean-permeability blocks; exact inverse
  /// when has_correction() is false, preconditioner otherwise.
  Eigen::VectorXcd block_solve(const Eigen::VectorXcd& r) const;

  /// Condensed matrix of one mode (assembled on demand for mirrors).
  Eigen::MatrixXcd mode_matrix(int m) const;

private:
  const Discretization& disc_;
  FieldLayout lay_;
  const PlaneTransform& tr_;
  double dt_;
  int n_modes_;
  bool has_fluct_;
  Eigen::MatrixXd fluct_;                ///< Q x n_colloc_total
  std::vector<int> canon_of_;            ///< mode -> index into canonical arrays
  std::vector<bool> is_mirror_;          ///< true when handled by conjugation
  std::vector<Eigen::MatrixXcd> A_;      ///< canonical condensed matrices
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu_;

  // Scratch for the correction (pb quadrature evaluation per mode).
  Eigen::MatrixXd pb_shape_, pb_dshape_; ///< C-composed maps free -> quad data

  Eigen::VectorXcd apply_correction(const Eigen::VectorXcd& x) const;
};

/// Condensed right-hand side over all modes (C^T applied per mode).
Eigen::VectorXcd assemble_rhs(const Discretization& disc, const FieldLayout& lay,
                              const PhysicalParams& p, double dt, const State& prev,
                              const SampledSources& src);

/// Scatter a concatenated free solution into the state's step unknowns
/// (u, p_f, w, p_p, eta, p_b), reconstructing slaves through C.
void apply_solution(State& s, const Discretization& disc, const FieldLayout& lay,
                    const Eigen::VectorXcd& x_free);

/// Gather the current step unknowns of a state into a concatenated free
/// vector (inverse of apply_solution on admissible states).
Eigen::VectorXcd gather_free(const State& s, const Discretization& disc,
                             const FieldLayout& lay);

} // namespace fpsi
