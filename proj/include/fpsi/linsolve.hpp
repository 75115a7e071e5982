/** @file linsolve.hpp
 *  @brief Linear solvers for one implicit step: per-mode direct factorization
 *         and preconditioned restarted GMRES for mode-coupled operators.
 */
#pragma once

#include <Eigen/Dense>

#include "fpsi/assembly.hpp"

namespace fpsi {

struct SolveReport {
  const char* method = "direct";
  int iterations = 0;    ///< inner GMRES iterations (0 for direct)
  double residual = 0.0; ///< final relative residual ||b - A x|| / ||b||
};

struct IterativeOptions {
  double tol = 1e-10; ///< relative residual target
  int restart = 50;   ///< Arnoldi basis size between restarts
  int max_iters = 500;
};

/** Per-mode LU solve; valid only for block-diagonal operators (uniform
 *  in-plane permeability) and throws SolverError otherwise. A Hermitian-paired
 *  right-hand side yields a bitwise Hermitian-paired solution, independent of
 *  mode ordering, because mirror modes are solved by conjugating the
 *  canonical factorization.
 */
Eigen::VectorXcd solve_direct(const StepOperator& op, const Eigen::VectorXcd& rhs,
                              SolveReport* rep = nullptr);

/** Right-preconditioned restarted GMRES (modified Gram-Schmidt, Givens
 *  rotations) with the per-mode factorizations as preconditioner; the
 *  convergence test is on the true relative residual. Mirror-mode pairs of
 *  the solution are symmetrized exactly on return. Throws SolverError when
 *  the iteration budget is exhausted.
 */
Eigen::VectorXcd solve_iterative(const StepOperator& op, const Eigen::VectorXcd& rhs,
                                 const IterativeOptions& opts = {},
                                 SolveReport* rep = nullptr);

/// Route to the cheapest applicable solver: direct for block-diagonal
/// operators, GMRES when the fluctuation correction is active.
Eigen::VectorXcd solve_step(const StepOperator& op, const Eigen::VectorXcd& rhs,
                            const IterativeOptions& opts = {}, SolveReport* rep = nullptr);

/// Overwrite mirror-mode slices with conjugated canonical slices and realify
/// the zero mode (exact Hermitian pairing of a concatenated free vector).
void hermitian_pair(Eigen::VectorXcd& x, const Discretization& disc, int n_free);

} // namespace fpsi
