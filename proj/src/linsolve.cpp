/** @file linsolve.cpp
 *  @brief Direct and GMRES solution of the per-step linear system.
 */
#include "fpsi/linsolve.hpp"

#include <cmath>
#include <sstream>

#include "fpsi/errors.hpp"

namespace fpsi {

namespace {

/// Complex Givens rotation zeroing b: returns (c real, s) with
/// [c s; -conj(s) c] [a; b] = [r; 0].
void givens(Complex a, Complex b, double& c, Complex& s) {
  const double aa = std::abs(a), bb = std::abs(b);
  if (bb == 0.0) {
    c = 1.0;
    s = 0.0;
    return;
  }
  if (aa == 0.0) {
    c = 0.0;
    s = b / bb; // any unit phase works; this keeps r = |b|
    s = std::conj(s);
    return;
  }
  const double rho = std::hypot(aa, bb);
  c = aa / rho;
  s = (a / aa) * std::conj(b) / rho;
}

} // namespace

void hermitian_pair(Eigen::VectorXcd& x, const Discretization& disc, int n_free) {
  for (int m = 0; m < disc.n_modes(); ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (xi == ModeIndex{0, 0}) {
      x.segment(m * n_free, n_free) =
          x.segment(m * n_free, n_free).real().cast<Complex>();
    } else if (is_canonical(xi)) {
      const int mm = disc.mode_index(negate(xi));
      x.segment(mm * n_free, n_free) = x.segment(m * n_free, n_free).conjugate();
    }
  }
}

Eigen::VectorXcd solve_direct(const StepOperator& op, const Eigen::VectorXcd& rhs,
                              SolveReport* rep) {
  if (op.has_correction())
    throw SolverError("direct per-mode solve is not applicable: the permeability "
                      "fluctuation couples modes");
  const Eigen::VectorXcd x = op.block_solve(rhs);
  if (rep) {
    rep->method = "direct";
    rep->iterations = 0;
    const double nb = rhs.norm();
    rep->residual = nb > 0.0 ? (rhs - op.apply(x)).norm() / nb : 0.0;
  }
  return x;
}

Eigen::VectorXcd solve_iterative(const StepOperator& op, const Eigen::VectorXcd& rhs,
                                 const IterativeOptions& opts, SolveReport* rep) {
  const int n = op.n_free_total();
  if (rhs.size() != n) throw SolverError("right-hand side size mismatch");
  const double normb = rhs.norm();
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
  if (normb == 0.0) {
    if (rep) {
      rep->method = "gmres";
      rep->iterations = 0;
      rep->residual = 0.0;
    }
    return x;
  }

  const int restart = std::max(1, opts.restart);
  int iters = 0;
  double rel = 1.0;

  std::vector<Eigen::VectorXcd> V(static_cast<std::size_t>(restart) + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(restart + 1, restart);
  Eigen::VectorXcd g(restart + 1);
  std::vector<double> gc(static_cast<std::size_t>(restart));
  std::vector<Complex> gs(static_cast<std::size_t>(restart));

  while (iters < opts.max_iters) {
    Eigen::VectorXcd r = rhs - op.apply(x);
    const double beta = r.norm();
    rel = beta / normb;
    if (rel <= opts.tol) break;

    V[0] = r / beta;
    g.setZero();
    g(0) = beta;
    int j = 0;
    for (; j < restart && iters < opts.max_iters; ++j, ++iters) {
      // Right-preconditioned Arnoldi step (modified Gram-Schmidt).
      Eigen::VectorXcd w = op.apply(op.block_solve(V[static_cast<std::size_t>(j)]));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V[static_cast<std::size_t>(i)].dot(w);
        w -= H(i, j) * V[static_cast<std::size_t>(i)];
      }
      H(j + 1, j) = w.norm();

      for (int i = 0; i < j; ++i) {
        const Complex a = H(i, j), b = H(i + 1, j);
        H(i, j) = gc[static_cast<std::size_t>(i)] * a + gs[static_cast<std::size_t>(i)] * b;
        H(i + 1, j) =
            -std::conj(gs[static_cast<std::size_t>(i)]) * a + gc[static_cast<std::size_t>(i)] * b;
      }
      givens(H(j, j), H(j + 1, j), gc[static_cast<std::size_t>(j)],
             gs[static_cast<std::size_t>(j)]);
      {
        const Complex a = H(j, j), b = H(j + 1, j);
        H(j, j) = gc[static_cast<std::size_t>(j)] * a + gs[static_cast<std::size_t>(j)] * b;
        H(j + 1, j) = 0.0;
        const Complex ga = g(j);
        g(j) = gc[static_cast<std::size_t>(j)] * ga;
        g(j + 1) = -std::conj(gs[static_cast<std::size_t>(j)]) * ga;
      }

      rel = std::abs(g(j + 1)) / normb;
      const bool breakdown = std::abs(H(j + 1, j)) == 0.0 && rel > opts.tol;
      if (rel <= opts.tol || breakdown) {
        ++j;
        ++iters;
        break;
      }
      V[static_cast<std::size_t>(j) + 1] = w / H(j + 1, j);
    }

    if (j > 0) {
      // Back substitution on the rotated Hessenberg system.
      Eigen::VectorXcd y = g.head(j);
      for (int i = j - 1; i >= 0; --i) {
        for (int l = i + 1; l < j; ++l) y(i) -= H(i, l) * y(l);
        y(i) /= H(i, i);
      }
      Eigen::VectorXcd z = Eigen::VectorXcd::Zero(n);
      for (int i = 0; i < j; ++i) z += y(i) * V[static_cast<std::size_t>(i)];
      x += op.block_solve(z);
    }

    rel = (rhs - op.apply(x)).norm() / normb;
    if (rel <= opts.tol) break;
  }

  if (rel > opts.tol) {
    std::ostringstream os;
    os << "GMRES did not converge: relative residual " << rel << " after " << iters
       << " iterations (target " << opts.tol << ")";
    throw SolverError(os.str());
  }

  hermitian_pair(x, op.disc(), op.layout().n_free);
  if (rep) {
    rep->method = "gmres";
    rep->iterations = iters;
    rep->residual = rel;
  }
  return x;
}

Eigen::VectorXcd solve_step(const StepOperator& op, const Eigen::VectorXcd& rhs,
                            const IterativeOptions& opts, SolveReport* rep) {
  if (!op.has_correction()) return solve_direct(op, rhs, rep);
  return solve_iterative(op, rhs, opts, rep);
}

} // namespace fpsi
