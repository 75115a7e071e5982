/** @file test_linsolve.cpp
 *  @brief Unit tests for the direct per-mode solver and restarted GMRES.
 */
#include <doctest.h>

#include <random>

#include "fpsi/errors.hpp"
#include "fpsi/linsolve.hpp"

using namespace fpsi;

namespace {

Discretization small_disc(int M = 1, int elems = 4) {
  DomainSpec dom;
  dom.d_plane = 1;
  dom.h = 0.1;
  return build_discretization(dom, M, elems, elems, elems);
}

PermField uniform_perm(const Discretization& disc, double k0 = 1.0) {
  PermField k;
  k.mean = Eigen::VectorXd::Constant(disc.biot.n_quad_total(), k0);
  k.has_fluct = false;
  return k;
}

PermField varying_perm(const Discretization& disc, const PlaneTransform& tr,
                       double amplitude) {
  PermeabilityModel m;
  m.kind = PermeabilityKind::SpaceTime;
  std::ostringstream os;
  os << "1 + " << amplitude << "*sin(6.283185307179586*x1)*(1 + x3)/2";
  m.spacetime = Expr::parse(os.str());
  return eval_permeability(m, PhysicalParams{}, disc, tr, make_state(disc), 0.0);
}

/// Hermitian-paired random right-hand side (as produced by real states).
Eigen::VectorXcd paired_rhs(const Discretization& disc, int n_free, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(disc.n_modes() * n_free);
  for (int m = 0; m < disc.n_modes(); ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (!is_canonical(xi)) continue;
    for (int f = 0; f < n_free; ++f)
      b(m * n_free + f) = Complex(g(rng), xi == ModeIndex{0, 0} ? 0.0 : g(rng));
  }
  hermitian_pair(b, disc, n_free);
  return b;
}

} // namespace

TEST_CASE("direct solve recovers a manufactured solution") {
  const auto disc = small_disc(2, 6);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.05, uniform_perm(disc), tr);

  const Eigen::VectorXcd xt = paired_rhs(disc, lay.n_free, 3);
  const Eigen::VectorXcd b = op.apply(xt);
  SolveReport rep;
  const Eigen::VectorXcd x = solve_direct(op, b, &rep);
  CHECK((x - xt).cwiseAbs().maxCoeff() < 1e-9 * xt.cwiseAbs().maxCoeff());
  CHECK(rep.iterations == 0);
  CHECK(rep.residual < 1e-10);
}

TEST_CASE("direct solve of a Hermitian-paired system is bitwise paired") {
  const auto disc = small_disc(2, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.1, uniform_perm(disc), tr);
  const Eigen::VectorXcd b = paired_rhs(disc, lay.n_free, 9);
  const Eigen::VectorXcd x = solve_direct(op, b);
  for (const auto xi : disc.modes) {
    const int m = disc.mode_index(xi);
    const int mm = disc.mode_index(negate(xi));
    CHECK((x.segment(mm * lay.n_free, lay.n_free) -
           x.segment(m * lay.n_free, lay.n_free).conjugate())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  /// Determinism: a fresh operator and a second solve give identical bits.
  const StepOperator op2(disc, lay, PhysicalParams{}, 0.1, uniform_perm(disc), tr);
  const Eigen::VectorXcd x2 = solve_direct(op2, b);
  CHECK((x - x2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("direct solve refuses mode-coupled operators") {
  const auto disc = small_disc(1, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.1, varying_perm(disc, tr, 0.4), tr);
  REQUIRE(op.has_correction());
  CHECK_THROWS_AS(solve_direct(op, Eigen::VectorXcd::Zero(op.n_free_total())), SolverError);
}

TEST_CASE("GMRES with an exact preconditioner converges in one iteration") {
  const auto disc = small_disc(1, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.05, uniform_perm(disc, 2.0), tr);
  const Eigen::VectorXcd b = paired_rhs(disc, lay.n_free, 4);
  SolveReport rep;
  const Eigen::VectorXcd x = solve_iterative(op, b, IterativeOptions{}, &rep);
  CHECK(rep.iterations == 1);
  CHECK(rep.residual < 1e-10);
  CHECK((op.apply(x) - b).norm() / b.norm() < 1e-10);
}

TEST_CASE("GMRES matches a dense factorization of the coupled operator") {
  const auto disc = small_disc(1, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.1, varying_perm(disc, tr, 0.6), tr);
  REQUIRE(op.has_correction());

  const int n = op.n_free_total();
  Eigen::MatrixXcd A(n, n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(i) = 1.0;
    A.col(i) = op.apply(e);
  }
  const Eigen::VectorXcd b = paired_rhs(disc, lay.n_free, 17);
  const Eigen::VectorXcd xd = Eigen::PartialPivLU<Eigen::MatrixXcd>(A).solve(b);

  SolveReport rep;
  const Eigen::VectorXcd xg = solve_iterative(op, b, IterativeOptions{}, &rep);
  CHECK(rep.iterations >= 2); // the fluctuation genuinely couples modes
  CHECK((xg - xd).norm() < 1e-8 * xd.norm());

  /// Solution pairing is exact after symmetrization.
  for (const auto xi : disc.modes) {
    const int m = disc.mode_index(xi);
    const int mm = disc.mode_index(negate(xi));
    CHECK((xg.segment(mm * lay.n_free, lay.n_free) -
           xg.segment(m * lay.n_free, lay.n_free).conjugate())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("GMRES throws when the iteration budget is exhausted") {
  const auto disc = small_disc(1, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const StepOperator op(disc, lay, PhysicalParams{}, 0.1, varying_perm(disc, tr, 0.6), tr);
  IterativeOptions opts;
  opts.tol = 0.0; // unreachable
  opts.max_iters = 3;
  CHECK_THROWS_AS(solve_iterative(op, paired_rhs(disc, lay.n_free, 2), opts), SolverError);
}

TEST_CASE("solve_step routes by operator structure") {
  const auto disc = small_disc(1, 4);
  const auto lay = build_layout(disc);
  const PlaneTransform tr(1, disc.M, disc.n_colloc);
  const Eigen::VectorXcd b = paired_rhs(disc, lay.n_free, 21);

  SolveReport rep;
  const StepOperator flat(disc, lay, PhysicalParams{}, 0.1, uniform_perm(disc), tr);
  solve_step(flat, b, IterativeOptions{}, &rep);
  CHECK(std::string(rep.method) == "direct");

  const StepOperator coupled(disc, lay, PhysicalParams{}, 0.1, varying_perm(disc, tr, 0.3),
                             tr);
  solve_step(coupled, b, IterativeOptions{}, &rep);
  CHECK(std::string(rep.method) == "gmres");
}
