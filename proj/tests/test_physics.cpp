/** @file test_physics.cpp
 *  @brief Unit tests for parameters, permeability laws and source sampling.
 */
#include <doctest.h>

#include <cmath>
#include <complex>

#include "fpsi/errors.hpp"
#include "fpsi/physics.hpp"

using namespace fpsi;

namespace {

constexpr double kTwoPi = 6.283185307179586;

Discretization small_disc(int M = 2, int elems = 8) {
  DomainSpec dom;
  dom.d_plane = 1;
  dom.h = 0.1;
  return build_discretization(dom, M, elems, elems, elems);
}

PlaneTransform make_tr(const Discretization& disc) {
  return PlaneTransform(disc.domain.d_plane, disc.M, disc.n_colloc);
}

} // namespace

// ===========================================================================
// Parameters
// ===========================================================================

TEST_CASE("parameter validation accepts defaults and rejects bad values") {
  PhysicalParams p;
  CHECK_NOTHROW(validate_params(p));

  SUBCASE("negative viscosity") {
    p.mu_f = -1.0;
    CHECK_THROWS_AS(validate_params(p), ConfigError);
  }
  SUBCASE("quasistatic modes forbid poroelastic inertia") {
    p.mode = RunMode::QuasistaticLinear;
    CHECK_THROWS_AS(validate_params(p), ConfigError);
    p.rho_b = 0.0;
    CHECK_NOTHROW(validate_params(p));
  }
  SUBCASE("plate storage must be positive in every mode") {
    p.c_p = 0.0;
    CHECK_THROWS_AS(validate_params(p), ConfigError);
    p.mode = RunMode::QuasistaticNonlinear;
    p.rho_b = 0.0;
    CHECK_THROWS_AS(validate_params(p), ConfigError);
  }
}

TEST_CASE("run mode names") {
  CHECK(std::string(run_mode_name(RunMode::DynamicLinear)) == "dynamic-linear");
  CHECK(std::string(run_mode_name(RunMode::QuasistaticLinear)) == "quasistatic-linear");
  CHECK(std::string(run_mode_name(RunMode::QuasistaticNonlinear)) == "quasistatic-nonlinear");
}

// ===========================================================================
// Permeability
// ===========================================================================

TEST_CASE("constant permeability evaluates to a uniform mean") {
  const auto disc = small_disc();
  const auto tr = make_tr(disc);
  PermeabilityModel m;
  m.k0 = 2.5;
  const State lag = make_state(disc);
  const PermField k = eval_permeability(m, PhysicalParams{}, disc, tr, lag, 0.0);
  CHECK(!k.has_fluct);
  CHECK(k.mean.size() == disc.biot.n_quad_total());
  CHECK(k.mean.minCoeff() == 2.5);
  CHECK(k.mean.maxCoeff() == 2.5);

  m.k0 = -1.0;
  CHECK_THROWS_AS(validate_permeability(m), ConfigError);
}

TEST_CASE("space-time law with only transverse dependence has no fluctuation") {
  const auto disc = small_disc();
  const auto tr = make_tr(disc);
  PermeabilityModel m;
  m.kind = PermeabilityKind::SpaceTime;
  m.spacetime = Expr::parse("1 + x3^2");
  CHECK(!permeability_time_dependent(m));
  const PermField k =
      eval_permeability(m, PhysicalParams{}, disc, tr, make_state(disc), 0.0);
  CHECK(!k.has_fluct);
  for (int q = 0; q < disc.biot.n_quad_total(); ++q) {
    const double x3 = disc.biot.quad_x(q);
    CHECK(k.mean(q) == doctest::Approx(1.0 + x3 * x3).epsilon(1e-14));
  }

  m.spacetime = Expr::parse("1 + t");
  CHECK(permeability_time_dependent(m));
}

TEST_CASE("space-time law splits in-plane variation into zero-mean fluctuation") {
  const auto disc = small_disc(2, 6);
  const auto tr = make_tr(disc);
  PermeabilityModel m;
  m.kind = PermeabilityKind::SpaceTime;
  m.spacetime = Expr::parse("1 + 0.5*sin(6.283185307179586*x1)");
  const PermField k =
      eval_permeability(m, PhysicalParams{}, disc, tr, make_state(disc), 0.0);
  REQUIRE(k.has_fluct);
  /// An equispaced grid sums a single nonzero mode to zero, so the in-plane
  /// mean is exactly the constant part.
  for (int q = 0; q < disc.biot.n_quad_total(); ++q)
    CHECK(k.mean(q) == doctest::Approx(1.0).epsilon(1e-13));
  for (int i = 0; i < tr.n_points(); ++i)
    CHECK(k.fluct(0, i) ==
          doctest::Approx(0.5 * std::sin(kTwoPi * tr.point(i)(0))).epsilon(1e-12));
}

TEST_CASE("non-positive permeability values are rejected at evaluation") {
  const auto disc = small_disc();
  const auto tr = make_tr(disc);
  PermeabilityModel m;
  m.kind = PermeabilityKind::SpaceTime;
  m.spacetime = Expr::parse("x3 - 0.5");
  CHECK_THROWS_AS(eval_permeability(m, PhysicalParams{}, disc, tr, make_state(disc), 0.0),
                  ConfigError);
}

TEST_CASE("nonlinear law consumes the lagged fluid content") {
  const auto disc = small_disc(0, 8);
  const auto tr = make_tr(disc);
  PhysicalParams p;
  p.c_b = 2.0;
  p.alpha_b = 3.0;

  /// eta = (0, x3), p_b = x3 -> zeta = 2 x3 + 3 in [3, 5].
  State lag = make_state(disc);
  const int nb = disc.biot.n_nodes();
  for (int n = 0; n < nb; ++n) {
    lag.eta(1 * nb + n, 0) = disc.biot.nodes[static_cast<std::size_t>(n)];
    lag.pb(n, 0) = disc.biot.nodes[static_cast<std::size_t>(n)];
  }

  PermeabilityModel m;
  m.kind = PermeabilityKind::Nonlinear;
  m.response = Expr::parse("z");

  SUBCASE("wide clamp window reproduces the content") {
    m.k_min = 0.1;
    m.k_max = 10.0;
    const PermField k = eval_permeability(m, p, disc, tr, lag, 0.0);
    CHECK(k.clamp_count == 0);
    CHECK(!k.has_fluct);
    for (int q = 0; q < disc.biot.n_quad_total(); ++q)
      CHECK(k.mean(q) == doctest::Approx(2.0 * disc.biot.quad_x(q) + 3.0).epsilon(1e-12));
  }
  SUBCASE("tight clamp window saturates and counts") {
    m.k_min = 0.5;
    m.k_max = 1.5;
    const PermField k = eval_permeability(m, p, disc, tr, lag, 0.0);
    CHECK(k.clamp_count ==
          static_cast<long>(disc.biot.n_quad_total()) * tr.n_points());
    CHECK(k.mean.minCoeff() == 1.5);
    CHECK(k.mean.maxCoeff() == 1.5);
  }
  SUBCASE("smooth bounded response stays inside the window") {
    m.response = Expr::parse("1 + 0.5*(exp(z)-exp(-z))/(exp(z)+exp(-z))");
    m.k_min = 0.5;
    m.k_max = 1.5;
    const PermField k = eval_permeability(m, p, disc, tr, lag, 0.0);
    CHECK(k.clamp_count == 0);
    CHECK(k.mean.minCoeff() > 1.0);
    CHECK(k.mean.maxCoeff() < 1.5);
  }
  CHECK(permeability_time_dependent(m));
}

// ===========================================================================
// Sources
// ===========================================================================

TEST_CASE("zero sources sample as empty") {
  const auto disc = small_disc();
  const auto tr = make_tr(disc);
  const SampledSources s = sample_sources(Sources{}, disc, tr, 1.0);
  CHECK(s.empty);
  CHECK(s.S.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("volume source sampling lands on the right mode") {
  const auto disc = small_disc(2, 8);
  const auto tr = make_tr(disc);
  Sources src;
  src.f.resize(2);
  src.f[1] = Expr::parse("sin(6.283185307179586*x1)*(x3+1)*t");
  const SampledSources s = sample_sources(src, disc, tr, 2.0);
  CHECK(!s.empty);

  const int ip = disc.mode_index({1, 0});
  const int in = disc.mode_index({-1, 0});
  const int i0 = disc.mode_index({0, 0});
  const std::complex<double> I(0.0, 1.0);
  for (int q = 0; q < disc.fluid_velocity.n_quad_total(); ++q) {
    const double x3 = disc.fluid_velocity.quad_x(q);
    /// sin = (e^{i k x} - e^{-i k x}) / (2i): amplitude -/+ i/2 times 2 (x3+1).
    CHECK(std::abs(s.f[1](q, ip) - (-I * (x3 + 1.0))) < 1e-12);
    CHECK(std::abs(s.f[1](q, in) - (+I * (x3 + 1.0))) < 1e-12);
    CHECK(std::abs(s.f[1](q, i0)) < 1e-13);
    CHECK(std::abs(s.f[0](q, ip)) == 0.0);
  }
}

TEST_CASE("plate mass source uses the thickness coordinate") {
  const auto disc = small_disc(1, 8);
  const auto tr = make_tr(disc);
  Sources src;
  src.Sp = Expr::parse("s*t");
  const SampledSources s = sample_sources(src, disc, tr, 3.0);
  const int i0 = disc.mode_index({0, 0});
  for (int q = 0; q < disc.plate.n_quad_total(); ++q)
    CHECK(s.Sp(q, i0).real() == doctest::Approx(3.0 * disc.plate.quad_x(q)).epsilon(1e-12));
}

TEST_CASE("surface source sampling and component-count validation") {
  const auto disc = small_disc(1, 8);
  const auto tr = make_tr(disc);
  Sources src;
  src.Fp = Expr::parse("cos(6.283185307179586*x1)");
  const SampledSources s = sample_sources(src, disc, tr, 0.0);
  CHECK(std::abs(s.Fp(disc.mode_index({1, 0})) - 0.5) < 1e-13);
  CHECK(std::abs(s.Fp(disc.mode_index({-1, 0})) - 0.5) < 1e-13);

  Sources bad;
  bad.f.resize(1); // ncomp is 2
  bad.f[0] = Expr::parse("1");
  CHECK_THROWS_AS(sample_sources(bad, disc, tr, 0.0), ConfigError);
}

// ===========================================================================
// Derived fields
// ===========================================================================

TEST_CASE("Darcy discharge of a linear pressure head") {
  const auto disc = small_disc(0, 8);
  const auto tr = make_tr(disc);
  State s = make_state(disc);
  for (int n = 0; n < disc.biot.n_nodes(); ++n)
    s.pb(n, 0) = disc.biot.nodes[static_cast<std::size_t>(n)];
  PermeabilityModel m;
  m.k0 = 2.0;
  const PermField k = eval_permeability(m, PhysicalParams{}, disc, tr, s, 0.0);
  const auto q = discharge_velocity_quad(s, disc, k);
  REQUIRE(q.size() == 2);
  for (int i = 0; i < disc.biot.n_quad_total(); ++i) {
    CHECK(std::abs(q[0](i, 0)) < 1e-14);
    CHECK(q[1](i, 0).real() == doctest::Approx(-2.0).epsilon(1e-13));
  }
}

TEST_CASE("poroelastic traction of a uniaxial stretch") {
  const auto disc = small_disc(0, 8);
  State s = make_state(disc);
  const int nb = disc.biot.n_nodes();
  for (int n = 0; n < nb; ++n)
    s.eta(1 * nb + n, 0) = disc.biot.nodes[static_cast<std::size_t>(n)];
  PhysicalParams p;
  p.mu_b = 1.0;
  p.lambda_b = 1.0;
  p.alpha_b = 4.0;

  /// sigma_b e3 for eta = (0, x3): (0, 2 mu + lambda) = (0, 3).
  auto tr0 = biot_traction_quad(s, disc, p);
  for (int q = 0; q < disc.biot.n_quad_total(); ++q) {
    CHECK(std::abs(tr0[0](q, 0)) < 1e-14);
    CHECK(tr0[1](q, 0).real() == doctest::Approx(3.0).epsilon(1e-13));
  }

  /// Pore pressure shifts the normal component by -alpha_b p_b.
  s.pb.col(0).setConstant(1.0);
  auto tr1 = biot_traction_quad(s, disc, p);
  for (int q = 0; q < disc.biot.n_quad_total(); ++q)
    CHECK(tr1[1](q, 0).real() == doctest::Approx(3.0 - 4.0).epsilon(1e-13));
}
