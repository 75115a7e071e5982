/** @file test_diagnostics.cpp
 *  @brief Unit tests for energy accounting, the step energy inequality,
 *         interface residuals, the trace-coupling norm probe, and the
 *         stability experiment.
 */
#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "fpsi/diagnostics.hpp"
#include "fpsi/errors.hpp"
#include "fpsi/stepper.hpp"
#include "fpsi/verify.hpp"

using namespace fpsi;

namespace {

Discretization small_disc(int M = 1, int elems = 3) {
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

PermeabilityModel const_model(double k0 = 1.0) {
  PermeabilityModel m;
  m.kind = PermeabilityKind::Constant;
  m.k0 = k0;
  return m;
}

} // namespace

// ===========================================================================
// Energy accounting
// ===========================================================================

TEST_CASE("zero state carries zero energy and dissipation") {
  const Discretization disc = small_disc();
  const EnergyReport r =
      compute_energy(make_state(disc), disc, PhysicalParams{}, uniform_perm(disc));
  CHECK(r.energy == 0.0);
  CHECK(r.dissipation == 0.0);
  CHECK(r.kinetic_fluid == 0.0);
  CHECK(r.potential_elastic == 0.0);
}

TEST_CASE("energy terms match hand-computed values on a shear profile") {
  // Zero-mode tangential velocity u_1 = A (1 + x3): linear, representable.
  const Discretization disc = small_disc(1, 4);
  PhysicalParams p;
  p.rho_f = 1.3;
  p.mu_f = 0.7;
  p.beta = 0.4;
  p.gamma = 0.9;
  State s = make_state(disc);
  const double A = 0.8, W = 0.3;
  const int m0 = disc.mode_index({0, 0});
  const int nvel = disc.fluid_velocity.n_nodes();
  for (int n = 0; n < nvel; ++n)
    s.u(n, m0) = A * (1.0 + disc.fluid_velocity.nodes[static_cast<std::size_t>(n)]);
  s.w(0, m0) = W;
  // Transverse displacement W (1 - x3): matches the interface tie at x3 = 0.
  const int nb = disc.biot.n_nodes();
  for (int n = 0; n < nb; ++n)
    s.eta(nb + n, m0) = W * (1.0 - disc.biot.nodes[static_cast<std::size_t>(n)]);
  apply_constraints(s, disc);
  hermitianize(s, disc);

  const EnergyReport r = compute_energy(s, disc, p, uniform_perm(disc));
  // 1/2 rho_f int_{-1}^0 A^2 (1+x3)^2 = 1/2 rho_f A^2 / 3.
  CHECK(r.kinetic_fluid == doctest::Approx(0.5 * p.rho_f * A * A / 3.0).epsilon(1e-12));
  // Spring energy 1/2 gamma |W|^2; no bending for the zero mode.
  CHECK(r.potential_spring == doctest::Approx(0.5 * p.gamma * W * W).epsilon(1e-12));
  CHECK(r.potential_bending == 0.0);
  // eta = W (1 - x3) e3: D(eta) = -W e3 x e3 and div eta = -W, so
  // ||eta||_E^2 = (2 mu_b + lambda_b) W^2 on the unit-depth layer.
  CHECK(r.potential_elastic ==
        doctest::Approx(0.5 * (2.0 * p.mu_b + p.lambda_b) * W * W).epsilon(1e-12));
  // D(u) has the single off-diagonal pair D_{1z} = A/2: |D|^2 = A^2/2,
  // dissipation 2 mu_f int A^2/2 = mu_f A^2.
  CHECK(r.diss_fluid == doctest::Approx(p.mu_f * A * A).epsilon(1e-12));
  // Interface slip: beta |u_1(0)|^2 = beta A^2.
  CHECK(r.diss_bjs == doctest::Approx(p.beta * A * A).epsilon(1e-12));
  CHECK(r.energy == doctest::Approx(r.kinetic_fluid + r.potential_spring +
                                    r.potential_elastic)
                        .epsilon(1e-12));
}

TEST_CASE("Darcy dissipation uses the collocation form of a fluctuating field") {
  const Discretization disc = small_disc(1, 2);
  PhysicalParams p;
  State s = random_admissible_state(disc, 17);

  // k(x) = 1 + 0.5 cos(2 pi x1): bandlimited, positive.
  const int Q = disc.biot.n_quad_total();
  const int np = disc.n_colloc_total();
  PermField k;
  k.mean = Eigen::VectorXd::Constant(Q, 1.0);
  k.fluct.resize(Q, np);
  for (int q = 0; q < Q; ++q)
    for (int i = 0; i < np; ++i)
      k.fluct(q, i) = 0.5 * std::cos(2.0 * M_PI * i / disc.n_colloc);
  k.has_fluct = true;
  const PlaneTransform tr(disc.domain.d_plane, disc.M, disc.n_colloc);

  // Reference: explicit collocation sum of k |grad p_b|^2 at every point.
  double want = 0.0;
  for (int q = 0; q < Q; ++q) {
    Eigen::VectorXcd grad1(np), gradz(np);
    Eigen::VectorXcd modal1(disc.n_modes()), modalz(disc.n_modes());
    for (int m = 0; m < disc.n_modes(); ++m) {
      const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
      Complex val(0.0, 0.0), dval(0.0, 0.0);
      for (int b = 0; b < disc.biot.n_nodes(); ++b) {
        val += disc.biot.shape(q, b) * s.pb(b, m);
        dval += disc.biot.dshape(q, b) * s.pb(b, m);
      }
      modal1(m) = Complex(0.0, kap(0)) * val;
      modalz(m) = dval;
    }
    tr.to_physical(modal1, grad1);
    tr.to_physical(modalz, gradz);
    for (int i = 0; i < np; ++i)
      want += disc.biot.quad_w(q) * (k.mean(q) + k.fluct(q, i)) *
              (std::norm(grad1(i)) + std::norm(gradz(i))) / np;
  }

  const EnergyReport r = compute_energy(s, disc, p, k, &tr);
  CHECK(r.diss_biot_pressure == doctest::Approx(want).epsilon(1e-10));

  // The fluctuating form requires the transform.
  CHECK_THROWS_AS(compute_energy(s, disc, p, k), std::invalid_argument);
}

TEST_CASE("source work bound is zero exactly for zero sources and positive "
          "otherwise") {
  const Discretization disc = small_disc();
  const State s = random_admissible_state(disc, 9);
  CHECK(source_work_bound(zero_sources(disc), s, disc, PhysicalParams{}) == 0.0);

  const MmsCase c = mms_temporal_case();
  const MmsSources srcs = mms_sources(c, PhysicalParams{}, 1.0);
  const SampledSources sampled = srcs.sample(disc, 0.2);
  CHECK(source_work_bound(sampled, s, disc, PhysicalParams{}) > 0.0);
}

// ===========================================================================
// Energy inequality along trajectories
// ===========================================================================

TEST_CASE("the energy inequality holds along a computed trajectory and fails "
          "on its time reversal") {
  const Discretization disc = small_disc(1, 3);
  PhysicalParams p;
  RunSetup cfg;
  cfg.params = p;
  cfg.perm = const_model();
  cfg.T = 0.5;
  cfg.N = 10;
  const Trajectory traj = rothe_run(cfg, disc, random_admissible_state(disc, 23));
  const PlaneTransform tr(disc.domain.d_plane, disc.M, disc.n_colloc);

  const EnergyCheck ok = check_energy_inequality(traj.states, disc, p, cfg.perm, tr,
                                                 SourceProvider{}, 1e-9);
  CHECK(ok.pass);
  CHECK(ok.energies.size() == 11);
  CHECK(ok.margins.size() == 10);
  CHECK(ok.min_margin >= -1e-9 * ok.e0);
  // Margins are the dominated jump terms: all nonnegative up to roundoff,
  // and energy decays monotonically without sources.
  for (std::size_t n = 1; n < ok.energies.size(); ++n)
    CHECK(ok.energies[n] <= ok.energies[n - 1] * (1.0 + 1e-12));

  // Reverse the states (re-stamping times to keep dt positive): energy now
  // grows while dissipation stays positive, so margins go negative.
  std::vector<State> rev(traj.states.rbegin(), traj.states.rend());
  for (std::size_t i = 0; i < rev.size(); ++i) rev[i].t = 0.05 * static_cast<double>(i);
  const EnergyCheck bad =
      check_energy_inequality(rev, disc, p, cfg.perm, tr, SourceProvider{}, 1e-9);
  CHECK_FALSE(bad.pass);
  CHECK(bad.min_margin < 0.0);
}

// ===========================================================================
// Interface residuals
// ===========================================================================

TEST_CASE("essential interface residuals vanish on constructed states") {
  const Discretization disc = small_disc(1, 3);
  const PlaneTransform tr(disc.domain.d_plane, disc.M, disc.n_colloc);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const State s = random_admissible_state(disc, seed);
    const InterfaceResiduals r =
        interface_residuals(s, disc, tr, PhysicalParams{}, const_model());
    const double scale = std::sqrt(field_l2_sq(s.eta, disc.biot, 2)) +
                         std::sqrt(field_l2_sq(s.pb, disc.biot, 1)) + 1.0;
    CHECK(r.kinematic <= 1e-12 * scale);
    CHECK(r.pressure_trace <= 1e-12 * scale);
  }
}

TEST_CASE("essential interface residuals detect a broken trace tie") {
  const Discretization disc = small_disc(1, 2);
  const PlaneTransform tr(disc.domain.d_plane, disc.M, disc.n_colloc);
  State s = random_admissible_state(disc, 4);
  const int m0 = disc.mode_index({0, 0});
  s.eta(disc.biot.n_nodes(), m0) += 0.25; // z-component trace node, zero mode
  const InterfaceResiduals r =
      interface_residuals(s, disc, tr, PhysicalParams{}, const_model());
  CHECK(r.kinematic >= 0.2);
}

TEST_CASE("natural interface residuals shrink under refinement on manufactured "
          "solutions") {
  const MmsCase c = mms_spatial_case();
  PhysicalParams p;
  const double k0 = 1.0;
  const MmsSources srcs = mms_sources(c, p, k0);

  double coarse = 0.0, fine = 0.0;
  for (int level = 0; level < 2; ++level) {
    const int elems = level == 0 ? 4 : 16;
    DomainSpec dom;
    dom.d_plane = c.d_plane;
    dom.h = c.h;
    const Discretization disc = build_discretization(dom, 1, elems, elems, elems);
    const PlaneTransform tr(disc.domain.d_plane, disc.M, disc.n_colloc);
    const State s = mms_exact_state(c, disc, 0.3);
    const SampledSources corr = srcs.sample(disc, 0.3);
    const InterfaceResiduals r =
        interface_residuals(s, disc, tr, p, const_model(k0), &corr);
    const double total = r.flux + r.filtration + r.normal_stress + r.bjs +
                         r.biot_traction;
    if (level == 0)
      coarse = total;
    else
      fine = total;
    CHECK(r.kinematic <= 1e-10);
    CHECK(r.pressure_trace <= 1e-10);
  }
  CHECK(fine < 0.6 * coarse); // at least first-order decay under x4 refinement
}

// ===========================================================================
// Trace-coupling norm probe
// ===========================================================================

TEST_CASE("trace-coupling constants are finite, positive and mesh-stable") {
  double prev_eta = 0.0, prev_pb = 0.0;
  for (int elems : {4, 8, 16}) {
    const Discretization disc = small_disc(1, elems);
    const PoincareReport r = poincare_probe(disc);
    CHECK_FALSE(r.divergent_eta);
    CHECK_FALSE(r.divergent_pb);
    CHECK(r.c_eta > 0.0);
    CHECK(r.c_pb > 0.0);
    CHECK(std::isfinite(r.c_eta));
    CHECK(std::isfinite(r.c_pb));
    if (prev_eta > 0.0) {
      CHECK(r.c_eta == doctest::Approx(prev_eta).epsilon(0.1));
      CHECK(r.c_pb == doctest::Approx(prev_pb).epsilon(0.1));
    }
    prev_eta = r.c_eta;
    prev_pb = r.c_pb;
  }
}

TEST_CASE("removing the interface ties makes the probe diverge") {
  const Discretization disc = small_disc(1, 3);
  const PoincareReport r = poincare_probe(disc, false);
  CHECK(r.divergent_eta);
  CHECK(r.c_eta == std::numeric_limits<double>::infinity());
}

TEST_CASE("the probe respects its size cap") {
  const Discretization disc = small_disc(1, 3);
  CHECK_THROWS_AS(poincare_probe(disc, true, 3), ConfigError);
}

// ===========================================================================
// Stability experiment
// ===========================================================================

TEST_CASE("linear zero-source difference energy does not grow") {
  const Discretization disc = small_disc(1, 3);
  const State base = random_admissible_state(disc, 19);
  const StabilityReport r = stability_experiment(disc, PhysicalParams{}, const_model(),
                                                 base, 0.5, 10, 1e-3, 77);
  CHECK(r.valid);
  CHECK(r.e_diff0 > 0.0);
  CHECK(r.ratio <= 1.0 + 1e-8);
}

TEST_CASE("a zero perturbation invalidates the stability ratio") {
  const Discretization disc = small_disc(0, 2);
  const StabilityReport r = stability_experiment(disc, PhysicalParams{}, const_model(),
                                                 make_state(disc), 0.2, 2, 0.0, 1);
  CHECK_FALSE(r.valid);
}

// ===========================================================================
// Spectral decay
// ===========================================================================

TEST_CASE("spectral decay reports the seeded mode falloff") {
  const Discretization disc = small_disc(3, 2);
  const State s = random_admissible_state(disc, 29, 1.0, 0.4);
  const SpectralDecay d = spectral_decay_report(s, disc);
  REQUIRE(d.shell_amplitude.size() == 4); // shells 0..M
  CHECK(d.shell_amplitude[0] > d.shell_amplitude[3]);
  CHECK(d.decay_rate < 0.0);
}
