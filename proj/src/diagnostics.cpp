/** @file diagnostics.cpp
 *  @brief Energy bookkeeping, interface residuals, norm probe, stability runs.
 */
#include "fpsi/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fpsi/assembly.hpp"
#include "fpsi/errors.hpp"
#include "fpsi/stepper.hpp"

namespace fpsi {

namespace {

constexpr double kYoung = 0.5;

double mode_weight_sum(const Eigen::RowVectorXcd& row) { return row.squaredNorm(); }

/// Sum over modes of the squared quadrature L2 norm of sampled modal data
/// (Q x n_modes values at the quadrature points of `mesh`).
double sampled_l2_sq(const Eigen::MatrixXcd& vals, const TransverseMesh& mesh) {
  double acc = 0.0;
  for (int q = 0; q < vals.rows(); ++q) acc += mesh.quad_w(q) * vals.row(q).squaredNorm();
  return acc;
}

/// Energy terms alone (no dissipation); shared by compute_energy and the
/// stability experiment.
void energy_terms(const State& s, const Discretization& disc, const PhysicalParams& p,
                  EnergyReport& r) {
  const int nc = disc.domain.n_comp();
  r.kinetic_fluid = 0.5 * p.rho_f * field_l2_sq(s.u, disc.fluid_velocity, nc);
  r.kinetic_plate = 0.5 * p.rho_p * s.wdot.squaredNorm();
  r.kinetic_biot = 0.5 * p.rho_b * field_l2_sq(s.etadot, disc.biot, nc);
  r.potential_plate_pressure = 0.5 * p.c_p * field_l2_sq(s.pp, disc.plate, 1);
  r.potential_elastic = 0.5 * energy_norm_E_sq(s, disc, p.mu_b, p.lambda_b);
  r.potential_biot_pressure = 0.5 * p.c_b * field_l2_sq(s.pb, disc.biot, 1);
  double bend = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const double k2 = wavevector(disc.modes[static_cast<std::size_t>(m)]).squaredNorm();
    bend += k2 * k2 * std::norm(s.w(0, m));
  }
  r.potential_bending = 0.5 * p.D_bend * bend;
  r.potential_spring = 0.5 * p.gamma * s.w.squaredNorm();
  r.energy = r.kinetic_fluid + r.kinetic_plate + r.kinetic_biot +
             r.potential_plate_pressure + r.potential_elastic + r.potential_biot_pressure +
             r.potential_bending + r.potential_spring;
}

State state_difference(const State& a, const State& b) {
  State d = a;
  d.u -= b.u;
  d.pf -= b.pf;
  d.w -= b.w;
  d.wdot -= b.wdot;
  d.pp -= b.pp;
  d.eta -= b.eta;
  d.etadot -= b.etadot;
  d.pb -= b.pb;
  return d;
}

} // namespace

// ===========================================================================
// Energy and dissipation
// ===========================================================================

EnergyReport compute_energy(const State& s, const Discretization& disc,
                            const PhysicalParams& p, const PermField& k,
                            const PlaneTransform* tr) {
  EnergyReport r;
  energy_terms(s, disc, p, r);

  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int top = disc.fluid_velocity.n_nodes() - 1;
  const TransverseMesh& bm = disc.biot;

  double dfluid = 0.0, dbjs = 0.0, dplate = 0.0, dbiot = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    const QuadEval ue = eval_at_quad(disc.fluid_velocity, s.u.col(m), nc);
    dfluid += quad_sym_grad_sq(disc.fluid_velocity, kap, dp, ue);
    for (int j = 0; j < dp; ++j)
      dbjs += std::norm(s.u(j * disc.fluid_velocity.n_nodes() + top, m));
    const QuadEval pe = eval_at_quad(disc.plate, s.pp.col(m), 1);
    for (int q = 0; q < disc.plate.n_quad_total(); ++q)
      dplate += disc.plate.quad_w(q) * std::norm(pe.dval(0, q));
    const QuadEval be = eval_at_quad(bm, s.pb.col(m), 1);
    const double k2 = kap.squaredNorm();
    for (int q = 0; q < bm.n_quad_total(); ++q)
      dbiot += bm.quad_w(q) * k.mean(q) *
               (k2 * std::norm(be.val(0, q)) + std::norm(be.dval(0, q)));
  }
  if (k.has_fluct) {
    if (tr == nullptr)
      throw std::invalid_argument(
          "fluctuating permeability dissipation requires the collocation transform");
    const int Q = bm.n_quad_total();
    const int nm = disc.n_modes();
    const int np = tr->n_points();
    Eigen::MatrixXcd P(Q, nm), DP(Q, nm);
    for (int m = 0; m < nm; ++m) {
      const QuadEval be = eval_at_quad(bm, s.pb.col(m), 1);
      P.col(m) = be.val.row(0).transpose();
      DP.col(m) = be.dval.row(0).transpose();
    }
    Eigen::VectorXcd modes(nm), phys(np);
    Eigen::VectorXd grad_sq(np);
    for (int q = 0; q < Q; ++q) {
      grad_sq.setZero();
      for (int j = 0; j < dp; ++j) {
        for (int m = 0; m < nm; ++m) {
          const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
          modes(m) = Complex(0.0, kap(j)) * P(q, m);
        }
        tr->to_physical(modes, phys);
        grad_sq += phys.cwiseAbs2();
      }
      modes = DP.row(q).transpose();
      tr->to_physical(modes, phys);
      grad_sq += phys.cwiseAbs2();
      dbiot += bm.quad_w(q) * k.fluct.row(q).dot(grad_sq) / static_cast<double>(np);
    }
  }

  r.diss_fluid = 2.0 * p.mu_f * dfluid;
  r.diss_bjs = p.beta * dbjs;
  r.diss_plate_pressure = p.k_p * dplate;
  r.diss_biot_pressure = dbiot;
  r.dissipation = r.diss_fluid + r.diss_bjs + r.diss_plate_pressure + r.diss_biot_pressure;
  return r;
}

double source_work_bound(const SampledSources& src, const State& s,
                         const Discretization& disc, const PhysicalParams& p) {
  (void)p;
  if (src.empty) return 0.0;
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nvel = disc.fluid_velocity.n_nodes();
  const int top = nvel - 1;
  const int npl = disc.plate.n_nodes();
  const int nb = disc.biot.n_nodes();
  double bound = 0.0;
  const auto pair_term = [&bound](double f_sq, double phi_sq) {
    if (f_sq > 0.0) bound += kYoung * f_sq + kYoung * phi_sq;
  };

  // Volume pairings.
  double f_sq = 0.0;
  for (int c = 0; c < nc && !src.f.empty(); ++c)
    f_sq += sampled_l2_sq(src.f[static_cast<std::size_t>(c)], disc.fluid_velocity);
  pair_term(f_sq, field_l2_sq(s.u, disc.fluid_velocity, nc));

  double fb_sq = 0.0;
  for (int c = 0; c < nc && !src.Fb.empty(); ++c)
    fb_sq += sampled_l2_sq(src.Fb[static_cast<std::size_t>(c)], disc.biot);
  pair_term(fb_sq, field_l2_sq(s.etadot, disc.biot, nc));

  pair_term(src.S.size() > 0 ? sampled_l2_sq(src.S, disc.biot) : 0.0,
            field_l2_sq(s.pb, disc.biot, 1));
  pair_term(src.Sp.size() > 0 ? sampled_l2_sq(src.Sp, disc.plate) : 0.0,
            field_l2_sq(s.pp, disc.plate, 1));
  pair_term(src.Fp.size() > 0 ? mode_weight_sum(src.Fp) : 0.0, s.wdot.squaredNorm());

  // Interface pairings.
  double bjs_sq = 0.0, ut_sq = 0.0;
  for (int j = 0; j < dp && !src.g_bjs.empty(); ++j) {
    bjs_sq += mode_weight_sum(src.g_bjs[static_cast<std::size_t>(j)]);
    for (int m = 0; m < disc.n_modes(); ++m) ut_sq += std::norm(s.u(j * nvel + top, m));
  }
  pair_term(bjs_sq, ut_sq);

  if (src.g_pres.size() > 0) {
    double phi = 0.0;
    for (int m = 0; m < disc.n_modes(); ++m)
      phi += std::norm(s.u(dp * nvel + top, m) - s.wdot(0, m));
    pair_term(mode_weight_sum(src.g_pres), phi);
  }
  if (src.g_filt.size() > 0) {
    double phi = 0.0;
    for (int m = 0; m < disc.n_modes(); ++m) phi += std::norm(s.pp(0, m));
    pair_term(mode_weight_sum(src.g_filt), phi);
  }
  if (src.g_flux.size() > 0) {
    double phi = 0.0;
    for (int m = 0; m < disc.n_modes(); ++m) phi += std::norm(s.pp(npl - 1, m));
    pair_term(mode_weight_sum(src.g_flux), phi);
  }
  if (src.g_btop.size() > 0) {
    double phi = 0.0;
    for (int m = 0; m < disc.n_modes(); ++m) phi += std::norm(s.pb(nb - 1, m));
    pair_term(mode_weight_sum(src.g_btop), phi);
  }
  double btrac_sq = 0.0, etad_sq = 0.0;
  for (int c = 0; c < nc && !src.g_btrac.empty(); ++c) {
    btrac_sq += mode_weight_sum(src.g_btrac[static_cast<std::size_t>(c)]);
    for (int m = 0; m < disc.n_modes(); ++m)
      etad_sq += std::norm(s.etadot(c * nb + (nb - 1), m));
  }
  pair_term(btrac_sq, etad_sq);
  return bound;
}

EnergyCheck check_energy_inequality(const std::vector<State>& traj,
                                    const Discretization& disc, const PhysicalParams& p,
                                    const PermeabilityModel& perm,
                                    const PlaneTransform& tr,
                                    const SourceProvider& sources, double tol_rel) {
  EnergyCheck out;
  out.young_constant = kYoung;
  if (traj.empty()) return out;
  const std::size_t N = traj.size() - 1;
  out.energies.reserve(traj.size());
  out.margins.reserve(N);

  // E^0 needs no permeability; evaluate its terms with the first step's field.
  PermField k0 = eval_permeability(perm, p, disc, tr, traj.front(), traj.front().t);
  out.energies.push_back(compute_energy(traj.front(), disc, p, k0, &tr).energy);
  out.e0 = out.energies.front();
  out.min_margin = std::numeric_limits<double>::infinity();

  for (std::size_t n = 1; n <= N; ++n) {
    const State& prev = traj[n - 1];
    const State& next = traj[n];
    const double dt = next.t - prev.t;
    const PermField k = eval_permeability(perm, p, disc, tr, prev, prev.t);
    const EnergyReport r = compute_energy(next, disc, p, k, &tr);
    const double work =
        sources ? source_work_bound(sources(next.t), next, disc, p) : 0.0;
    const double margin = out.energies.back() + dt * work - r.energy - dt * r.dissipation;
    out.energies.push_back(r.energy);
    out.dissipations.push_back(r.dissipation);
    out.work_bounds.push_back(work);
    out.margins.push_back(margin);
    out.min_margin = std::min(out.min_margin, margin);
  }
  out.pass = out.min_margin >= -tol_rel * out.e0;
  return out;
}

// ===========================================================================
// Interface residuals
// ===========================================================================

InterfaceResiduals interface_residuals(const State& s, const Discretization& disc,
                                       const PlaneTransform& tr, const PhysicalParams& p,
                                       const PermeabilityModel& perm,
                                       const SampledSources* correction) {
  InterfaceResiduals r;
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nm = disc.n_modes();
  const int nvel = disc.fluid_velocity.n_nodes();
  const int npf = disc.fluid_pressure.n_nodes();
  const int npl = disc.plate.n_nodes();
  const int nb = disc.biot.n_nodes();
  const Complex I(0.0, 1.0);

  // Trace of k_b d3 p_b at x3 = 0 per mode; prescribed space-time and
  // nonlinear laws vary in-plane, so the product is formed on the collocation
  // grid. The nonlinear law is evaluated on the state's own recovered nodal
  // fluid content (diagnostic convention).
  Eigen::RowVectorXcd kdpb(nm);
  {
    Eigen::RowVectorXcd dpb(nm);
    for (int m = 0; m < nm; ++m)
      dpb(m) = disc.biot.deriv_left.cast<Complex>().dot(s.pb.col(m));
    if (perm.kind == PermeabilityKind::Constant) {
      kdpb = perm.k0 * dpb;
    } else {
      const int np = tr.n_points();
      Eigen::VectorXcd phys(np), kmodes(nm);
      tr.to_physical(dpb.transpose(), phys);
      Eigen::VectorXd kbot(np);
      if (perm.kind == PermeabilityKind::SpaceTime) {
        for (int i = 0; i < np; ++i) {
          ExprVars v{};
          const Eigen::Vector2d pt = tr.point(i);
          v.x1 = pt(0);
          v.x2 = pt(1);
          v.x3 = 0.0;
          v.t = s.t;
          kbot(i) = perm.spacetime.eval(v);
        }
      } else {
        const Eigen::MatrixXcd zeta = fluid_content_nodal(s, disc, p.c_b, p.alpha_b);
        Eigen::VectorXcd zphys(np);
        tr.to_physical(zeta.row(0).transpose(), zphys);
        for (int i = 0; i < np; ++i) {
          ExprVars v{};
          v.z = zphys(i).real();
          kbot(i) = std::clamp(perm.response.eval(v), perm.k_min, perm.k_max);
        }
      }
      phys.array() *= kbot.array();
      tr.to_modes(phys, kmodes);
      kdpb = kmodes.transpose();
    }
  }

  double kin = 0.0, ptr = 0.0, flux = 0.0, filt = 0.0, nstr = 0.0, bjs = 0.0, btrac = 0.0;
  for (int m = 0; m < nm; ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);

    // Essential ties.
    for (int c = 0; c < dp; ++c) kin += std::norm(s.eta(c * nb, m));
    kin += std::norm(s.eta(dp * nb, m) - s.w(0, m));
    ptr += std::norm(s.pp(npl - 1, m) - s.pb(0, m));

    // Fluid traction at the interface x3 = 0 (top of the fluid mesh).
    const auto uc = [&](int comp) { return s.u.col(m).segment(comp * nvel, nvel); };
    const Complex duz = disc.fluid_velocity.deriv_right.cast<Complex>().dot(uc(dp));
    const Complex pf_top = s.pf(npf - 1, m);
    const Complex sig_nn = 2.0 * p.mu_f * duz - pf_top;

    Complex res = sig_nn + s.pp(0, m);
    if (correction && correction->g_pres.size() > 0) res -= correction->g_pres(m);
    nstr += std::norm(res);

    for (int j = 0; j < dp; ++j) {
      const Complex duj = disc.fluid_velocity.deriv_right.cast<Complex>().dot(uc(j));
      Complex sig_t = p.mu_f * (I * kap(j) * s.u(dp * nvel + (nvel - 1), m) + duj);
      Complex rb = sig_t + p.beta * s.u(j * nvel + (nvel - 1), m);
      if (correction && !correction->g_bjs.empty())
        rb -= correction->g_bjs[static_cast<std::size_t>(j)](m);
      bjs += std::norm(rb);
    }

    // Filtration at s = -h/2 (plate bottom).
    const Complex dpp_bot = disc.plate.deriv_left.cast<Complex>().dot(s.pp.col(m));
    Complex rf = s.wdot(0, m) - s.u(dp * nvel + (nvel - 1), m) - p.k_p * dpp_bot;
    if (correction && correction->g_filt.size() > 0) rf -= correction->g_filt(m);
    filt += std::norm(rf);

    // Flux continuity at s = h/2, x3 = 0.
    const Complex dpp_top = disc.plate.deriv_right.cast<Complex>().dot(s.pp.col(m));
    Complex rx = p.k_p * dpp_top - kdpb(m);
    if (correction && correction->g_flux.size() > 0) rx -= correction->g_flux(m);
    flux += std::norm(rx);

    // Total Biot traction at x3 = 1.
    const auto ec = [&](int comp) { return s.eta.col(m).segment(comp * nb, nb); };
    const auto edc = [&](int comp) { return s.etadot.col(m).segment(comp * nb, nb); };
    const Eigen::RowVectorXd& DR = disc.biot.deriv_right;
    Complex div_top(0.0, 0.0), divd_top(0.0, 0.0);
    for (int j = 0; j < dp; ++j) {
      div_top += I * kap(j) * s.eta(j * nb + (nb - 1), m);
      divd_top += I * kap(j) * s.etadot(j * nb + (nb - 1), m);
    }
    div_top += DR.cast<Complex>().dot(ec(dp));
    divd_top += DR.cast<Complex>().dot(edc(dp));
    for (int c = 0; c < nc; ++c) {
      Complex tc;
      if (c < dp) {
        tc = p.mu_b * (I * kap(c) * s.eta(dp * nb + (nb - 1), m) +
                       DR.cast<Complex>().dot(ec(c))) +
             p.mu_v * (I * kap(c) * s.etadot(dp * nb + (nb - 1), m) +
                       DR.cast<Complex>().dot(edc(c)));
      } else {
        tc = 2.0 * p.mu_b * DR.cast<Complex>().dot(ec(dp)) + p.lambda_b * div_top +
             2.0 * p.mu_v * DR.cast<Complex>().dot(edc(dp)) + p.lambda_v * divd_top -
             p.alpha_b * s.pb(nb - 1, m);
      }
      if (correction && !correction->g_btrac.empty())
        tc -= correction->g_btrac[static_cast<std::size_t>(c)](m);
      btrac += std::norm(tc);
    }
  }

  r.kinematic = std::sqrt(kin);
  r.pressure_trace = std::sqrt(ptr);
  r.flux = std::sqrt(flux);
  r.filtration = std::sqrt(filt);
  r.normal_stress = std::sqrt(nstr);
  r.bjs = std::sqrt(bjs);
  r.biot_traction = std::sqrt(btrac);
  return r;
}

// ===========================================================================
// Trace-coupling norm probe
// ===========================================================================

namespace {

/// Largest generalized ratio x^H B x / x^H A x over the span of A's
/// directions with eigenvalue > tol; sets `divergent` when a discarded
/// direction carries B-energy.
double max_ratio(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B, bool* divergent) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ea(A);
  const Eigen::VectorXd lam = ea.eigenvalues();
  const double amax = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  const double tol = 1e-11 * amax;
  const double bscale = std::max(B.norm(), 1e-300);

  std::vector<int> kept;
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) > tol) {
      kept.push_back(i);
    } else {
      const Eigen::VectorXcd v = ea.eigenvectors().col(i);
      const double benergy = (v.adjoint() * B * v)(0).real();
      if (benergy > 1e-9 * bscale) *divergent = true;
    }
  }
  if (kept.empty()) return 0.0;
  Eigen::MatrixXcd V(A.rows(), static_cast<Eigen::Index>(kept.size()));
  Eigen::VectorXd scale(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    V.col(static_cast<Eigen::Index>(j)) = ea.eigenvectors().col(kept[j]);
    scale(static_cast<Eigen::Index>(j)) = 1.0 / std::sqrt(lam(kept[j]));
  }
  const Eigen::MatrixXcd W =
      scale.asDiagonal() * (V.adjoint() * B * V) * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ew(W);
  return std::max(0.0, ew.eigenvalues().maxCoeff());
}

} // namespace

PoincareReport poincare_probe(const Discretization& disc, bool interface_constraints,
                              int dense_cap) {
  const FieldLayout lay = build_layout(disc, interface_constraints);
  if (lay.n_free > dense_cap)
    throw ConfigError("norm probe: per-mode dense eigenproblem exceeds the cap (" +
                      std::to_string(lay.n_free) + " > " + std::to_string(dense_cap) + ")");
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nvel = disc.fluid_velocity.n_nodes();
  const int npl = disc.plate.n_nodes();
  const int nb = disc.biot.n_nodes();

  // Constant transverse Gram blocks.
  const Eigen::MatrixXd Mv = mass_matrix(disc.fluid_velocity);
  const Eigen::MatrixXd Ml = mass_matrix(disc.plate);
  const Eigen::MatrixXd Kl = stiffness_matrix(disc.plate);
  const Eigen::MatrixXd Mb = mass_matrix(disc.biot);
  const Eigen::MatrixXd Kb = stiffness_matrix(disc.biot);

  // Free indices that carry sd-energy (everything except the multiplier p_f).
  std::vector<int> keep;
  for (int f = 0; f < lay.n_free; ++f) {
    const int full = lay.full_of_free[static_cast<std::size_t>(f)];
    if (full < lay.off_pf || full >= lay.off_pf + lay.npf) keep.push_back(f);
  }
  const int nk = static_cast<int>(keep.size());

  PoincareReport rep;
  for (const ModeIndex xi : disc.modes) {
    if (!is_canonical(xi)) continue;
    const Eigen::Vector2d kap = wavevector(xi);
    const double k2 = kap.squaredNorm();

    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(lay.n_full, lay.n_full);
    Eigen::MatrixXcd Be = Eigen::MatrixXcd::Zero(lay.n_full, lay.n_full);
    Eigen::MatrixXcd Bp = Eigen::MatrixXcd::Zero(lay.n_full, lay.n_full);

    // Velocity: L2 + 2 ||D(u)||^2 (unit-parameter H1 representative).
    const Eigen::MatrixXcd SGv = sym_grad_form(disc.fluid_velocity, kap, dp);
    A.block(lay.off_u, lay.off_u, nc * nvel, nc * nvel) = 2.0 * SGv;
    for (int c = 0; c < nc; ++c)
      A.block(lay.u_index(c, 0), lay.u_index(c, 0), nvel, nvel) += Mv.cast<Complex>();
    // Deflection: (|kappa|^4 + 1) |w|^2.
    A(lay.w_index(), lay.w_index()) = k2 * k2 + 1.0;
    // Plate pressure: L2 + transverse H1.
    A.block(lay.off_pp, lay.off_pp, npl, npl) = (Ml + Kl).cast<Complex>();
    // Displacement: elastic energy norm at unit moduli.
    const Eigen::MatrixXcd SGb = sym_grad_form(disc.biot, kap, dp);
    const Eigen::MatrixXcd DIVb = div_form(disc.biot, kap, dp);
    A.block(lay.off_eta, lay.off_eta, nc * nb, nc * nb) = 2.0 * SGb + DIVb;
    // Biot pressure: ||grad p_b||^2.
    A.block(lay.off_pb, lay.off_pb, nb, nb) = (Kb + k2 * Mb).cast<Complex>();

    for (int c = 0; c < nc; ++c)
      Be.block(lay.eta_index(c, 0), lay.eta_index(c, 0), nb, nb) = Mb.cast<Complex>();
    Bp.block(lay.off_pb, lay.off_pb, nb, nb) = Mb.cast<Complex>();

    const Eigen::MatrixXcd C = lay.C.cast<Complex>();
    const Eigen::MatrixXcd Ac = C.adjoint() * A * C;
    const Eigen::MatrixXcd Bec = C.adjoint() * Be * C;
    const Eigen::MatrixXcd Bpc = C.adjoint() * Bp * C;

    Eigen::MatrixXcd At(nk, nk), Bet(nk, nk), Bpt(nk, nk);
    for (int i = 0; i < nk; ++i)
      for (int j = 0; j < nk; ++j) {
        At(i, j) = Ac(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
        Bet(i, j) = Bec(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
        Bpt(i, j) = Bpc(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
      }

    rep.c_eta = std::max(rep.c_eta, max_ratio(At, Bet, &rep.divergent_eta));
    rep.c_pb = std::max(rep.c_pb, max_ratio(At, Bpt, &rep.divergent_pb));
  }
  if (rep.divergent_eta) rep.c_eta = std::numeric_limits<double>::infinity();
  if (rep.divergent_pb) rep.c_pb = std::numeric_limits<double>::infinity();
  return rep;
}

// ===========================================================================
// Stability (uniqueness surrogate)
// ===========================================================================

StabilityReport stability_experiment(const Discretization& disc, const PhysicalParams& p,
                                     const PermeabilityModel& perm, const State& base,
                                     double T, int N, double delta,
                                     std::uint64_t perturbation_seed) {
  StabilityReport rep;
  if (delta == 0.0) return rep; // identical runs: ratio undefined

  State pert = base;
  {
    const State noise = random_admissible_state(disc, perturbation_seed);
    pert.u += delta * noise.u;
    pert.w += delta * noise.w;
    pert.pp += delta * noise.pp;
    pert.eta += delta * noise.eta;
    pert.pb += delta * noise.pb;
    if (p.mode == RunMode::DynamicLinear) pert.etadot += delta * noise.etadot;
    if (p.rho_p != 0.0) pert.wdot += delta * noise.wdot;
    apply_constraints(pert, disc);
  }

  RunSetup cfg;
  cfg.params = p;
  cfg.perm = perm;
  cfg.T = T;
  cfg.N = N;
  const Trajectory a = rothe_run(cfg, disc, base);
  const Trajectory b = rothe_run(cfg, disc, pert);

  PermField dummy;
  dummy.mean = Eigen::VectorXd::Zero(disc.biot.n_quad_total());
  EnergyReport r0;
  energy_terms(state_difference(b.states.front(), a.states.front()), disc, p, r0);
  rep.e_diff0 = r0.energy;
  if (rep.e_diff0 <= 0.0) return rep;
  double worst = 1.0;
  for (std::size_t n = 1; n < a.states.size(); ++n) {
    EnergyReport rn;
    energy_terms(state_difference(b.states[n], a.states[n]), disc, p, rn);
    worst = std::max(worst, rn.energy / rep.e_diff0);
  }
  rep.ratio = worst;
  rep.valid = true;
  return rep;
}

// ===========================================================================
// Optional spectral-decay report
// ===========================================================================

SpectralDecay spectral_decay_report(const State& s, const Discretization& disc) {
  SpectralDecay out;
  out.shell_amplitude.assign(static_cast<std::size_t>(disc.M) + 1, 0.0);
  const int nc = disc.domain.n_comp();
  for (int m = 0; m < disc.n_modes(); ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    const int shell = std::max(std::abs(xi[0]), std::abs(xi[1]));
    const QuadEval e = eval_at_quad(disc.biot, s.eta.col(m), nc);
    double amp = 0.0;
    for (int q = 0; q < disc.biot.n_quad_total(); ++q)
      amp += disc.biot.quad_w(q) * e.val.col(q).squaredNorm();
    out.shell_amplitude[static_cast<std::size_t>(shell)] =
        std::max(out.shell_amplitude[static_cast<std::size_t>(shell)], std::sqrt(amp));
  }
  // Least-squares slope of log amplitude vs shell index over populated shells.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < out.shell_amplitude.size(); ++k) {
    if (out.shell_amplitude[k] <= 1e-300) continue;
    const double x = static_cast<double>(k);
    const double y = std::log(out.shell_amplitude[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n >= 2 && sxx * n - sx * sx > 0.0)
    out.decay_rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return out;
}

} // namespace fpsi
