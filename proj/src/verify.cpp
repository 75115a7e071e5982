/** @file verify.cpp
 *  @brief Brute-force dense reference path and manufactured-solution tooling.
 *
 *  The dense path shares only index bookkeeping (FieldLayout offsets) with the
 *  production assembly: every weak-form term is re-integrated here by naive
 *  quadrature loops, in-plane integrals are explicit collocation sums over
 *  mode pairs, constraints are explicit rows condensed through an LU kernel,
 *  and the solve is one dense factorization of the global system.
 */
#include "fpsi/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

#include "fpsi/errors.hpp"
#include "fpsi/stepper.hpp"

namespace fpsi {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kPi = 3.141592653589793238462643383279502884;

// ===========================================================================
// Dense reference helpers
// ===========================================================================

/// Collocation grid coordinates in PlaneTransform ordering (row-major,
/// x = j / n_colloc), recomputed from scratch.
std::vector<Eigen::Vector2d> colloc_points(const Discretization& disc) {
  const int nc = disc.n_colloc;
  const int np = disc.n_colloc_total();
  std::vector<Eigen::Vector2d> pts(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    if (disc.domain.d_plane == 1)
      pts[static_cast<std::size_t>(i)] = {static_cast<double>(i) / nc, 0.0};
    else
      pts[static_cast<std::size_t>(i)] = {static_cast<double>(i / nc) / nc,
                                          static_cast<double>(i % nc) / nc};
  }
  return pts;
}

/// In-plane pairings of the trial/test Fourier factors:
///   phase(mu, nu)      = (1/N) sum_i e^{i (kappa_nu - kappa_mu) . x_i}
///   kphase[q](mu, nu)  = (1/N) sum_i k(q, x_i) e^{i (kappa_nu - kappa_mu) . x_i}
struct PlanePairings {
  Eigen::MatrixXcd phase;
  std::vector<Eigen::MatrixXcd> kphase; ///< one per Biot quadrature point
};

PlanePairings plane_pairings(const Discretization& disc, const PermField& k) {
  const int nm = disc.n_modes();
  const int np = disc.n_colloc_total();
  const int Q = disc.biot.n_quad_total();
  const std::vector<Eigen::Vector2d> pts = colloc_points(disc);

  PlanePairings out;
  out.phase.setZero(nm, nm);
  out.kphase.assign(static_cast<std::size_t>(Q), Eigen::MatrixXcd::Zero(nm, nm));
  for (int mu = 0; mu < nm; ++mu) {
    const Eigen::Vector2d km = wavevector(disc.modes[static_cast<std::size_t>(mu)]);
    for (int nu = 0; nu < nm; ++nu) {
      const Eigen::Vector2d kn = wavevector(disc.modes[static_cast<std::size_t>(nu)]);
      const Eigen::Vector2d dk = kn - km;
      Complex ph(0.0, 0.0);
      Eigen::VectorXcd kph = Eigen::VectorXcd::Zero(Q);
      for (int i = 0; i < np; ++i) {
        const Complex e = std::exp(kI * dk.dot(pts[static_cast<std::size_t>(i)]));
        ph += e;
        for (int q = 0; q < Q; ++q) {
          const double kv =
              k.mean(q) + (k.has_fluct ? k.fluct(q, i) : 0.0);
          kph(q) += kv * e;
        }
      }
      out.phase(mu, nu) = ph / static_cast<double>(np);
      for (int q = 0; q < Q; ++q)
        out.kphase[static_cast<std::size_t>(q)](mu, nu) = kph(q) / static_cast<double>(np);
    }
  }
  return out;
}

/// Symmetric gradient of the separable field e_c * phi(x3) * e^{i kappa . x}:
/// entries D_{mn} = (grad_m delta_{nc} + grad_n delta_{mc}) / 2 with
/// grad_m = i kappa_m phi (in-plane) or phi' (transverse).
Eigen::Matrix3cd strain_of(const Eigen::Vector2d& kap, int dp, int c, Complex phi,
                           Complex dphi) {
  Eigen::Matrix3cd D = Eigen::Matrix3cd::Zero();
  Eigen::Vector3cd grad = Eigen::Vector3cd::Zero();
  for (int m = 0; m < dp; ++m) grad(m) = kI * kap(m) * phi;
  grad(dp) = dphi;
  for (int m = 0; m <= dp; ++m) {
    D(m, c) += 0.5 * grad(m);
    D(c, m) += 0.5 * grad(m);
  }
  return D;
}

Complex div_of(const Eigen::Vector2d& kap, int dp, int c, Complex phi, Complex dphi) {
  return c < dp ? kI * kap(c) * phi : dphi;
}

/// Values/derivatives of the nodal coefficients `coeffs` (one component) at
/// the quadrature points, by direct summation over the shape tables.
void eval_profile(const TransverseMesh& mesh, const Eigen::VectorXcd& coeffs,
                  Eigen::VectorXcd& val, Eigen::VectorXcd& dval) {
  const int Q = mesh.n_quad_total();
  val.setZero(Q);
  dval.setZero(Q);
  for (int q = 0; q < Q; ++q)
    for (int b = 0; b < mesh.n_nodes(); ++b) {
      val(q) += mesh.shape(q, b) * coeffs(b);
      dval(q) += mesh.dshape(q, b) * coeffs(b);
    }
}

/// Explicit constraint rows of the trial/test space, one block per mode:
/// no-slip, clamped tangential displacement, kinematic trace tie, pressure
/// trace tie.
Eigen::MatrixXcd constraint_rows(const Discretization& disc, const FieldLayout& lay) {
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nm = disc.n_modes();
  const int per_mode = nc + dp + 2;
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(nm * per_mode, nm * lay.n_full);
  for (int m = 0; m < nm; ++m) {
    const int r0 = m * per_mode;
    const int c0 = m * lay.n_full;
    int r = r0;
    for (int c = 0; c < nc; ++c) G(r++, c0 + lay.u_index(c, 0)) = 1.0;
    for (int j = 0; j < dp; ++j) G(r++, c0 + lay.eta_index(j, 0)) = 1.0;
    G(r, c0 + lay.eta_index(dp, 0)) = 1.0;
    G(r++, c0 + lay.w_index()) = -1.0;
    G(r, c0 + lay.pp_index(lay.npl - 1)) = 1.0;
    G(r++, c0 + lay.pb_index(0)) = -1.0;
  }
  return G;
}

/// Naive quadrature moment sum_q w_q x_q phi_a(x_q) for every basis function.
Eigen::VectorXd moment_weights(const TransverseMesh& mesh) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int q = 0; q < mesh.n_quad_total(); ++q)
    for (int a = 0; a < mesh.n_nodes(); ++a)
      r(a) += mesh.quad_w(q) * mesh.quad_x(q) * mesh.shape(q, a);
  return r;
}

// ===========================================================================
// Manufactured-solution helpers
// ===========================================================================

void msum_append(ModalSum& acc, const ModalSum& f, Complex c = Complex(1.0, 0.0)) {
  for (const ModalTerm& t : f) acc.push_back({t.amp * c, t.profile, t.timef});
}

/// Time derivative (on the separable time factors).
ModalSum msum_dt(const ModalSum& f) {
  ModalSum out;
  out.reserve(f.size());
  for (const ModalTerm& t : f) out.push_back({t.amp, t.profile, t.timef.derivative("t")});
  return out;
}

/// Transverse derivative; profiles depend on exactly one of x3 / s, so the
/// sum of both partials is the derivative in either case.
ModalSum msum_ddx(const ModalSum& f) {
  ModalSum out;
  out.reserve(f.size());
  for (const ModalTerm& t : f)
    out.push_back({t.amp, t.profile.derivative("x3") + t.profile.derivative("s"), t.timef});
  return out;
}

/// Restriction to a transverse coordinate (profile folded into the amplitude).
ModalSum msum_trace(const ModalSum& f, double coord) {
  ModalSum out;
  out.reserve(f.size());
  for (const ModalTerm& t : f) {
    ExprVars v{};
    v.x3 = coord;
    v.s = coord;
    out.push_back({t.amp * t.profile.eval(v), Expr::constant(1.0), t.timef});
  }
  return out;
}

/// In-plane divergence sum i kappa . f_tang + d3 f_z of a vector field.
ModalSum msum_div(const std::vector<ModalSum>& field, const Eigen::Vector2d& kap, int dp) {
  ModalSum out;
  for (int j = 0; j < dp; ++j)
    msum_append(out, field[static_cast<std::size_t>(j)], kI * kap(j));
  msum_append(out, msum_ddx(field[static_cast<std::size_t>(dp)]));
  return out;
}

/// Numeric transverse moment integral int s * f(s) ds over [-h/2, h/2],
/// folded into time-only terms.
ModalSum msum_moment(const ModalSum& f, double h) {
  const TransverseMesh g = make_mesh(-0.5 * h, 0.5 * h, 4, 2, 6);
  ModalSum out;
  out.reserve(f.size());
  for (const ModalTerm& t : f) {
    double integral = 0.0;
    for (int q = 0; q < g.n_quad_total(); ++q) {
      ExprVars v{};
      v.x3 = g.quad_x(q);
      v.s = g.quad_x(q);
      integral += g.quad_w(q) * g.quad_x(q) * t.profile.eval(v);
    }
    out.push_back({t.amp * integral, Expr::constant(1.0), t.timef});
  }
  return out;
}

/// Total poroelastic traction component (sigma_b e3)_c at transverse
/// coordinate `coord`, including the viscoelastic rate terms and the pore
/// pressure.
ModalSum biot_traction_component(const MmsModeData& md, const PhysicalParams& p,
                                 const Eigen::Vector2d& kap, int dp, int comp,
                                 double coord) {
  const std::vector<ModalSum>& eta = md.eta;
  std::vector<ModalSum> etad(eta.size());
  for (std::size_t c = 0; c < eta.size(); ++c) etad[c] = msum_dt(eta[c]);
  ModalSum out;
  if (comp < dp) {
    msum_append(out, msum_trace(eta[static_cast<std::size_t>(dp)], coord),
                p.mu_b * kI * kap(comp));
    msum_append(out, msum_trace(msum_ddx(eta[static_cast<std::size_t>(comp)]), coord),
                p.mu_b);
    msum_append(out, msum_trace(etad[static_cast<std::size_t>(dp)], coord),
                p.mu_v * kI * kap(comp));
    msum_append(out, msum_trace(msum_ddx(etad[static_cast<std::size_t>(comp)]), coord),
                p.mu_v);
  } else {
    const ModalSum dv = msum_div(eta, kap, dp);
    const ModalSum dvd = msum_div(etad, kap, dp);
    msum_append(out, msum_trace(msum_ddx(eta[static_cast<std::size_t>(dp)]), coord),
                2.0 * p.mu_b);
    msum_append(out, msum_trace(dv, coord), p.lambda_b);
    msum_append(out, msum_trace(msum_ddx(etad[static_cast<std::size_t>(dp)]), coord),
                2.0 * p.mu_v);
    msum_append(out, msum_trace(dvd, coord), p.lambda_v);
    msum_append(out, msum_trace(md.pb, coord), -p.alpha_b);
  }
  return out;
}

ModalSum parse_term(Complex amp, const Expr& profile, const Expr& timef) {
  return ModalSum{ModalTerm{amp, profile, timef}};
}

double msum_sample_scale(const ModalSum& f) {
  double s = 0.0;
  for (const ModalTerm& t : f) s = std::max(s, std::abs(t.amp));
  return s;
}

/// Construction-time validation: divergence-free velocity, essential traces,
/// real zero-mode amplitudes.
void validate_case(const MmsCase& c) {
  const int dp = c.d_plane;
  const int nc = dp + 1;
  const double samples_x[] = {-1.0, -0.63, -0.21, 0.0, 0.37, 0.82, 1.0};
  const double samples_t[] = {0.0, 0.4, 1.0};
  for (const MmsModeData& md : c.modes) {
    if (static_cast<int>(md.u.size()) != nc || static_cast<int>(md.eta.size()) != nc)
      throw ConfigError("manufactured case: component count mismatch");
    const Eigen::Vector2d kap = wavevector(md.xi);
    const ModalSum dv = msum_div(md.u, kap, dp);
    double scale = 1.0;
    for (const ModalSum& s : md.u) scale = std::max(scale, msum_sample_scale(s));
    for (double x : samples_x)
      for (double t : samples_t)
        if (x <= 0.0 && std::abs(modal_eval(dv, x, t)) > 1e-9 * scale)
          throw ConfigError("manufactured case: velocity is not divergence-free");
    for (double t : samples_t) {
      for (int comp = 0; comp < nc; ++comp)
        if (std::abs(modal_eval(md.u[static_cast<std::size_t>(comp)], -1.0, t)) > 1e-12 * scale)
          throw ConfigError("manufactured case: no-slip trace violated");
      for (int j = 0; j < dp; ++j)
        if (std::abs(modal_eval(md.eta[static_cast<std::size_t>(j)], 0.0, t)) > 1e-12)
          throw ConfigError("manufactured case: tangential displacement trace violated");
      if (std::abs(modal_eval(md.eta[static_cast<std::size_t>(dp)], 0.0, t) -
                   modal_eval(md.w, 0.0, t)) > 1e-12)
        throw ConfigError("manufactured case: kinematic trace violated");
      if (std::abs(modal_eval(md.pp, 0.5 * c.h, t) - modal_eval(md.pb, 0.0, t)) > 1e-12)
        throw ConfigError("manufactured case: pressure trace violated");
    }
    if (md.xi[0] == 0 && md.xi[1] == 0) {
      const auto check_real = [](const ModalSum& s) {
        for (const ModalTerm& t : s)
          if (std::abs(t.amp.imag()) > 1e-14)
            throw ConfigError("manufactured case: zero mode must have real amplitudes");
      };
      for (const ModalSum& s : md.u) check_real(s);
      for (const ModalSum& s : md.eta) check_real(s);
      check_real(md.pf);
      check_real(md.w);
      check_real(md.pp);
      check_real(md.pb);
    }
  }
}

} // namespace

// ===========================================================================
// Dense reference matrix
// ===========================================================================

Eigen::MatrixXcd dense_reference_matrix(const Discretization& disc,
                                        const PhysicalParams& p, double dt,
                                        const PermField& k) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const FieldLayout lay = build_layout(disc);
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nm = disc.n_modes();
  const int nf = lay.n_full;
  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& P = disc.fluid_pressure;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;
  const int T = V.n_nodes() - 1;
  const PlanePairings pair = plane_pairings(disc, k);
  const Eigen::VectorXd smom = moment_weights(L);

  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(nm * nf, nm * nf);
  const auto gi = [&](int m, int local) { return m * nf + local; };

  for (int mu = 0; mu < nm; ++mu) {
    const Eigen::Vector2d km = wavevector(disc.modes[static_cast<std::size_t>(mu)]);
    for (int nu = 0; nu < nm; ++nu) {
      const Eigen::Vector2d kn = wavevector(disc.modes[static_cast<std::size_t>(nu)]);
      const Complex ph = pair.phase(mu, nu);

      // --- fluid momentum rows ---------------------------------------------
      for (int c = 0; c < nc; ++c)
        for (int a = 0; a < V.n_nodes(); ++a)
          for (int cc = 0; cc < nc; ++cc)
            for (int b = 0; b < V.n_nodes(); ++b) {
              Complex visc(0.0, 0.0), mass(0.0, 0.0);
              for (int q = 0; q < V.n_quad_total(); ++q) {
                const double wq = V.quad_w(q);
                const Eigen::Matrix3cd Ds =
                    strain_of(km, dp, c, V.shape(q, a), V.dshape(q, a));
                const Eigen::Matrix3cd Dt =
                    strain_of(kn, dp, cc, V.shape(q, b), V.dshape(q, b));
                Complex contr(0.0, 0.0);
                for (int m = 0; m <= dp; ++m)
                  for (int n = 0; n <= dp; ++n) contr += Dt(m, n) * std::conj(Ds(m, n));
                visc += wq * contr;
                if (c == cc) mass += wq * V.shape(q, a) * V.shape(q, b);
              }
              Complex val = p.rho_f * mass + 2.0 * p.mu_f * dt * visc;
              if (c == cc && c < dp && a == T && b == T) val += dt * p.beta;
              A(gi(mu, lay.u_index(c, a)), gi(nu, lay.u_index(cc, b))) += val * ph;
            }

      // fluid pressure gradient: -dt (p_f, div conj(test))
      for (int c = 0; c < nc; ++c)
        for (int a = 0; a < V.n_nodes(); ++a)
          for (int b = 0; b < P.n_nodes(); ++b) {
            Complex acc(0.0, 0.0);
            for (int q = 0; q < V.n_quad_total(); ++q)
              acc += V.quad_w(q) * P.shape(q, b) *
                     std::conj(div_of(km, dp, c, V.shape(q, a), V.dshape(q, a)));
            A(gi(mu, lay.u_index(c, a)), gi(nu, lay.pf_index(b))) += -dt * acc * ph;
          }

      // interface pressure load on the fluid: +dt p_p(-h/2) conj(v_z(0))
      A(gi(mu, lay.u_index(nc - 1, T)), gi(nu, lay.pp_index(0))) += dt * ph;

      // --- incompressibility rows -------------------------------------------
      for (int a = 0; a < P.n_nodes(); ++a)
        for (int cc = 0; cc < nc; ++cc)
          for (int b = 0; b < V.n_nodes(); ++b) {
            Complex acc(0.0, 0.0);
            for (int q = 0; q < V.n_quad_total(); ++q)
              acc += V.quad_w(q) * P.shape(q, a) *
                     div_of(kn, dp, cc, V.shape(q, b), V.dshape(q, b));
            A(gi(mu, lay.pf_index(a)), gi(nu, lay.u_index(cc, b))) += dt * acc * ph;
          }

      // --- plate momentum row -----------------------------------------------
      A(gi(mu, lay.w_index()), gi(nu, lay.w_index())) +=
          (p.rho_p / dt + dt * (p.D_bend * km.squaredNorm() * kn.squaredNorm() + p.gamma)) *
          ph;
      for (int b = 0; b < L.n_nodes(); ++b)
        A(gi(mu, lay.w_index()), gi(nu, lay.pp_index(b))) +=
            -dt * p.alpha_p * km.squaredNorm() * smom(b) * ph;
      A(gi(mu, lay.w_index()), gi(nu, lay.pp_index(0))) += -dt * ph;

      // --- plate pressure rows ------------------------------------------------
      for (int a = 0; a < L.n_nodes(); ++a)
        for (int b = 0; b < L.n_nodes(); ++b) {
          Complex acc(0.0, 0.0);
          for (int q = 0; q < L.n_quad_total(); ++q)
            acc += L.quad_w(q) * (p.c_p * L.shape(q, a) * L.shape(q, b) +
                                  dt * p.k_p * L.dshape(q, a) * L.dshape(q, b));
          A(gi(mu, lay.pp_index(a)), gi(nu, lay.pp_index(b))) += acc * ph;
        }
      for (int a = 0; a < L.n_nodes(); ++a)
        A(gi(mu, lay.pp_index(a)), gi(nu, lay.w_index())) +=
            p.alpha_p * kn.squaredNorm() * smom(a) * ph;
      A(gi(mu, lay.pp_index(0)), gi(nu, lay.w_index())) += ph;
      A(gi(mu, lay.pp_index(0)), gi(nu, lay.u_index(nc - 1, T))) += -dt * ph;

      // --- poroelastic momentum rows -----------------------------------------
      for (int c = 0; c < nc; ++c)
        for (int a = 0; a < B.n_nodes(); ++a) {
          for (int cc = 0; cc < nc; ++cc)
            for (int b = 0; b < B.n_nodes(); ++b) {
              Complex elast(0.0, 0.0), vol(0.0, 0.0), mass(0.0, 0.0);
              for (int q = 0; q < B.n_quad_total(); ++q) {
                const double wq = B.quad_w(q);
                const Eigen::Matrix3cd Ds =
                    strain_of(km, dp, c, B.shape(q, a), B.dshape(q, a));
                const Eigen::Matrix3cd Dt =
                    strain_of(kn, dp, cc, B.shape(q, b), B.dshape(q, b));
                Complex contr(0.0, 0.0);
                for (int m = 0; m <= dp; ++m)
                  for (int n = 0; n <= dp; ++n) contr += Dt(m, n) * std::conj(Ds(m, n));
                elast += wq * contr;
                vol += wq * div_of(kn, dp, cc, B.shape(q, b), B.dshape(q, b)) *
                       std::conj(div_of(km, dp, c, B.shape(q, a), B.dshape(q, a)));
                if (c == cc) mass += wq * B.shape(q, a) * B.shape(q, b);
              }
              Complex val = (2.0 * p.mu_b * dt + 2.0 * p.mu_v) * elast +
                            (p.lambda_b * dt + p.lambda_v) * vol;
              if (p.rho_b > 0.0) val += (p.rho_b / dt) * mass;
              A(gi(mu, lay.eta_index(c, a)), gi(nu, lay.eta_index(cc, b))) += val * ph;
            }
          // -dt alpha_b (p_b, div conj(test))
          for (int b = 0; b < B.n_nodes(); ++b) {
            Complex acc(0.0, 0.0);
            for (int q = 0; q < B.n_quad_total(); ++q)
              acc += B.quad_w(q) * B.shape(q, b) *
                     std::conj(div_of(km, dp, c, B.shape(q, a), B.dshape(q, a)));
            A(gi(mu, lay.eta_index(c, a)), gi(nu, lay.pb_index(b))) +=
                -dt * p.alpha_b * acc * ph;
          }
        }

      // --- Biot pressure rows ---------------------------------------------------
      for (int a = 0; a < B.n_nodes(); ++a) {
        for (int b = 0; b < B.n_nodes(); ++b) {
          Complex store(0.0, 0.0), darcy(0.0, 0.0);
          const double kdot = km.head(dp).dot(kn.head(dp));
          for (int q = 0; q < B.n_quad_total(); ++q) {
            store += B.quad_w(q) * p.c_b * B.shape(q, a) * B.shape(q, b);
            darcy += B.quad_w(q) *
                     (kdot * B.shape(q, a) * B.shape(q, b) +
                      B.dshape(q, a) * B.dshape(q, b)) *
                     pair.kphase[static_cast<std::size_t>(q)](mu, nu);
          }
          A(gi(mu, lay.pb_index(a)), gi(nu, lay.pb_index(b))) += store * ph + dt * darcy;
        }
        for (int cc = 0; cc < nc; ++cc)
          for (int b = 0; b < B.n_nodes(); ++b) {
            Complex acc(0.0, 0.0);
            for (int q = 0; q < B.n_quad_total(); ++q)
              acc += B.quad_w(q) * B.shape(q, a) *
                     div_of(kn, dp, cc, B.shape(q, b), B.dshape(q, b));
            A(gi(mu, lay.pb_index(a)), gi(nu, lay.eta_index(cc, b))) +=
                p.alpha_b * acc * ph;
          }
      }
    }
  }
  return A;
}

// ===========================================================================
// Dense reference step
// ===========================================================================

namespace {

/// Block right-hand side of one mode in full variables, by naive quadrature.
Eigen::VectorXcd dense_mode_rhs(const Discretization& disc, const FieldLayout& lay,
                                const PhysicalParams& p, double dt, int m,
                                const State& prev, const SampledSources* src) {
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;
  const int T = V.n_nodes() - 1;
  const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
  const double k2 = kap.head(dp).squaredNorm();
  const Eigen::VectorXd smom = moment_weights(L);

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(lay.n_full);

  // Fluid: rho_f (u^n, v) + dt (f, v) + interface data.
  {
    Eigen::VectorXcd val, dval;
    for (int c = 0; c < nc; ++c) {
      eval_profile(V, prev.u.col(m).segment(c * V.n_nodes(), V.n_nodes()), val, dval);
      for (int a = 0; a < V.n_nodes(); ++a) {
        Complex acc(0.0, 0.0);
        for (int q = 0; q < V.n_quad_total(); ++q) {
          Complex load = p.rho_f * val(q);
          if (src && !src->empty)
            load += dt * src->f[static_cast<std::size_t>(c)](q, m);
          acc += V.quad_w(q) * load * V.shape(q, a);
        }
        rhs(lay.u_index(c, a)) += acc;
      }
    }
    if (src && !src->empty) {
      for (int j = 0; j < dp; ++j)
        rhs(lay.u_index(j, T)) += dt * src->g_bjs[static_cast<std::size_t>(j)](m);
      rhs(lay.u_index(nc - 1, T)) += dt * src->g_pres(m);
    }
  }

  // Plate momentum.
  rhs(lay.w_index()) += (p.rho_p / dt) * prev.w(0, m) + p.rho_p * prev.wdot(0, m);
  if (src && !src->empty)
    rhs(lay.w_index()) += dt * src->Fp(m) - dt * src->g_pres(m);

  // Plate pressure.
  {
    Eigen::VectorXcd val, dval;
    eval_profile(L, prev.pp.col(m), val, dval);
    for (int a = 0; a < L.n_nodes(); ++a) {
      Complex acc(0.0, 0.0);
      for (int q = 0; q < L.n_quad_total(); ++q) {
        Complex load = p.c_p * val(q);
        if (src && !src->empty) load += dt * src->Sp(q, m);
        acc += L.quad_w(q) * load * L.shape(q, a);
      }
      rhs(lay.pp_index(a)) += acc + p.alpha_p * k2 * smom(a) * prev.w(0, m);
    }
    rhs(lay.pp_index(0)) += prev.w(0, m);
    if (src && !src->empty) {
      rhs(lay.pp_index(0)) += dt * src->g_filt(m);
      rhs(lay.pp_index(lay.npl - 1)) += dt * src->g_flux(m);
    }
  }

  // Poroelastic momentum: inertia history, viscoelastic history, body force.
  {
    std::vector<Eigen::VectorXcd> ev(static_cast<std::size_t>(nc)),
        edv(static_cast<std::size_t>(nc)), rv(static_cast<std::size_t>(nc)),
        rdv(static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) {
      eval_profile(B, prev.eta.col(m).segment(c * B.n_nodes(), B.n_nodes()),
                   ev[static_cast<std::size_t>(c)], edv[static_cast<std::size_t>(c)]);
      eval_profile(B, prev.etadot.col(m).segment(c * B.n_nodes(), B.n_nodes()),
                   rv[static_cast<std::size_t>(c)], rdv[static_cast<std::size_t>(c)]);
    }
    const bool visco = p.mu_v != 0.0 || p.lambda_v != 0.0;
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < B.n_nodes(); ++a) {
        Complex acc(0.0, 0.0);
        for (int q = 0; q < B.n_quad_total(); ++q) {
          const double wq = B.quad_w(q);
          Complex load = (p.rho_b / dt) * ev[static_cast<std::size_t>(c)](q) +
                         p.rho_b * rv[static_cast<std::size_t>(c)](q);
          if (src && !src->empty)
            load += dt * src->Fb[static_cast<std::size_t>(c)](q, m);
          acc += wq * load * B.shape(q, a);
          if (visco) {
            Eigen::Matrix3cd Df = Eigen::Matrix3cd::Zero();
            Complex divf(0.0, 0.0);
            for (int cc = 0; cc < nc; ++cc) {
              Df += strain_of(kap, dp, cc, ev[static_cast<std::size_t>(cc)](q),
                              edv[static_cast<std::size_t>(cc)](q));
              divf += div_of(kap, dp, cc, ev[static_cast<std::size_t>(cc)](q),
                             edv[static_cast<std::size_t>(cc)](q));
            }
            const Eigen::Matrix3cd Ds =
                strain_of(kap, dp, c, B.shape(q, a), B.dshape(q, a));
            Complex contr(0.0, 0.0);
            for (int mi = 0; mi <= dp; ++mi)
              for (int ni = 0; ni <= dp; ++ni) contr += Df(mi, ni) * std::conj(Ds(mi, ni));
            acc += wq * (2.0 * p.mu_v * contr +
                         p.lambda_v * divf *
                             std::conj(div_of(kap, dp, c, B.shape(q, a), B.dshape(q, a))));
          }
        }
        rhs(lay.eta_index(c, a)) += acc;
        if (src && !src->empty && a == B.n_nodes() - 1)
          rhs(lay.eta_index(c, a)) += dt * src->g_btrac[static_cast<std::size_t>(c)](m);
      }

    // Biot pressure: storage history + content coupling + source.
    Eigen::VectorXcd pv, pdv;
    eval_profile(B, prev.pb.col(m), pv, pdv);
    for (int a = 0; a < B.n_nodes(); ++a) {
      Complex acc(0.0, 0.0);
      for (int q = 0; q < B.n_quad_total(); ++q) {
        Complex divf(0.0, 0.0);
        for (int cc = 0; cc < nc; ++cc)
          divf += div_of(kap, dp, cc, ev[static_cast<std::size_t>(cc)](q),
                         edv[static_cast<std::size_t>(cc)](q));
        Complex load = p.c_b * pv(q) + p.alpha_b * divf;
        if (src && !src->empty) load += dt * src->S(q, m);
        acc += B.quad_w(q) * load * B.shape(q, a);
      }
      rhs(lay.pb_index(a)) += acc;
    }
    if (src && !src->empty) rhs(lay.pb_index(lay.nb - 1)) += dt * src->g_btop(m);
  }
  return rhs;
}

} // namespace

State dense_reference_step(const State& prev, const Discretization& disc,
                           const PhysicalParams& p, double dt, const PermField& k,
                           const SampledSources* src, DenseReport* report,
                           bool want_condition, int dense_cap) {
  const FieldLayout lay = build_layout(disc);
  const int nm = disc.n_modes();
  const int ntot = nm * lay.n_full;

  const Eigen::MatrixXcd A = dense_reference_matrix(disc, p, dt, k);
  Eigen::VectorXcd b(ntot);
  for (int m = 0; m < nm; ++m)
    b.segment(m * lay.n_full, lay.n_full) = dense_mode_rhs(disc, lay, p, dt, m, prev, src);

  const Eigen::MatrixXcd G = constraint_rows(disc, lay);
  Eigen::FullPivLU<Eigen::MatrixXcd> glu(G);
  const Eigen::MatrixXcd Z = glu.kernel();
  if (Z.cols() > dense_cap)
    throw ConfigError("dense reference step: free size " + std::to_string(Z.cols()) +
                      " exceeds the cap " + std::to_string(dense_cap));

  const Eigen::MatrixXcd Ar = Z.adjoint() * A * Z;
  const Eigen::VectorXcd br = Z.adjoint() * b;
  const Eigen::VectorXcd y = Eigen::PartialPivLU<Eigen::MatrixXcd>(Ar).solve(br);
  const Eigen::VectorXcd X = Z * y;

  if (report) {
    report->n_total = ntot;
    report->n_constraints = ntot - static_cast<int>(Z.cols());
    report->n_free = static_cast<int>(Z.cols());
    if (want_condition) {
      const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Ar);
      const Eigen::VectorXd sv = svd.singularValues();
      report->condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                  : std::numeric_limits<double>::infinity();
    }
  }

  State next = prev;
  for (int m = 0; m < nm; ++m)
    scatter_full(next, lay, m, X.segment(m * lay.n_full, lay.n_full));
  next.t = prev.t + dt;
  next.wdot = (next.w - prev.w) / dt;
  next.etadot = (next.eta - prev.eta) / dt;
  return next;
}

// ===========================================================================
// Manufactured cases
// ===========================================================================

Complex modal_eval(const ModalSum& f, double coord, double t) {
  Complex acc(0.0, 0.0);
  ExprVars v{};
  v.x3 = coord;
  v.s = coord;
  ExprVars vt{};
  vt.t = t;
  for (const ModalTerm& term : f)
    acc += term.amp * term.profile.eval(v) * term.timef.eval(vt);
  return acc;
}

MmsCase mms_temporal_case() {
  MmsCase c;
  c.name = "temporal";
  c.d_plane = 1;
  c.h = 0.1;
  c.representable = true;
  const Expr g = expr_exp(-Expr::variable("t"));
  const Expr x3 = Expr::variable("x3");
  const Expr sv = Expr::variable("s");
  const Expr one = Expr::constant(1.0);
  const Expr lin_up = one + x3;                    // 1 + x3 on [-1, 0]
  const Expr quad_up = expr_pow(one + x3, 2.0);    // (1 + x3)^2
  const Expr lin_dn = one - x3;                    // 1 - x3 on [0, 1]

  // Mode xi = (1, 0): kappa = 2 pi.
  {
    MmsModeData md;
    md.xi = {1, 0};
    const double kap = 2.0 * kPi;
    const Complex Az(0.3, -0.1);
    const Complex W(0.2, 0.1);
    const Complex Pb0(0.3, 0.05), Pb1(-0.15, 0.1);
    const Complex P1(0.4, -0.2);
    md.u.resize(2);
    md.u[1] = parse_term(Az, quad_up, g);
    md.u[0] = parse_term(kI * 2.0 * Az / kap, lin_up, g); // divergence-free partner
    md.pf = parse_term(Complex(0.25, -0.15), lin_up, g);
    md.w = parse_term(W, one, g);
    md.eta.resize(2);
    md.eta[0] = parse_term(Complex(0.1, -0.05), x3, g);
    md.eta[1] = parse_term(W, lin_dn, g);
    md.pb = parse_term(Pb0, one, g);
    msum_append(md.pb, parse_term(Pb1, x3, g));
    md.pp = parse_term(Pb0 - P1 * (0.5 * c.h), one, g);
    msum_append(md.pp, parse_term(P1, sv, g));
    c.modes.push_back(std::move(md));
  }
  // Mode xi = (0, 0): real amplitudes, shear-only velocity.
  {
    MmsModeData md;
    md.xi = {0, 0};
    md.u.resize(2);
    md.u[0] = parse_term(Complex(0.2, 0.0), quad_up, g);
    md.pf = parse_term(Complex(0.1, 0.0), lin_up, g);
    md.w = parse_term(Complex(0.15, 0.0), one, g);
    md.eta.resize(2);
    md.eta[0] = parse_term(Complex(0.1, 0.0), x3, g);
    md.eta[1] = parse_term(Complex(0.15, 0.0), lin_dn, g);
    md.pb = parse_term(Complex(0.2, 0.0), one, g);
    msum_append(md.pb, parse_term(Complex(-0.1, 0.0), x3, g));
    md.pp = parse_term(Complex(0.2 - 0.3 * 0.5 * c.h, 0.0), one, g);
    msum_append(md.pp, parse_term(Complex(0.3, 0.0), sv, g));
    c.modes.push_back(std::move(md));
  }
  validate_case(c);
  return c;
}

MmsCase mms_spatial_case() {
  MmsCase c;
  c.name = "spatial";
  c.d_plane = 1;
  c.h = 0.1;
  c.representable = false;
  const Expr g = Expr::constant(1.0) + Expr::constant(0.5) * Expr::variable("t");
  const Expr x3 = Expr::variable("x3");
  const Expr sv = Expr::variable("s");
  const Expr one = Expr::constant(1.0);
  const Expr arg_up = Expr::constant(kPi) * (one + x3);      // pi (1 + x3)
  const Expr hump = one - expr_cos(arg_up);                  // 0 at x3 = -1
  const Expr wave = expr_sin(arg_up);                        // 0 at x3 = -1
  const Expr cosq = expr_cos(Expr::constant(0.5 * kPi) * x3); // 1 at x3 = 0
  const Expr sinb = expr_sin(Expr::constant(kPi) * x3);       // 0 at x3 = 0
  const Expr cosb = expr_cos(Expr::constant(kPi) * x3);       // 1 at x3 = 0
  const Expr cosp =
      expr_cos(Expr::constant(5.0 * kPi) * (sv - Expr::constant(0.05))); // 1 at s = h/2

  // Mode xi = (1, 0).
  {
    MmsModeData md;
    md.xi = {1, 0};
    const double kap = 2.0 * kPi;
    const Complex Az(0.25, 0.1);
    const Complex W(0.2, 0.1);
    const Complex B(0.3, -0.08);
    md.u.resize(2);
    md.u[1] = parse_term(Az, hump, g);
    md.u[0] = parse_term(kI * Az * kPi / kap, wave, g); // divergence-free partner
    md.pf = parse_term(Complex(0.2, -0.1), expr_cos(arg_up), g);
    md.w = parse_term(W, one, g);
    md.eta.resize(2);
    md.eta[0] = parse_term(Complex(0.1, -0.05), sinb, g);
    md.eta[1] = parse_term(W, cosq, g);
    md.pb = parse_term(B, cosb, g);
    md.pp = parse_term(B, cosp, g);
    c.modes.push_back(std::move(md));
  }
  // Mode xi = (0, 0).
  {
    MmsModeData md;
    md.xi = {0, 0};
    md.u.resize(2);
    md.u[0] = parse_term(Complex(0.2, 0.0), wave, g);
    md.pf = parse_term(Complex(0.1, 0.0), expr_cos(arg_up), g);
    md.w = parse_term(Complex(0.1, 0.0), one, g);
    md.eta.resize(2);
    md.eta[0] = parse_term(Complex(0.1, 0.0), sinb, g);
    md.eta[1] = parse_term(Complex(0.1, 0.0), cosq, g);
    md.pb = parse_term(Complex(0.15, 0.0), cosb, g);
    md.pp = parse_term(Complex(0.15, 0.0), cosp, g);
    c.modes.push_back(std::move(md));
  }
  validate_case(c);
  return c;
}

// ===========================================================================
// Symbolic sources
// ===========================================================================

MmsSources mms_sources(const MmsCase& c, const PhysicalParams& p, double k0) {
  MmsSources out;
  out.d_plane = c.d_plane;
  out.exact = c.modes;
  const int dp = c.d_plane;
  const int nc = dp + 1;

  for (const MmsModeData& md : c.modes) {
    MmsSources::PerMode pm;
    pm.xi = md.xi;
    const Eigen::Vector2d kap = wavevector(md.xi);
    const double k2 = kap.head(dp).squaredNorm();

    std::vector<ModalSum> ud(static_cast<std::size_t>(nc)),
        etad(static_cast<std::size_t>(nc));
    for (int q = 0; q < nc; ++q) {
      ud[static_cast<std::size_t>(q)] = msum_dt(md.u[static_cast<std::size_t>(q)]);
      etad[static_cast<std::size_t>(q)] = msum_dt(md.eta[static_cast<std::size_t>(q)]);
    }
    const ModalSum dv = msum_div(md.eta, kap, dp);
    const ModalSum dvd = msum_dt(dv);
    const ModalSum wd = msum_dt(md.w);

    // Fluid body force: rho_f du/dt - mu_f lap u + grad p_f.
    pm.f.resize(static_cast<std::size_t>(nc));
    for (int q = 0; q < nc; ++q) {
      ModalSum& fc = pm.f[static_cast<std::size_t>(q)];
      msum_append(fc, ud[static_cast<std::size_t>(q)], p.rho_f);
      msum_append(fc, msum_ddx(msum_ddx(md.u[static_cast<std::size_t>(q)])), -p.mu_f);
      msum_append(fc, md.u[static_cast<std::size_t>(q)], p.mu_f * k2);
      if (q < dp)
        msum_append(fc, md.pf, kI * kap(q));
      else
        msum_append(fc, msum_ddx(md.pf));
    }

    // Poroelastic body force:
    // rho_b d2 eta/dt2 - div sigma^el - div sigma^visc + alpha_b grad p_b.
    pm.Fb.resize(static_cast<std::size_t>(nc));
    for (int q = 0; q < nc; ++q) {
      ModalSum& fb = pm.Fb[static_cast<std::size_t>(q)];
      if (p.rho_b > 0.0)
        msum_append(fb, msum_dt(msum_dt(md.eta[static_cast<std::size_t>(q)])), p.rho_b);
      msum_append(fb, msum_ddx(msum_ddx(md.eta[static_cast<std::size_t>(q)])), -p.mu_b);
      msum_append(fb, md.eta[static_cast<std::size_t>(q)], p.mu_b * k2);
      msum_append(fb, msum_ddx(msum_ddx(etad[static_cast<std::size_t>(q)])), -p.mu_v);
      msum_append(fb, etad[static_cast<std::size_t>(q)], p.mu_v * k2);
      if (q < dp) {
        msum_append(fb, dv, -(p.mu_b + p.lambda_b) * kI * kap(q));
        msum_append(fb, dvd, -(p.mu_v + p.lambda_v) * kI * kap(q));
        msum_append(fb, md.pb, p.alpha_b * kI * kap(q));
      } else {
        msum_append(fb, msum_ddx(dv), -(p.mu_b + p.lambda_b));
        msum_append(fb, msum_ddx(dvd), -(p.mu_v + p.lambda_v));
        msum_append(fb, msum_ddx(md.pb), p.alpha_b);
      }
    }

    // Biot mass balance: c_b dp_b/dt + alpha_b d(div eta)/dt - k0 lap p_b.
    msum_append(pm.S, msum_dt(md.pb), p.c_b);
    msum_append(pm.S, dvd, p.alpha_b);
    msum_append(pm.S, msum_ddx(msum_ddx(md.pb)), -k0);
    msum_append(pm.S, md.pb, k0 * k2);

    // Plate mass balance: c_p dp_p/dt + alpha_p s |kappa|^2 dw/dt - k_p p_p''.
    msum_append(pm.Sp, msum_dt(md.pp), p.c_p);
    for (const ModalTerm& t : wd)
      pm.Sp.push_back({t.amp * p.alpha_p * k2, Expr::variable("s"), t.timef});
    msum_append(pm.Sp, msum_ddx(msum_ddx(md.pp)), -p.k_p);

    // Plate momentum: rho_p d2w/dt2 + (D |kappa|^4 + gamma) w
    //   - alpha_p |kappa|^2 int s p_p ds + (sigma_f e3)_z(0) - (sigma_b e3)_z(0).
    msum_append(pm.Fp, msum_dt(wd), p.rho_p);
    msum_append(pm.Fp, md.w, p.D_bend * k2 * k2 + p.gamma);
    msum_append(pm.Fp, msum_moment(md.pp, c.h), -p.alpha_p * k2);
    msum_append(pm.Fp, msum_trace(msum_ddx(md.u[static_cast<std::size_t>(dp)]), 0.0),
                2.0 * p.mu_f);
    msum_append(pm.Fp, msum_trace(md.pf, 0.0), -1.0);
    msum_append(pm.Fp, biot_traction_component(md, p, kap, dp, dp, 0.0), -1.0);

    // Interface defects.
    pm.g_bjs.resize(static_cast<std::size_t>(dp));
    for (int j = 0; j < dp; ++j) {
      ModalSum& gb = pm.g_bjs[static_cast<std::size_t>(j)];
      msum_append(gb, msum_trace(md.u[static_cast<std::size_t>(dp)], 0.0),
                  p.mu_f * kI * kap(j));
      msum_append(gb, msum_trace(msum_ddx(md.u[static_cast<std::size_t>(j)]), 0.0), p.mu_f);
      msum_append(gb, msum_trace(md.u[static_cast<std::size_t>(j)], 0.0), p.beta);
    }
    msum_append(pm.g_pres, msum_trace(msum_ddx(md.u[static_cast<std::size_t>(dp)]), 0.0),
                2.0 * p.mu_f);
    msum_append(pm.g_pres, msum_trace(md.pf, 0.0), -1.0);
    msum_append(pm.g_pres, msum_trace(md.pp, -0.5 * c.h));

    msum_append(pm.g_filt, wd);
    msum_append(pm.g_filt, msum_trace(md.u[static_cast<std::size_t>(dp)], 0.0), -1.0);
    msum_append(pm.g_filt, msum_trace(msum_ddx(md.pp), -0.5 * c.h), -p.k_p);

    msum_append(pm.g_flux, msum_trace(msum_ddx(md.pp), 0.5 * c.h), p.k_p);
    msum_append(pm.g_flux, msum_trace(msum_ddx(md.pb), 0.0), -k0);

    msum_append(pm.g_btop, msum_trace(msum_ddx(md.pb), 1.0), k0);

    pm.g_btrac.resize(static_cast<std::size_t>(nc));
    for (int q = 0; q < nc; ++q)
      pm.g_btrac[static_cast<std::size_t>(q)] =
          biot_traction_component(md, p, kap, dp, q, 1.0);

    out.modes.push_back(std::move(pm));
  }
  return out;
}

// ===========================================================================
// Sampling, exact states, errors
// ===========================================================================

SampledSources MmsSources::sample(const Discretization& disc, double t) const {
  SampledSources out = zero_sources(disc);
  out.empty = false;
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;

  for (const PerMode& pm : modes) {
    const int m = disc.mode_index(pm.xi);
    const int mm = disc.mode_index(negate(pm.xi));
    const auto fill_quad = [&](Eigen::MatrixXcd& dst, const ModalSum& f,
                               const TransverseMesh& mesh) {
      for (int q = 0; q < mesh.n_quad_total(); ++q) {
        dst(q, m) = modal_eval(f, mesh.quad_x(q), t);
        if (mm != m) dst(q, mm) = std::conj(dst(q, m));
      }
    };
    const auto fill_row = [&](Eigen::RowVectorXcd& dst, const ModalSum& f) {
      dst(m) = modal_eval(f, 0.0, t);
      if (mm != m) dst(mm) = std::conj(dst(m));
    };
    for (int c = 0; c < nc; ++c) {
      fill_quad(out.f[static_cast<std::size_t>(c)], pm.f[static_cast<std::size_t>(c)], V);
      fill_quad(out.Fb[static_cast<std::size_t>(c)], pm.Fb[static_cast<std::size_t>(c)], B);
      fill_row(out.g_btrac[static_cast<std::size_t>(c)],
               pm.g_btrac[static_cast<std::size_t>(c)]);
    }
    fill_quad(out.S, pm.S, B);
    fill_quad(out.Sp, pm.Sp, L);
    fill_row(out.Fp, pm.Fp);
    for (int j = 0; j < dp; ++j)
      fill_row(out.g_bjs[static_cast<std::size_t>(j)], pm.g_bjs[static_cast<std::size_t>(j)]);
    fill_row(out.g_pres, pm.g_pres);
    fill_row(out.g_filt, pm.g_filt);
    fill_row(out.g_flux, pm.g_flux);
    fill_row(out.g_btop, pm.g_btop);
  }
  return out;
}

SourceProvider MmsSources::provider(const Discretization& disc) const {
  return [this, &disc](double t) { return sample(disc, t); };
}

State mms_exact_state(const MmsCase& c, const Discretization& disc, double t) {
  if (disc.domain.d_plane != c.d_plane)
    throw ConfigError("manufactured case dimension does not match the discretization");
  const int nc = disc.domain.n_comp();
  State s = make_state(disc);
  s.t = t;
  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& P = disc.fluid_pressure;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;

  for (const MmsModeData& md : c.modes) {
    const int m = disc.mode_index(md.xi);
    const int mm = disc.mode_index(negate(md.xi));
    const auto fill_nodes = [&](Eigen::MatrixXcd& dst, int row0, const ModalSum& f,
                                const TransverseMesh& mesh) {
      for (int n = 0; n < mesh.n_nodes(); ++n) {
        dst(row0 + n, m) = modal_eval(f, mesh.nodes[static_cast<std::size_t>(n)], t);
        if (mm != m) dst(row0 + n, mm) = std::conj(dst(row0 + n, m));
      }
    };
    for (int comp = 0; comp < nc; ++comp) {
      fill_nodes(s.u, comp * V.n_nodes(), md.u[static_cast<std::size_t>(comp)], V);
      fill_nodes(s.eta, comp * B.n_nodes(), md.eta[static_cast<std::size_t>(comp)], B);
      fill_nodes(s.etadot, comp * B.n_nodes(),
                 msum_dt(md.eta[static_cast<std::size_t>(comp)]), B);
    }
    fill_nodes(s.pf, 0, md.pf, P);
    fill_nodes(s.pp, 0, md.pp, L);
    fill_nodes(s.pb, 0, md.pb, B);
    s.w(0, m) = modal_eval(md.w, 0.0, t);
    s.wdot(0, m) = modal_eval(msum_dt(md.w), 0.0, t);
    if (mm != m) {
      s.w(0, mm) = std::conj(s.w(0, m));
      s.wdot(0, mm) = std::conj(s.wdot(0, m));
    }
  }
  hermitianize(s, disc);
  apply_constraints(s, disc);
  // Non-representable profiles interpolate to a velocity that misses the
  // discrete divergence-free manifold by the interpolation error; project it
  // back the same way initial data is ingested.
  project_divergence_free(s, disc);
  return s;
}

const char* MmsErrors::field_name(int i) {
  static const char* names[n_fields] = {"u", "p_f", "w", "wdot", "p_p", "eta", "etadot", "p_b"};
  return names[i];
}

MmsErrors mms_errors(const State& s, const MmsCase& c, const Discretization& disc) {
  MmsErrors me;
  const int nc = disc.domain.n_comp();
  const double t = s.t;

  // Case data per discretization mode (mirrors are conjugated).
  std::map<int, std::pair<const MmsModeData*, bool>> lookup;
  for (const MmsModeData& md : c.modes) {
    const int m = disc.mode_index(md.xi);
    lookup[m] = {&md, false};
    const int mm = disc.mode_index(negate(md.xi));
    if (mm != m) lookup[mm] = {&md, true};
  }

  Eigen::Array<double, MmsErrors::n_fields, 1> err2, sc2;
  err2.setZero();
  sc2.setZero();

  for (int m = 0; m < disc.n_modes(); ++m) {
    const auto it = lookup.find(m);
    const MmsModeData* md = it == lookup.end() ? nullptr : it->second.first;
    const bool conj = it != lookup.end() && it->second.second;
    const auto ex = [&](const ModalSum* f, double coord) -> Complex {
      if (!md || !f) return Complex(0.0, 0.0);
      const Complex v = modal_eval(*f, coord, t);
      return conj ? std::conj(v) : v;
    };
    const auto quad_field = [&](int slot, const Eigen::MatrixXcd& coeffs,
                                const TransverseMesh& mesh, int ncomp,
                                const std::vector<ModalSum>* vec, const ModalSum* scal,
                                bool rate) {
      const QuadEval e = eval_at_quad(mesh, coeffs.col(m), ncomp);
      for (int q = 0; q < mesh.n_quad_total(); ++q)
        for (int comp = 0; comp < ncomp; ++comp) {
          const ModalSum* f = vec ? &(*vec)[static_cast<std::size_t>(comp)] : scal;
          ModalSum dtbuf;
          if (f && rate) {
            dtbuf = msum_dt(*f);
            f = &dtbuf;
          }
          const Complex exv = ex(f, mesh.quad_x(q));
          err2(slot) += mesh.quad_w(q) * std::norm(e.val(comp, q) - exv);
          sc2(slot) += mesh.quad_w(q) * std::norm(exv);
        }
    };

    quad_field(0, s.u, disc.fluid_velocity, nc, md ? &md->u : nullptr, nullptr, false);
    quad_field(1, s.pf, disc.fluid_pressure, 1, nullptr, md ? &md->pf : nullptr, false);
    quad_field(4, s.pp, disc.plate, 1, nullptr, md ? &md->pp : nullptr, false);
    quad_field(5, s.eta, disc.biot, nc, md ? &md->eta : nullptr, nullptr, false);
    quad_field(6, s.etadot, disc.biot, nc, md ? &md->eta : nullptr, nullptr, true);
    quad_field(7, s.pb, disc.biot, 1, nullptr, md ? &md->pb : nullptr, false);

    const Complex wex = ex(md ? &md->w : nullptr, 0.0);
    err2(2) += std::norm(s.w(0, m) - wex);
    sc2(2) += std::norm(wex);
    ModalSum wdsum;
    if (md) wdsum = msum_dt(md->w);
    const Complex wdex = ex(md ? &wdsum : nullptr, 0.0);
    err2(3) += std::norm(s.wdot(0, m) - wdex);
    sc2(3) += std::norm(wdex);
  }
  me.error = err2.sqrt();
  me.scale = sc2.sqrt();
  return me;
}

// ===========================================================================
// Order studies
// ===========================================================================

OrderReport order_study(const MmsCase& c, const PhysicalParams& p, const StudySpec& spec) {
  if (spec.levels < 2) throw ConfigError("order study needs at least two levels");
  OrderReport rep;
  rep.spec = spec;
  rep.errors.resize(spec.levels, MmsErrors::n_fields);
  Eigen::Array<double, MmsErrors::n_fields, 1> finest_scale;
  finest_scale.setZero();

  PhysicalParams pp = p;
  pp.mode = spec.mode;
  if (pp.mode != RunMode::DynamicLinear) pp.rho_b = 0.0;
  PermeabilityModel perm;
  perm.kind = PermeabilityKind::Constant;
  perm.k0 = spec.k0;

  const MmsSources srcs = mms_sources(c, pp, spec.k0);

  for (int l = 0; l < spec.levels; ++l) {
    int steps = spec.fixed_steps, elems = spec.base_elems << l;
    if (spec.refinement == Refinement::Time) {
      steps = spec.base_steps << l;
      elems = spec.fixed_elems;
    }
    const DomainSpec dom{c.d_plane, c.h};
    const Discretization disc = build_discretization(dom, spec.M, elems, elems, elems);
    const double dt = spec.T / steps;
    rep.hs.push_back(spec.refinement == Refinement::Time ? dt : 1.0 / elems);

    RotheDriver driver(disc, pp, perm, dt);
    State st = mms_exact_state(c, disc, 0.0);
    for (int n = 0; n < steps; ++n) {
      const SampledSources src = srcs.sample(disc, st.t + dt);
      st = driver.advance(st, src);
    }
    const MmsErrors me = mms_errors(st, c, disc);
    for (int fIdx = 0; fIdx < MmsErrors::n_fields; ++fIdx)
      rep.errors(l, fIdx) = me.error(fIdx);
    if (l == spec.levels - 1) finest_scale = me.scale;
  }

  for (int fIdx = 0; fIdx < MmsErrors::n_fields; ++fIdx) {
    const double finest = rep.errors(spec.levels - 1, fIdx);
    const bool exact = finest <= 1e-8 * std::max(finest_scale(fIdx), 1e-30);
    rep.exact[static_cast<std::size_t>(fIdx)] = exact;
    rep.monotone[static_cast<std::size_t>(fIdx)] = true;
    rep.slopes(fIdx) = 0.0;
    if (exact) continue;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    bool positive = true;
    for (int l = 0; l < spec.levels; ++l) {
      if (!(rep.errors(l, fIdx) > 0.0)) {
        positive = false;
        break;
      }
      const double x = std::log(rep.hs[static_cast<std::size_t>(l)]);
      const double y = std::log(rep.errors(l, fIdx));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
    }
    if (positive && n >= 2 && n * sxx - sx * sx > 0.0)
      rep.slopes(fIdx) = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    for (int l = 0; l + 1 < spec.levels; ++l)
      if (rep.errors(l + 1, fIdx) > rep.errors(l, fIdx) * (1.0 + 1e-9))
        rep.monotone[static_cast<std::size_t>(fIdx)] = false;
  }
  return rep;
}

} // namespace fpsi
