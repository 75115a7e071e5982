/** @file assembly.cpp
 *  @brief Per-mode step assembly, condensation, and the step operator.
 */
#include "fpsi/assembly.hpp"

#include <cmath>

#include "fpsi/errors.hpp"

namespace fpsi {

namespace {

constexpr Complex kI{0.0, 1.0};

/// Full-vector offsets determined by the discretization alone.
struct Offsets {
  int nc, dp, nvel, npf, npl, nb;
  int u, pf, w, pp, eta, pb, n_full;
  explicit Offsets(const Discretization& d)
      : nc(d.domain.n_comp()),
        dp(d.domain.d_plane),
        nvel(d.fluid_velocity.n_nodes()),
        npf(d.fluid_pressure.n_nodes()),
        npl(d.plate.n_nodes()),
        nb(d.biot.n_nodes()) {
    u = 0;
    pf = u + nc * nvel;
    w = pf + npf;
    pp = w + 1;
    eta = pp + npl;
    pb = eta + nc * nb;
    n_full = pb + nb;
  }
  int u_at(int comp, int node) const { return u + comp * nvel + node; }
  int eta_at(int comp, int node) const { return eta + comp * nb + node; }
};

double ksq(const Eigen::Vector2d& kappa, int dp) {
  double k2 = 0.0;
  for (int j = 0; j < dp; ++j) k2 += kappa(j) * kappa(j);
  return k2;
}

/// N^T diag(w) f for a sampled source column (quadrature assembly of (f, phi)).
Eigen::VectorXcd quad_load(const TransverseMesh& mesh, const Eigen::VectorXcd& fq) {
  Eigen::VectorXcd wf = fq;
  for (int q = 0; q < mesh.n_quad_total(); ++q) wf(q) *= mesh.quad_w(q);
  return mesh.shape.transpose() * wf;
}

} // namespace

// ===========================================================================
// Gram forms
// ===========================================================================

Eigen::MatrixXcd sym_grad_form(const TransverseMesh& mesh, const Eigen::Vector2d& kappa,
                               int dp) {
  const int n = mesh.n_nodes();
  const int nc = dp + 1;
  const Eigen::MatrixXd M = mass_matrix(mesh);
  const Eigen::MatrixXd K = stiffness_matrix(mesh);
  const Eigen::MatrixXd D = deriv_matrix(mesh); // D[a][b] = int phi_a phi_b'
  const Eigen::MatrixXd DT = D.transpose();
  const double k2 = ksq(kappa, dp);

  Eigen::MatrixXcd SG = Eigen::MatrixXcd::Zero(nc * n, nc * n);
  for (int j = 0; j < dp; ++j) {
    SG.block(j * n, j * n, n, n) =
        (0.5 * (k2 + kappa(j) * kappa(j)) * M + 0.5 * K).cast<Complex>();
    for (int l = 0; l < dp; ++l)
      if (l != j) SG.block(j * n, l * n, n, n) = (0.5 * kappa(j) * kappa(l) * M).cast<Complex>();
    SG.block(j * n, dp * n, n, n) = (0.5 * kI * kappa(j)) * DT.cast<Complex>();
    SG.block(dp * n, j * n, n, n) = (-0.5 * kI * kappa(j)) * D.cast<Complex>();
  }
  SG.block(dp * n, dp * n, n, n) = (0.5 * k2 * M + K).cast<Complex>();
  return SG;
}

Eigen::MatrixXcd div_form(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp) {
  const int n = mesh.n_nodes();
  const int nc = dp + 1;
  const Eigen::MatrixXd M = mass_matrix(mesh);
  const Eigen::MatrixXd K = stiffness_matrix(mesh);
  const Eigen::MatrixXd D = deriv_matrix(mesh);
  const Eigen::MatrixXd DT = D.transpose();

  Eigen::MatrixXcd DV = Eigen::MatrixXcd::Zero(nc * n, nc * n);
  for (int j = 0; j < dp; ++j) {
    for (int l = 0; l < dp; ++l)
      DV.block(j * n, l * n, n, n) = (kappa(j) * kappa(l) * M).cast<Complex>();
    DV.block(j * n, dp * n, n, n) = (-kI * kappa(j)) * D.cast<Complex>();
    DV.block(dp * n, j * n, n, n) = (kI * kappa(j)) * DT.cast<Complex>();
  }
  DV.block(dp * n, dp * n, n, n) = K.cast<Complex>();
  return DV;
}

// ===========================================================================
// Per-mode matrix
// ===========================================================================

Eigen::MatrixXcd assemble_mode_matrix(const Discretization& disc, const PhysicalParams& p,
                                      double dt, const Eigen::VectorXd& kbar, ModeIndex xi) {
  if (dt <= 0.0) throw ConfigError("time step must be positive");
  const Offsets o(disc);
  const Eigen::Vector2d kap = wavevector(xi);
  const double k2 = ksq(kap, o.dp);
  const int T = o.nvel - 1; // fluid node at x3 = 0

  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& P = disc.fluid_pressure;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;

  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(o.n_full, o.n_full);

  // --- fluid momentum rows -------------------------------------------------
  const Eigen::MatrixXd Mv = mass_matrix(V);
  const Eigen::MatrixXcd SGv = sym_grad_form(V, kap, o.dp);
  for (int m = 0; m < o.nc; ++m) {
    A.block(o.u + m * o.nvel, o.u + m * o.nvel, o.nvel, o.nvel) +=
        (p.rho_f * Mv).cast<Complex>();
    for (int c = 0; c < o.nc; ++c)
      A.block(o.u + m * o.nvel, o.u + c * o.nvel, o.nvel, o.nvel) +=
          (2.0 * p.mu_f * dt) * SGv.block(m * o.nvel, c * o.nvel, o.nvel, o.nvel);
  }
  for (int j = 0; j < o.dp; ++j) A(o.u_at(j, T), o.u_at(j, T)) += dt * p.beta;

  const Eigen::MatrixXd Mvp = mixed_mass_matrix(V, P);
  const Eigen::MatrixXd Dpv = mixed_deriv_matrix(P, V); // int psi_a phi_b'
  for (int j = 0; j < o.dp; ++j)
    A.block(o.u + j * o.nvel, o.pf, o.nvel, o.npf) += (dt * kI * kap(j)) * Mvp.cast<Complex>();
  A.block(o.u + o.dp * o.nvel, o.pf, o.nvel, o.npf) -= dt * Dpv.transpose().cast<Complex>();
  A(o.u_at(o.nc - 1, T), o.pp + 0) += dt; // interface pressure load on the fluid

  // --- incompressibility rows ----------------------------------------------
  const Eigen::MatrixXd Mpv = Mvp.transpose();
  for (int j = 0; j < o.dp; ++j)
    A.block(o.pf, o.u + j * o.nvel, o.npf, o.nvel) += (dt * kI * kap(j)) * Mpv.cast<Complex>();
  A.block(o.pf, o.u + o.dp * o.nvel, o.npf, o.nvel) += dt * Dpv.cast<Complex>();

  // --- plate momentum row ----------------------------------------------------
  A(o.w, o.w) += p.rho_p / dt + dt * (p.D_bend * k2 * k2 + p.gamma);
  const Eigen::VectorXd smom = moment_row(L);
  for (int b = 0; b < o.npl; ++b) A(o.w, o.pp + b) -= dt * p.alpha_p * k2 * smom(b);
  A(o.w, o.pp + 0) -= dt; // fluid normal stress enters as -p_p(-h/2)

  // --- plate pressure rows ---------------------------------------------------
  A.block(o.pp, o.pp, o.npl, o.npl) +=
      (p.c_p * mass_matrix(L) + dt * p.k_p * stiffness_matrix(L)).cast<Complex>();
  for (int a = 0; a < o.npl; ++a) A(o.pp + a, o.w) += p.alpha_p * k2 * smom(a);
  A(o.pp + 0, o.w) += 1.0;               // filtration: + wdot^{n+1} dt = w^{n+1} - w^n
  A(o.pp + 0, o.u_at(o.nc - 1, T)) -= dt; // filtration: - dt u_z(x3=0)

  // --- poroelastic momentum rows --------------------------------------------
  const Eigen::MatrixXd Mb = mass_matrix(B);
  const Eigen::MatrixXcd SGb = sym_grad_form(B, kap, o.dp);
  const Eigen::MatrixXcd DVb = div_form(B, kap, o.dp);
  const Eigen::MatrixXcd elast =
      (2.0 * p.mu_b * dt + 2.0 * p.mu_v) * SGb + (p.lambda_b * dt + p.lambda_v) * DVb;
  for (int m = 0; m < o.nc; ++m) {
    if (p.rho_b > 0.0)
      A.block(o.eta + m * o.nb, o.eta + m * o.nb, o.nb, o.nb) +=
          ((p.rho_b / dt) * Mb).cast<Complex>();
    for (int c = 0; c < o.nc; ++c)
      A.block(o.eta + m * o.nb, o.eta + c * o.nb, o.nb, o.nb) +=
          elast.block(m * o.nb, c * o.nb, o.nb, o.nb);
  }
  const Eigen::MatrixXd Db = deriv_matrix(B); // int phi_a phi_b'
  for (int j = 0; j < o.dp; ++j)
    A.block(o.eta + j * o.nb, o.pb, o.nb, o.nb) +=
        (dt * p.alpha_b * kI * kap(j)) * Mb.cast<Complex>();
  A.block(o.eta + o.dp * o.nb, o.pb, o.nb, o.nb) -=
      (dt * p.alpha_b) * Db.transpose().cast<Complex>();

  // --- Biot pressure rows -----------------------------------------------------
  if (static_cast<int>(kbar.size()) != B.n_quad_total())
    throw ConfigError("permeability sample count does not match the quadrature");
  A.block(o.pb, o.pb, o.nb, o.nb) +=
      (p.c_b * Mb +
       dt * (weighted_stiffness_matrix(B, kbar) + k2 * weighted_mass_matrix(B, kbar)))
          .cast<Complex>();
  for (int j = 0; j < o.dp; ++j)
    A.block(o.pb, o.eta + j * o.nb, o.nb, o.nb) +=
        (p.alpha_b * kI * kap(j)) * Mb.cast<Complex>();
  A.block(o.pb, o.eta + o.dp * o.nb, o.nb, o.nb) += p.alpha_b * Db.cast<Complex>();

  return A;
}

// ===========================================================================
// Per-mode right-hand side
// ===========================================================================

Eigen::VectorXcd assemble_mode_rhs(const Discretization& disc, const FieldLayout& lay,
                                   const PhysicalParams& p, double dt, int m,
                                   const State& prev, const SampledSources& src) {
  const Offsets o(disc);
  const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
  const Eigen::Vector2d kap = wavevector(xi);
  const double k2 = ksq(kap, o.dp);
  const int T = o.nvel - 1;

  const TransverseMesh& V = disc.fluid_velocity;
  const TransverseMesh& L = disc.plate;
  const TransverseMesh& B = disc.biot;

  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(o.n_full);

  // --- fluid ---------------------------------------------------------------
  const Eigen::MatrixXd Mv = mass_matrix(V);
  for (int c = 0; c < o.nc; ++c)
    rhs.segment(o.u + c * o.nvel, o.nvel) =
        p.rho_f * (Mv * prev.u.col(m).segment(c * o.nvel, o.nvel));

  // --- plate momentum --------------------------------------------------------
  rhs(o.w) = (p.rho_p / dt) * prev.w(0, m) + p.rho_p * prev.wdot(0, m);

  // --- plate pressure --------------------------------------------------------
  const Eigen::VectorXd smom = moment_row(L);
  rhs.segment(o.pp, o.npl) = p.c_p * (mass_matrix(L) * prev.pp.col(m));
  for (int a = 0; a < o.npl; ++a) rhs(o.pp + a) += p.alpha_p * k2 * smom(a) * prev.w(0, m);
  rhs(o.pp + 0) += prev.w(0, m);

  // --- poroelastic momentum ---------------------------------------------------
  const Eigen::MatrixXd Mb = mass_matrix(B);
  for (int c = 0; c < o.nc; ++c)
    rhs.segment(o.eta + c * o.nb, o.nb) =
        (p.rho_b / dt) * (Mb * prev.eta.col(m).segment(c * o.nb, o.nb)) +
        p.rho_b * (Mb * prev.etadot.col(m).segment(c * o.nb, o.nb));
  if (p.mu_v > 0.0 || p.lambda_v > 0.0) {
    const Eigen::MatrixXcd visc =
        2.0 * p.mu_v * sym_grad_form(B, kap, o.dp) + p.lambda_v * div_form(B, kap, o.dp);
    rhs.segment(o.eta, o.nc * o.nb) += visc * prev.eta.col(m);
  }

  // --- Biot pressure -----------------------------------------------------------
  rhs.segment(o.pb, o.nb) = p.c_b * (Mb * prev.pb.col(m));
  const Eigen::MatrixXd Db = deriv_matrix(B);
  for (int j = 0; j < o.dp; ++j)
    rhs.segment(o.pb, o.nb) +=
        (p.alpha_b * kI * kap(j)) * (Mb * prev.eta.col(m).segment(j * o.nb, o.nb));
  rhs.segment(o.pb, o.nb) +=
      p.alpha_b * (Db * prev.eta.col(m).segment(o.dp * o.nb, o.nb)).cast<Complex>();

  // --- sources ----------------------------------------------------------------
  if (!src.empty) {
    for (int c = 0; c < o.nc; ++c)
      rhs.segment(o.u + c * o.nvel, o.nvel) +=
          dt * quad_load(V, src.f[static_cast<std::size_t>(c)].col(m));
    for (int j = 0; j < o.dp; ++j)
      rhs(o.u_at(j, T)) += dt * src.g_bjs[static_cast<std::size_t>(j)](m);
    rhs(o.u_at(o.nc - 1, T)) += dt * src.g_pres(m);

    rhs(o.w) += dt * src.Fp(m) - dt * src.g_pres(m);

    rhs.segment(o.pp, o.npl) += dt * quad_load(L, src.Sp.col(m));
    rhs(o.pp + 0) += dt * src.g_filt(m);
    rhs(o.pp + o.npl - 1) += dt * src.g_flux(m);

    for (int c = 0; c < o.nc; ++c) {
      rhs.segment(o.eta + c * o.nb, o.nb) +=
          dt * quad_load(B, src.Fb[static_cast<std::size_t>(c)].col(m));
      rhs(o.eta_at(c, o.nb - 1)) += dt * src.g_btrac[static_cast<std::size_t>(c)](m);
    }

    rhs.segment(o.pb, o.nb) += dt * quad_load(B, src.S.col(m));
    rhs(o.pb + o.nb - 1) += dt * src.g_btop(m);
  }

  (void)lay;
  return rhs;
}

// ===========================================================================
// Step operator
// ===========================================================================

StepOperator::StepOperator(const Discretization& disc, const FieldLayout& lay,
                           const PhysicalParams& p, double dt, const PermField& k,
                           const PlaneTransform& tr)
    : disc_(disc),
      lay_(lay),
      tr_(tr),
      dt_(dt),
      n_modes_(disc.n_modes()),
      has_fluct_(k.has_fluct),
      fluct_(k.fluct) {
  const Eigen::MatrixXcd C = lay_.C.cast<Complex>();

  canon_of_.assign(static_cast<std::size_t>(n_modes_), -1);
  is_mirror_.assign(static_cast<std::size_t>(n_modes_), false);
  for (int m = 0; m < n_modes_; ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (!is_canonical(xi)) continue;
    const Eigen::MatrixXcd Af = assemble_mode_matrix(disc, p, dt, k.mean, xi);
    A_.push_back(C.adjoint() * Af * C);
    lu_.emplace_back(A_.back());
    canon_of_[static_cast<std::size_t>(m)] = static_cast<int>(A_.size()) - 1;
  }
  for (int m = 0; m < n_modes_; ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (is_canonical(xi)) continue;
    canon_of_[static_cast<std::size_t>(m)] = canon_of_[static_cast<std::size_t>(
        disc.mode_index(negate(xi)))];
    is_mirror_[static_cast<std::size_t>(m)] = true;
  }

  if (has_fluct_) {
    const Eigen::MatrixXd Cpb = lay_.C.middleRows(lay_.off_pb, lay_.nb);
    pb_shape_ = disc.biot.shape * Cpb;   // free -> p_b at quadrature points
    pb_dshape_ = disc.biot.dshape * Cpb; // free -> d3 p_b at quadrature points
  }
}

Eigen::MatrixXcd StepOperator::mode_matrix(int m) const {
  const Eigen::MatrixXcd& Ac = A_[static_cast<std::size_t>(canon_of_[static_cast<std::size_t>(m)])];
  return is_mirror_[static_cast<std::size_t>(m)] ? Ac.conjugate() : Ac;
}

Eigen::VectorXcd StepOperator::apply(const Eigen::VectorXcd& x) const {
  const int nf = lay_.n_free;
  Eigen::VectorXcd y(n_free_total());
  for (int m = 0; m < n_modes_; ++m) {
    const auto& Ac = A_[static_cast<std::size_t>(canon_of_[static_cast<std::size_t>(m)])];
    const auto xm = x.segment(m * nf, nf);
    if (is_mirror_[static_cast<std::size_t>(m)])
      y.segment(m * nf, nf) = (Ac * xm.conjugate()).conjugate();
    else
      y.segment(m * nf, nf) = Ac * xm;
  }
  if (has_fluct_) y += apply_correction(x);
  return y;
}

Eigen::VectorXcd StepOperator::block_solve(const Eigen::VectorXcd& r) const {
  const int nf = lay_.n_free;
  Eigen::VectorXcd y(n_free_total());
  for (int m = 0; m < n_modes_; ++m) {
    const auto& f = lu_[static_cast<std::size_t>(canon_of_[static_cast<std::size_t>(m)])];
    const auto rm = r.segment(m * nf, nf);
    if (is_mirror_[static_cast<std::size_t>(m)])
      y.segment(m * nf, nf) = f.solve(rm.conjugate()).conjugate();
    else
      y.segment(m * nf, nf) = f.solve(rm);
  }
  return y;
}

Eigen::VectorXcd StepOperator::apply_correction(const Eigen::VectorXcd& x) const {
  const int nf = lay_.n_free;
  const int Q = disc_.biot.n_quad_total();
  const int nc = tr_.n_points();
  const int dp = lay_.d_plane;

  // p_b values/derivatives at quadrature points, all modes at once.
  Eigen::MatrixXcd Pval(Q, n_modes_), Pder(Q, n_modes_);
  for (int m = 0; m < n_modes_; ++m) {
    Pval.col(m) = pb_shape_ * x.segment(m * nf, nf);
    Pder.col(m) = pb_dshape_ * x.segment(m * nf, nf);
  }

  // Collocation product with the fluctuation, per gradient component.
  std::vector<Eigen::MatrixXcd> H(static_cast<std::size_t>(dp + 1));
  Eigen::VectorXcd row(n_modes_), phys(nc);
  for (int comp = 0; comp <= dp; ++comp) {
    H[static_cast<std::size_t>(comp)].resize(Q, n_modes_);
    for (int q = 0; q < Q; ++q) {
      if (comp < dp) {
        for (int m = 0; m < n_modes_; ++m) {
          const Eigen::Vector2d kap = wavevector(disc_.modes[static_cast<std::size_t>(m)]);
          row(m) = kI * kap(comp) * Pval(q, m);
        }
      } else {
        row = Pder.row(q).transpose();
      }
      tr_.to_physical(row, phys);
      phys.array() *= fluct_.row(q).transpose().array();
      tr_.to_modes(phys, row);
      H[static_cast<std::size_t>(comp)].row(q) = row.transpose();
    }
  }

  // Test rows: dt sum_q w_q [ psi_a (-i kappa . H_pl) + psi_a' H_z ].
  Eigen::MatrixXcd T = H[static_cast<std::size_t>(dp)]; // starts as H_z in the dval slot
  Eigen::MatrixXcd Tv = Eigen::MatrixXcd::Zero(Q, n_modes_);
  for (int m = 0; m < n_modes_; ++m) {
    const Eigen::Vector2d kap = wavevector(disc_.modes[static_cast<std::size_t>(m)]);
    for (int j = 0; j < dp; ++j)
      Tv.col(m) += (-kI * kap(j)) * H[static_cast<std::size_t>(j)].col(m);
  }
  for (int q = 0; q < Q; ++q) {
    T.row(q) *= disc_.biot.quad_w(q);
    Tv.row(q) *= disc_.biot.quad_w(q);
  }
  const Eigen::MatrixXcd R =
      dt_ * (disc_.biot.shape.transpose().cast<Complex>() * Tv +
             disc_.biot.dshape.transpose().cast<Complex>() * T); // nb x n_modes

  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n_free_total());
  for (int m = 0; m < n_modes_; ++m)
    for (int a = 0; a < lay_.nb; ++a) {
      const int fi = lay_.free_of_full[static_cast<std::size_t>(lay_.pb_index(a))];
      y(m * nf + fi) = R(a, m);
    }
  return y;
}

// ===========================================================================
// Right-hand side over all modes, solution scatter
// ===========================================================================

Eigen::VectorXcd assemble_rhs(const Discretization& disc, const FieldLayout& lay,
                              const PhysicalParams& p, double dt, const State& prev,
                              const SampledSources& src) {
  const Eigen::MatrixXcd Ct = lay.C.transpose().cast<Complex>();
  Eigen::VectorXcd rhs(disc.n_modes() * lay.n_free);
  for (int m = 0; m < disc.n_modes(); ++m)
    rhs.segment(m * lay.n_free, lay.n_free) =
        Ct * assemble_mode_rhs(disc, lay, p, dt, m, prev, src);
  return rhs;
}

void apply_solution(State& s, const Discretization& disc, const FieldLayout& lay,
                    const Eigen::VectorXcd& x_free) {
  const Eigen::MatrixXcd C = lay.C.cast<Complex>();
  for (int m = 0; m < disc.n_modes(); ++m)
    scatter_full(s, lay, m, C * x_free.segment(m * lay.n_free, lay.n_free));
}

Eigen::VectorXcd gather_free(const State& s, const Discretization& disc,
                             const FieldLayout& lay) {
  Eigen::VectorXcd x(disc.n_modes() * lay.n_free);
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::VectorXcd full = pack_full(s, lay, m);
    for (int f = 0; f < lay.n_free; ++f)
      x(m * lay.n_free + f) = full(lay.full_of_free[static_cast<std::size_t>(f)]);
  }
  return x;
}

} // namespace fpsi
