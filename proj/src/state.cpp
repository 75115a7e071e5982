/** @file state.cpp
 *  @brief State storage, constraint elimination, norms, divergence checks.
 */
#include "fpsi/state.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <sstream>

#include "fpsi/errors.hpp"

namespace fpsi {

namespace {

constexpr Complex kI{0.0, 1.0};

/// Squared magnitude helper.
double sq(double x) { return x * x; }

/// Append a formatted violation line.
void add_violation(std::vector<std::string>& out, const std::string& what, double val,
                   double thr) {
  std::ostringstream os;
  os << what << " (val=" << val << ", thr=" << thr << ")";
  out.push_back(os.str());
}

} // namespace

// ===========================================================================
// Layout
// ===========================================================================

FieldLayout build_layout(const Discretization& disc, bool interface_constraints) {
  FieldLayout lay;
  lay.d_plane = disc.domain.d_plane;
  lay.ncomp = disc.domain.n_comp();
  lay.nvel = disc.fluid_velocity.n_nodes();
  lay.npf = disc.fluid_pressure.n_nodes();
  lay.npl = disc.plate.n_nodes();
  lay.nb = disc.biot.n_nodes();
  lay.interface_constraints = interface_constraints;

  lay.off_u = 0;
  lay.off_pf = lay.off_u + lay.ncomp * lay.nvel;
  lay.off_w = lay.off_pf + lay.npf;
  lay.off_pp = lay.off_w + 1;
  lay.off_eta = lay.off_pp + lay.npl;
  lay.off_pb = lay.off_eta + lay.ncomp * lay.nb;
  lay.n_full = lay.off_pb + lay.nb;

  // Slaves: -1 marks "free"; otherwise the master full index, or -2 for a
  // homogeneous (zero) slave.
  std::vector<int> master(static_cast<std::size_t>(lay.n_full), -1);
  for (int c = 0; c < lay.ncomp; ++c)
    master[static_cast<std::size_t>(lay.u_index(c, 0))] = -2; // no-slip at x3 = -1
  if (interface_constraints) {
    for (int c = 0; c < lay.d_plane; ++c)
      master[static_cast<std::size_t>(lay.eta_index(c, 0))] = -2; // clamped tangential trace
    master[static_cast<std::size_t>(lay.eta_index(lay.ncomp - 1, 0))] = lay.w_index();
    master[static_cast<std::size_t>(lay.pp_index(lay.npl - 1))] = lay.pb_index(0);
  }

  lay.free_of_full.assign(static_cast<std::size_t>(lay.n_full), -1);
  lay.full_of_free.clear();
  for (int i = 0; i < lay.n_full; ++i) {
    if (master[static_cast<std::size_t>(i)] == -1) {
      lay.free_of_full[static_cast<std::size_t>(i)] = static_cast<int>(lay.full_of_free.size());
      lay.full_of_free.push_back(i);
    }
  }
  lay.n_free = static_cast<int>(lay.full_of_free.size());

  lay.C = Eigen::MatrixXd::Zero(lay.n_full, lay.n_free);
  for (int i = 0; i < lay.n_full; ++i) {
    const int m = master[static_cast<std::size_t>(i)];
    if (m == -1) {
      lay.C(i, lay.free_of_full[static_cast<std::size_t>(i)]) = 1.0;
    } else if (m >= 0) {
      const int fm = lay.free_of_full[static_cast<std::size_t>(m)];
      if (fm < 0) throw ConfigError("constraint master is itself constrained");
      lay.C(i, fm) = 1.0;
    }
  }
  return lay;
}

// ===========================================================================
// State
// ===========================================================================

State make_state(const Discretization& disc) {
  const int nm = disc.n_modes();
  const int nc = disc.domain.n_comp();
  State s;
  s.t = 0.0;
  s.u = Eigen::MatrixXcd::Zero(nc * disc.fluid_velocity.n_nodes(), nm);
  s.pf = Eigen::MatrixXcd::Zero(disc.fluid_pressure.n_nodes(), nm);
  s.w = Eigen::MatrixXcd::Zero(1, nm);
  s.wdot = Eigen::MatrixXcd::Zero(1, nm);
  s.pp = Eigen::MatrixXcd::Zero(disc.plate.n_nodes(), nm);
  s.eta = Eigen::MatrixXcd::Zero(nc * disc.biot.n_nodes(), nm);
  s.etadot = Eigen::MatrixXcd::Zero(nc * disc.biot.n_nodes(), nm);
  s.pb = Eigen::MatrixXcd::Zero(disc.biot.n_nodes(), nm);
  return s;
}

void apply_constraints(State& s, const Discretization& disc) {
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nvel = disc.fluid_velocity.n_nodes();
  const int nb = disc.biot.n_nodes();
  const int npl = disc.plate.n_nodes();
  for (int m = 0; m < disc.n_modes(); ++m) {
    for (int c = 0; c < nc; ++c) s.u(c * nvel + 0, m) = 0.0;
    for (int c = 0; c < dp; ++c) {
      s.eta(c * nb + 0, m) = 0.0;
      s.etadot(c * nb + 0, m) = 0.0;
    }
    s.eta((nc - 1) * nb + 0, m) = s.w(0, m);
    s.etadot((nc - 1) * nb + 0, m) = s.wdot(0, m);
    s.pp(npl - 1, m) = s.pb(0, m);
  }
}

void hermitianize(State& s, const Discretization& disc) {
  auto mirror = [&](Eigen::MatrixXcd& f) {
    for (int m = 0; m < disc.n_modes(); ++m) {
      const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
      if (xi == ModeIndex{0, 0}) {
        f.col(m) = f.col(m).real().cast<Complex>();
      } else if (is_canonical(xi)) {
        const int j = disc.mode_index(negate(xi));
        f.col(j) = f.col(m).conjugate();
      }
    }
  };
  mirror(s.u);
  mirror(s.pf);
  mirror(s.w);
  mirror(s.wdot);
  mirror(s.pp);
  mirror(s.eta);
  mirror(s.etadot);
  mirror(s.pb);
}

State difference_quotient(const State& curr, const State& prev, double dt) {
  State d = curr;
  d.u = (curr.u - prev.u) / dt;
  d.pf = (curr.pf - prev.pf) / dt;
  d.w = (curr.w - prev.w) / dt;
  d.wdot = (curr.wdot - prev.wdot) / dt;
  d.pp = (curr.pp - prev.pp) / dt;
  d.eta = (curr.eta - prev.eta) / dt;
  d.etadot = (curr.etadot - prev.etadot) / dt;
  d.pb = (curr.pb - prev.pb) / dt;
  return d;
}

Eigen::VectorXcd pack_full(const State& s, const FieldLayout& lay, int m) {
  Eigen::VectorXcd x(lay.n_full);
  x.segment(lay.off_u, lay.ncomp * lay.nvel) = s.u.col(m);
  x.segment(lay.off_pf, lay.npf) = s.pf.col(m);
  x(lay.off_w) = s.w(0, m);
  x.segment(lay.off_pp, lay.npl) = s.pp.col(m);
  x.segment(lay.off_eta, lay.ncomp * lay.nb) = s.eta.col(m);
  x.segment(lay.off_pb, lay.nb) = s.pb.col(m);
  return x;
}

void scatter_full(State& s, const FieldLayout& lay, int m, const Eigen::VectorXcd& x) {
  s.u.col(m) = x.segment(lay.off_u, lay.ncomp * lay.nvel);
  s.pf.col(m) = x.segment(lay.off_pf, lay.npf);
  s.w(0, m) = x(lay.off_w);
  s.pp.col(m) = x.segment(lay.off_pp, lay.npl);
  s.eta.col(m) = x.segment(lay.off_eta, lay.ncomp * lay.nb);
  s.pb.col(m) = x.segment(lay.off_pb, lay.nb);
}

// ===========================================================================
// Quadrature evaluation
// ===========================================================================

QuadEval eval_at_quad(const TransverseMesh& mesh, const Eigen::VectorXcd& coeffs, int ncomp) {
  const int nn = mesh.n_nodes();
  const int nq = mesh.n_quad_total();
  if (coeffs.size() != static_cast<Eigen::Index>(ncomp) * nn)
    throw ConfigError("eval_at_quad: coefficient block size mismatch");
  QuadEval out;
  out.val.resize(ncomp, nq);
  out.dval.resize(ncomp, nq);
  for (int c = 0; c < ncomp; ++c) {
    const Eigen::VectorXcd seg = coeffs.segment(static_cast<Eigen::Index>(c) * nn, nn);
    out.val.row(c) = (mesh.shape * seg).transpose();
    out.dval.row(c) = (mesh.dshape * seg).transpose();
  }
  return out;
}

double quad_l2_sq(const TransverseMesh& mesh, const QuadEval& f) {
  double acc = 0.0;
  for (int q = 0; q < mesh.n_quad_total(); ++q) {
    double s = 0.0;
    for (int c = 0; c < f.val.rows(); ++c) s += std::norm(f.val(c, q));
    acc += mesh.quad_w(q) * s;
  }
  return acc;
}

double quad_grad_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                    const QuadEval& f) {
  double k2 = 0.0;
  for (int j = 0; j < dp; ++j) k2 += sq(kappa(j));
  double acc = 0.0;
  for (int q = 0; q < mesh.n_quad_total(); ++q) {
    double s = 0.0;
    for (int c = 0; c < f.val.rows(); ++c)
      s += k2 * std::norm(f.val(c, q)) + std::norm(f.dval(c, q));
    acc += mesh.quad_w(q) * s;
  }
  return acc;
}

double quad_sym_grad_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                        const QuadEval& f) {
  const int nc = static_cast<int>(f.val.rows());
  if (nc != dp + 1) throw ConfigError("quad_sym_grad_sq expects a full vector field");
  const int z = dp;
  double acc = 0.0;
  for (int q = 0; q < mesh.n_quad_total(); ++q) {
    double s = 0.0;
    // In-plane block D_mj = i (kappa_j f_m + kappa_m f_j) / 2.
    for (int m = 0; m < dp; ++m)
      for (int j = 0; j < dp; ++j)
        s += std::norm(kI * 0.5 * (kappa(j) * f.val(m, q) + kappa(m) * f.val(j, q)));
    // Mixed rows/columns D_mz = D_zm = (f_m' + i kappa_m f_z) / 2 (counted twice).
    for (int m = 0; m < dp; ++m)
      s += 2.0 * std::norm(0.5 * (f.dval(m, q) + kI * kappa(m) * f.val(z, q)));
    // Transverse diagonal D_zz = f_z'.
    s += std::norm(f.dval(z, q));
    acc += mesh.quad_w(q) * s;
  }
  return acc;
}

double quad_div_sq(const TransverseMesh& mesh, const Eigen::Vector2d& kappa, int dp,
                   const QuadEval& f) {
  const int nc = static_cast<int>(f.val.rows());
  if (nc != dp + 1) throw ConfigError("quad_div_sq expects a full vector field");
  double acc = 0.0;
  for (int q = 0; q < mesh.n_quad_total(); ++q) {
    Complex d = f.dval(dp, q);
    for (int j = 0; j < dp; ++j) d += kI * kappa(j) * f.val(j, q);
    acc += mesh.quad_w(q) * std::norm(d);
  }
  return acc;
}

// ===========================================================================
// Norms
// ===========================================================================

double energy_norm_E_sq(const State& s, const Discretization& disc, double mu_b,
                        double lambda_b) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  double acc = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    const QuadEval e = eval_at_quad(disc.biot, s.eta.col(m), nc);
    acc += 2.0 * mu_b * quad_sym_grad_sq(disc.biot, kap, dp, e) +
           lambda_b * quad_div_sq(disc.biot, kap, dp, e);
  }
  return acc;
}

double sd_norm_sq(const State& s, const Discretization& disc, double mu_b, double lambda_b) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  double acc = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    double k2 = 0.0;
    for (int j = 0; j < dp; ++j) k2 += sq(kap(j));

    const QuadEval uu = eval_at_quad(disc.fluid_velocity, s.u.col(m), nc);
    acc += quad_l2_sq(disc.fluid_velocity, uu) +
           2.0 * quad_sym_grad_sq(disc.fluid_velocity, kap, dp, uu);

    acc += (sq(k2) + 1.0) * std::norm(s.w(0, m));

    const QuadEval pq = eval_at_quad(disc.plate, s.pp.col(m), 1);
    acc += quad_l2_sq(disc.plate, pq);
    for (int q = 0; q < disc.plate.n_quad_total(); ++q)
      acc += disc.plate.quad_w(q) * std::norm(pq.dval(0, q)); // transverse Darcy direction

    const QuadEval ee = eval_at_quad(disc.biot, s.eta.col(m), nc);
    acc += 2.0 * mu_b * quad_sym_grad_sq(disc.biot, kap, dp, ee) +
           lambda_b * quad_div_sq(disc.biot, kap, dp, ee);

    const QuadEval bb = eval_at_quad(disc.biot, s.pb.col(m), 1);
    acc += quad_grad_sq(disc.biot, kap, dp, bb);
  }
  return acc;
}

double field_l2_sq(const Eigen::MatrixXcd& coeffs, const TransverseMesh& mesh, int ncomp) {
  const int nn = mesh.n_nodes();
  if (coeffs.rows() != static_cast<Eigen::Index>(ncomp) * nn)
    throw ConfigError("field_l2_sq: row count does not match ncomp * n_nodes");
  const Eigen::MatrixXd M = mass_matrix(mesh);
  double acc = 0.0;
  for (int m = 0; m < coeffs.cols(); ++m)
    for (int c = 0; c < ncomp; ++c) {
      const Eigen::VectorXcd seg = coeffs.col(m).segment(static_cast<Eigen::Index>(c) * nn, nn);
      acc += seg.dot(M * seg).real();
    }
  return acc;
}

Eigen::MatrixXcd fluid_content_quad(const State& s, const Discretization& disc, double c_b,
                                    double alpha_b) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  const int nq = disc.biot.n_quad_total();
  Eigen::MatrixXcd z(nq, disc.n_modes());
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    const QuadEval e = eval_at_quad(disc.biot, s.eta.col(m), nc);
    const QuadEval p = eval_at_quad(disc.biot, s.pb.col(m), 1);
    for (int q = 0; q < nq; ++q) {
      Complex div = e.dval(dp, q);
      for (int j = 0; j < dp; ++j) div += kI * kap(j) * e.val(j, q);
      z(q, m) = c_b * p.val(0, q) + alpha_b * div;
    }
  }
  return z;
}

Eigen::MatrixXcd fluid_content_nodal(const State& s, const Discretization& disc, double c_b,
                                     double alpha_b) {
  const Eigen::MatrixXcd zq = fluid_content_quad(s, disc, c_b, alpha_b);
  const int nq = disc.biot.n_quad_total();
  // Consistent L2 projection: M x = N^T W z.
  Eigen::MatrixXd NtW = disc.biot.shape.transpose();
  for (int q = 0; q < nq; ++q) NtW.col(q) *= disc.biot.quad_w(q);
  const Eigen::LLT<Eigen::MatrixXd> llt(mass_matrix(disc.biot));
  Eigen::MatrixXcd rhs = NtW * zq;
  Eigen::MatrixXcd out(disc.biot.n_nodes(), disc.n_modes());
  out.real() = llt.solve(rhs.real());
  out.imag() = llt.solve(rhs.imag());
  return out;
}

Eigen::MatrixXcd plate_content_quad(const State& s, const Discretization& disc, double c_p,
                                    double alpha_p) {
  const int dp = disc.domain.d_plane;
  const int nq = disc.plate.n_quad_total();
  Eigen::MatrixXcd z(nq, disc.n_modes());
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    double k2 = 0.0;
    for (int j = 0; j < dp; ++j) k2 += sq(kap(j));
    const QuadEval p = eval_at_quad(disc.plate, s.pp.col(m), 1);
    for (int q = 0; q < nq; ++q)
      z(q, m) = c_p * p.val(0, q) + alpha_p * disc.plate.quad_x(q) * k2 * s.w(0, m);
  }
  return z;
}

// ===========================================================================
// Divergence constraint
// ===========================================================================

Eigen::MatrixXcd divergence_matrix(const Discretization& disc, ModeIndex xi) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  const int nvel = disc.fluid_velocity.n_nodes();
  const int npf = disc.fluid_pressure.n_nodes();
  const Eigen::Vector2d kap = wavevector(xi);
  const Eigen::MatrixXd Mpv = mixed_mass_matrix(disc.fluid_pressure, disc.fluid_velocity);
  const Eigen::MatrixXd Dpv = mixed_deriv_matrix(disc.fluid_pressure, disc.fluid_velocity);
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(npf, nc * nvel);
  for (int j = 0; j < dp; ++j)
    B.block(0, j * nvel, npf, nvel) = (kI * kap(j)) * Mpv.cast<Complex>();
  B.block(0, dp * nvel, npf, nvel) = Dpv.cast<Complex>();
  return B;
}

DivergenceResidual divergence_residual(const State& s, const Discretization& disc) {
  const int nc = disc.domain.n_comp();
  DivergenceResidual r;
  double res2 = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::MatrixXcd B = divergence_matrix(disc, disc.modes[static_cast<std::size_t>(m)]);
    res2 += (B * s.u.col(m)).squaredNorm();
  }
  r.residual = std::sqrt(res2);
  r.u_norm = std::sqrt(field_l2_sq(s.u, disc.fluid_velocity, nc));
  return r;
}

// ===========================================================================
// Admissibility
// ===========================================================================

std::vector<std::string> state_violations(const State& s, const Discretization& disc,
                                          double tol) {
  std::vector<std::string> out;
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  const int nvel = disc.fluid_velocity.n_nodes();
  const int nb = disc.biot.n_nodes();
  const int npl = disc.plate.n_nodes();

  const struct {
    const char* name;
    const Eigen::MatrixXcd* f;
  } fields[] = {{"u", &s.u},     {"p_f", &s.pf},      {"w", &s.w},   {"wdot", &s.wdot},
                {"p_p", &s.pp},  {"eta", &s.eta},     {"p_b", &s.pb}, {"etadot", &s.etadot}};

  double scale = 1.0;
  bool finite = true;
  for (const auto& F : fields) {
    if (!F.f->allFinite()) {
      out.push_back(std::string("non-finite entries in field ") + F.name);
      finite = false;
    } else {
      scale = std::max(scale, F.f->cwiseAbs().maxCoeff());
    }
  }
  if (!finite) return out; // further checks would just propagate NaN

  // Hermitian symmetry of every mode pair.
  for (const auto& F : fields) {
    double worst = 0.0;
    for (int m = 0; m < disc.n_modes(); ++m) {
      const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
      if (xi == ModeIndex{0, 0}) {
        worst = std::max(worst, F.f->col(m).imag().cwiseAbs().maxCoeff());
      } else if (is_canonical(xi)) {
        const int j = disc.mode_index(negate(xi));
        worst = std::max(worst,
                         (F.f->col(j) - F.f->col(m).conjugate()).cwiseAbs().maxCoeff());
      }
    }
    if (worst > tol * scale)
      add_violation(out, std::string("Hermitian symmetry broken for field ") + F.name, worst,
                    tol * scale);
  }

  // Essential traces.
  double worst_noslip = 0.0, worst_tang = 0.0, worst_kin = 0.0, worst_pres = 0.0,
         worst_rate = 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    for (int c = 0; c < nc; ++c)
      worst_noslip = std::max(worst_noslip, std::abs(s.u(c * nvel + 0, m)));
    for (int c = 0; c < dp; ++c) {
      worst_tang = std::max(worst_tang, std::abs(s.eta(c * nb + 0, m)));
      worst_rate = std::max(worst_rate, std::abs(s.etadot(c * nb + 0, m)));
    }
    worst_kin = std::max(worst_kin, std::abs(s.eta((nc - 1) * nb + 0, m) - s.w(0, m)));
    worst_rate = std::max(worst_rate, std::abs(s.etadot((nc - 1) * nb + 0, m) - s.wdot(0, m)));
    worst_pres = std::max(worst_pres, std::abs(s.pp(npl - 1, m) - s.pb(0, m)));
  }
  if (worst_noslip > tol * scale)
    add_violation(out, "no-slip trace u(x3=-1) nonzero", worst_noslip, tol * scale);
  if (worst_tang > tol * scale)
    add_violation(out, "clamped tangential trace eta(x3=0) nonzero", worst_tang, tol * scale);
  if (worst_kin > tol * scale)
    add_violation(out, "kinematic trace eta_z(x3=0) != w", worst_kin, tol * scale);
  if (worst_rate > tol * scale)
    add_violation(out, "rate trace etadot(x3=0) != wdot e3", worst_rate, tol * scale);
  if (worst_pres > tol * scale)
    add_violation(out, "pressure trace p_p(s=h/2) != p_b(x3=0)", worst_pres, tol * scale);

  const DivergenceResidual dr = divergence_residual(s, disc);
  const double dthr = tol * std::max(dr.u_norm, 1.0);
  if (dr.residual > dthr)
    add_violation(out, "velocity not discretely divergence-free", dr.residual, dthr);

  return out;
}

State random_admissible_state(const Discretization& disc, std::uint64_t seed, double amplitude,
                              double decay) {
  const int dp = disc.domain.d_plane;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  State s = make_state(disc);
  auto fill = [&](Eigen::MatrixXcd& f, int m, double amp) {
    for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, m) = amp * Complex(gauss(rng), gauss(rng));
  };
  for (int m = 0; m < disc.n_modes(); ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (!is_canonical(xi)) continue;
    const double amp =
        amplitude * std::pow(decay, std::abs(xi[0]) + (dp > 1 ? std::abs(xi[1]) : 0));
    fill(s.u, m, amp);
    fill(s.w, m, amp);
    fill(s.wdot, m, amp);
    fill(s.pp, m, amp);
    fill(s.eta, m, amp);
    fill(s.etadot, m, amp);
    fill(s.pb, m, amp);
  }
  apply_constraints(s, disc);
  project_divergence_free(s, disc);
  apply_constraints(s, disc);
  s.t = 0.0;
  return s;
}

double project_divergence_free(State& s, const Discretization& disc) {
  const int nc = disc.domain.n_comp();
  const int nvel = disc.fluid_velocity.n_nodes();
  const int npf = disc.fluid_pressure.n_nodes();
  const Eigen::MatrixXcd u_before = s.u;

  // Constrained least-squares correction per mode, within the no-slip
  // subspace (node 0 stays 0):
  //   [ M   (BE)^H ] [y]   [ M y_r ]
  //   [ BE    0    ] [l] = [   0   ]
  const int nfu = nc * (nvel - 1);
  const Eigen::MatrixXd Mv = mass_matrix(disc.fluid_velocity);
  Eigen::MatrixXd Mfree = Eigen::MatrixXd::Zero(nfu, nfu);
  for (int c = 0; c < nc; ++c)
    Mfree.block(c * (nvel - 1), c * (nvel - 1), nvel - 1, nvel - 1) =
        Mv.block(1, 1, nvel - 1, nvel - 1);
  auto gather_free = [&](const Eigen::VectorXcd& ufull) {
    Eigen::VectorXcd y(nfu);
    for (int c = 0; c < nc; ++c)
      y.segment(c * (nvel - 1), nvel - 1) = ufull.segment(c * nvel + 1, nvel - 1);
    return y;
  };
  for (int m = 0; m < disc.n_modes(); ++m) {
    const ModeIndex xi = disc.modes[static_cast<std::size_t>(m)];
    if (!is_canonical(xi)) continue;
    const Eigen::MatrixXcd Bfull = divergence_matrix(disc, xi);
    Eigen::MatrixXcd BE(npf, nfu);
    for (int c = 0; c < nc; ++c)
      BE.block(0, c * (nvel - 1), npf, nvel - 1) = Bfull.block(0, c * nvel + 1, npf, nvel - 1);
    const int n = nfu + npf;
    Eigen::MatrixXcd K = Eigen::MatrixXcd::Zero(n, n);
    K.topLeftCorner(nfu, nfu) = Mfree.cast<Complex>();
    K.topRightCorner(nfu, npf) = BE.adjoint();
    K.bottomLeftCorner(npf, nfu) = BE;
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs.head(nfu) = Mfree.cast<Complex>() * gather_free(s.u.col(m));
    const Eigen::VectorXcd sol = Eigen::PartialPivLU<Eigen::MatrixXcd>(K).solve(rhs);
    for (int c = 0; c < nc; ++c) {
      s.u(c * nvel + 0, m) = 0.0;
      s.u.col(m).segment(c * nvel + 1, nvel - 1) = sol.segment(c * (nvel - 1), nvel - 1);
    }
  }

  hermitianize(s, disc);
  const double before = std::sqrt(field_l2_sq(u_before, disc.fluid_velocity, nc));
  const double change =
      std::sqrt(field_l2_sq(s.u - u_before, disc.fluid_velocity, nc));
  return before > 0.0 ? change / before : 0.0;
}

} // namespace fpsi
