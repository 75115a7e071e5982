/** @file physics.cpp
 *  @brief Parameter validation, permeability evaluation, source sampling.
 */
#include "fpsi/physics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fpsi/errors.hpp"

namespace fpsi {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("invalid parameters: ") + what);
}

bool live(const Expr& e) { return !e.is_zero(); }

/// Evaluate an expression over the collocation grid at one transverse point,
/// then reduce to modal amplitudes. `coord` selects which ExprVars member
/// receives the transverse coordinate.
Eigen::VectorXcd sample_modal_row(const Expr& e, const PlaneTransform& tr, double trans,
                                  bool use_s, double t) {
  Eigen::VectorXcd phys(tr.n_points());
  ExprVars v;
  v.t = t;
  if (use_s)
    v.s = trans;
  else
    v.x3 = trans;
  for (int i = 0; i < tr.n_points(); ++i) {
    const Eigen::Vector2d x = tr.point(i);
    v.x1 = x(0);
    v.x2 = x(1);
    phys(i) = e.eval(v);
  }
  Eigen::VectorXcd modes(tr.n_modes());
  tr.to_modes(phys, modes);
  return modes;
}

/// Volume source: rows = transverse quadrature points, cols = modes.
Eigen::MatrixXcd sample_volume(const Expr& e, const TransverseMesh& mesh,
                               const PlaneTransform& tr, bool use_s, double t) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(mesh.n_quad_total(), tr.n_modes());
  if (!live(e)) return out;
  for (int q = 0; q < mesh.n_quad_total(); ++q)
    out.row(q) = sample_modal_row(e, tr, mesh.quad_x(q), use_s, t).transpose();
  return out;
}

Eigen::RowVectorXcd sample_surface(const Expr& e, const PlaneTransform& tr, double t) {
  if (!live(e)) return Eigen::RowVectorXcd::Zero(tr.n_modes());
  return sample_modal_row(e, tr, 0.0, false, t).transpose();
}

/// Split a positive physical-grid field into in-plane mean and fluctuation.
void split_mean_fluct(const Eigen::MatrixXd& k, PermField& out) {
  const int Q = static_cast<int>(k.rows());
  const int n = static_cast<int>(k.cols());
  out.mean = k.rowwise().mean();
  Eigen::MatrixXd fl = k;
  fl.colwise() -= out.mean;
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  out.has_fluct = fl.cwiseAbs().maxCoeff() > 1e-13 * scale;
  if (out.has_fluct)
    out.fluct = std::move(fl);
  else
    out.fluct.resize(Q, 0);
  (void)n;
}

void check_positive(const Eigen::MatrixXd& k) {
  const double kmin = k.minCoeff();
  if (!(kmin > 0.0)) {
    std::ostringstream os;
    os << "permeability must be positive everywhere (min value " << kmin << ")";
    throw ConfigError(os.str());
  }
}

} // namespace

// ===========================================================================
// Parameters
// ===========================================================================

const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::DynamicLinear: return "dynamic-linear";
    case RunMode::QuasistaticLinear: return "quasistatic-linear";
    case RunMode::QuasistaticNonlinear: return "quasistatic-nonlinear";
  }
  return "?";
}

void validate_params(const PhysicalParams& p) {
  require(p.rho_f > 0.0, "rho_f must be positive");
  require(p.mu_f > 0.0, "mu_f must be positive");
  require(p.beta >= 0.0, "beta must be nonnegative");
  require(p.rho_p >= 0.0, "rho_p must be nonnegative");
  require(p.D_bend > 0.0, "D must be positive");
  require(p.gamma >= 0.0, "gamma must be nonnegative");
  require(p.alpha_p >= 0.0, "alpha_p must be nonnegative");
  require(p.c_p > 0.0, "the plate storage coefficient must satisfy c_p > 0");
  require(p.k_p > 0.0, "k_p must be positive");
  require(p.rho_b >= 0.0, "rho_b must be nonnegative");
  require(p.mu_b > 0.0, "mu_b must be positive");
  require(p.lambda_b >= 0.0, "lambda_b must be nonnegative");
  require(p.alpha_b >= 0.0, "alpha_b must be nonnegative");
  require(p.c_b >= 0.0, "c_b must be nonnegative");
  require(p.mu_v >= 0.0, "mu_v must be nonnegative");
  require(p.lambda_v >= 0.0, "lambda_v must be nonnegative");
  if (p.mode != RunMode::DynamicLinear)
    require(p.rho_b == 0.0, "quasistatic modes require rho_b = 0");
}

// ===========================================================================
// Permeability
// ===========================================================================

void validate_permeability(const PermeabilityModel& m) {
  switch (m.kind) {
    case PermeabilityKind::Constant:
      require(m.k0 > 0.0, "constant permeability must be positive");
      break;
    case PermeabilityKind::SpaceTime:
      require(live(m.spacetime), "space-time permeability expression is missing");
      break;
    case PermeabilityKind::Nonlinear:
      require(live(m.response), "nonlinear permeability response is missing");
      require(m.k_min > 0.0, "k_min must be positive");
      require(m.k_max >= m.k_min, "k_max must be >= k_min");
      break;
  }
}

bool permeability_time_dependent(const PermeabilityModel& m) {
  switch (m.kind) {
    case PermeabilityKind::Constant: return false;
    case PermeabilityKind::SpaceTime: return !m.spacetime.derivative("t").is_zero();
    case PermeabilityKind::Nonlinear: return true;
  }
  return false;
}

PermField eval_permeability(const PermeabilityModel& m, const PhysicalParams& p,
                            const Discretization& disc, const PlaneTransform& tr,
                            const State& lag, double t) {
  const int Q = disc.biot.n_quad_total();
  PermField out;

  switch (m.kind) {
    case PermeabilityKind::Constant: {
      if (!(m.k0 > 0.0)) throw ConfigError("permeability must be positive");
      out.mean = Eigen::VectorXd::Constant(Q, m.k0);
      out.fluct.resize(Q, 0);
      out.has_fluct = false;
      return out;
    }
    case PermeabilityKind::SpaceTime: {
      Eigen::MatrixXd k(Q, tr.n_points());
      ExprVars v;
      v.t = t;
      for (int q = 0; q < Q; ++q) {
        v.x3 = disc.biot.quad_x(q);
        for (int i = 0; i < tr.n_points(); ++i) {
          const Eigen::Vector2d x = tr.point(i);
          v.x1 = x(0);
          v.x2 = x(1);
          k(q, i) = m.spacetime.eval(v);
        }
      }
      check_positive(k);
      split_mean_fluct(k, out);
      return out;
    }
    case PermeabilityKind::Nonlinear: {
      const Eigen::MatrixXcd zq = fluid_content_quad(lag, disc, p.c_b, p.alpha_b);
      Eigen::MatrixXd k(Q, tr.n_points());
      Eigen::VectorXcd phys(tr.n_points());
      ExprVars v;
      v.t = t;
      for (int q = 0; q < Q; ++q) {
        tr.to_physical(zq.row(q).transpose(), phys);
        for (int i = 0; i < tr.n_points(); ++i) {
          v.z = phys(i).real(); // Hermitian states have real content
          double kv = m.response.eval(v);
          if (kv < m.k_min) {
            kv = m.k_min;
            ++out.clamp_count;
          } else if (kv > m.k_max) {
            kv = m.k_max;
            ++out.clamp_count;
          }
          k(q, i) = kv;
        }
      }
      check_positive(k);
      split_mean_fluct(k, out);
      return out;
    }
  }
  throw ConfigError("unknown permeability kind");
}

// ===========================================================================
// Sources
// ===========================================================================

SampledSources zero_sources(const Discretization& disc) {
  const int nm = disc.n_modes();
  const int nc = disc.domain.n_comp();
  SampledSources s;
  s.empty = true;
  s.f.assign(static_cast<std::size_t>(nc),
             Eigen::MatrixXcd::Zero(disc.fluid_velocity.n_quad_total(), nm));
  s.Fb.assign(static_cast<std::size_t>(nc),
              Eigen::MatrixXcd::Zero(disc.biot.n_quad_total(), nm));
  s.S = Eigen::MatrixXcd::Zero(disc.biot.n_quad_total(), nm);
  s.Sp = Eigen::MatrixXcd::Zero(disc.plate.n_quad_total(), nm);
  s.Fp = Eigen::RowVectorXcd::Zero(nm);
  s.g_bjs.assign(static_cast<std::size_t>(disc.domain.d_plane),
                 Eigen::RowVectorXcd::Zero(nm));
  s.g_pres = Eigen::RowVectorXcd::Zero(nm);
  s.g_filt = Eigen::RowVectorXcd::Zero(nm);
  s.g_flux = Eigen::RowVectorXcd::Zero(nm);
  s.g_btop = Eigen::RowVectorXcd::Zero(nm);
  s.g_btrac.assign(static_cast<std::size_t>(nc), Eigen::RowVectorXcd::Zero(nm));
  return s;
}

SourceProvider make_source_provider(const Sources& src, const Discretization& disc,
                                    const PlaneTransform& tr) {
  return [&src, &disc, &tr](double t) { return sample_sources(src, disc, tr, t); };
}

SampledSources sample_sources(const Sources& src, const Discretization& disc,
                              const PlaneTransform& tr, double t) {
  const int nc = disc.domain.n_comp();
  const int dp = disc.domain.d_plane;
  if (!src.f.empty() && static_cast<int>(src.f.size()) != nc)
    throw ConfigError("fluid source must have one expression per component");
  if (!src.Fb.empty() && static_cast<int>(src.Fb.size()) != nc)
    throw ConfigError("poroelastic source must have one expression per component");
  if (!src.g_bjs.empty() && static_cast<int>(src.g_bjs.size()) != dp)
    throw ConfigError("slip-defect data must have one expression per tangential direction");
  if (!src.g_btrac.empty() && static_cast<int>(src.g_btrac.size()) != nc)
    throw ConfigError("top-traction data must have one expression per component");

  SampledSources out = zero_sources(disc);
  bool any = false;
  for (std::size_t c = 0; c < src.f.size(); ++c)
    if (live(src.f[c])) {
      out.f[c] = sample_volume(src.f[c], disc.fluid_velocity, tr, false, t);
      any = true;
    }
  for (std::size_t c = 0; c < src.Fb.size(); ++c)
    if (live(src.Fb[c])) {
      out.Fb[c] = sample_volume(src.Fb[c], disc.biot, tr, false, t);
      any = true;
    }
  if (live(src.S)) {
    out.S = sample_volume(src.S, disc.biot, tr, false, t);
    any = true;
  }
  if (live(src.Sp)) {
    out.Sp = sample_volume(src.Sp, disc.plate, tr, true, t);
    any = true;
  }
  if (live(src.Fp)) {
    out.Fp = sample_surface(src.Fp, tr, t);
    any = true;
  }
  for (std::size_t c = 0; c < src.g_bjs.size(); ++c)
    if (live(src.g_bjs[c])) {
      out.g_bjs[c] = sample_surface(src.g_bjs[c], tr, t);
      any = true;
    }
  if (live(src.g_pres)) {
    out.g_pres = sample_surface(src.g_pres, tr, t);
    any = true;
  }
  if (live(src.g_filt)) {
    out.g_filt = sample_surface(src.g_filt, tr, t);
    any = true;
  }
  if (live(src.g_flux)) {
    out.g_flux = sample_surface(src.g_flux, tr, t);
    any = true;
  }
  if (live(src.g_btop)) {
    out.g_btop = sample_surface(src.g_btop, tr, t);
    any = true;
  }
  for (std::size_t c = 0; c < src.g_btrac.size(); ++c)
    if (live(src.g_btrac[c])) {
      out.g_btrac[c] = sample_surface(src.g_btrac[c], tr, t);
      any = true;
    }
  out.empty = !any;
  return out;
}

// ===========================================================================
// Derived fields
// ===========================================================================

std::vector<Eigen::MatrixXcd> discharge_velocity_quad(const State& s,
                                                      const Discretization& disc,
                                                      const PermField& k) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  const int Q = disc.biot.n_quad_total();
  const Complex I(0.0, 1.0);
  std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(nc),
                                    Eigen::MatrixXcd::Zero(Q, disc.n_modes()));
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    const QuadEval p = eval_at_quad(disc.biot, s.pb.col(m), 1);
    for (int q = 0; q < Q; ++q) {
      for (int j = 0; j < dp; ++j)
        out[static_cast<std::size_t>(j)](q, m) = -k.mean(q) * I * kap(j) * p.val(0, q);
      out[static_cast<std::size_t>(dp)](q, m) = -k.mean(q) * p.dval(0, q);
    }
  }
  return out;
}

std::vector<Eigen::MatrixXcd> biot_traction_quad(const State& s, const Discretization& disc,
                                                 const PhysicalParams& p) {
  const int dp = disc.domain.d_plane;
  const int nc = disc.domain.n_comp();
  const int Q = disc.biot.n_quad_total();
  const Complex I(0.0, 1.0);
  std::vector<Eigen::MatrixXcd> out(static_cast<std::size_t>(nc),
                                    Eigen::MatrixXcd::Zero(Q, disc.n_modes()));
  const bool visco = p.mu_v != 0.0 || p.lambda_v != 0.0;
  for (int m = 0; m < disc.n_modes(); ++m) {
    const Eigen::Vector2d kap = wavevector(disc.modes[static_cast<std::size_t>(m)]);
    const QuadEval e = eval_at_quad(disc.biot, s.eta.col(m), nc);
    const QuadEval pb = eval_at_quad(disc.biot, s.pb.col(m), 1);
    const QuadEval ed =
        visco ? eval_at_quad(disc.biot, s.etadot.col(m), nc) : QuadEval{};
    for (int q = 0; q < Q; ++q) {
      Complex div = e.dval(dp, q);
      for (int j = 0; j < dp; ++j) div += I * kap(j) * e.val(j, q);
      for (int j = 0; j < dp; ++j) {
        const Complex Djz = 0.5 * (e.dval(j, q) + I * kap(j) * e.val(dp, q));
        out[static_cast<std::size_t>(j)](q, m) = 2.0 * p.mu_b * Djz;
      }
      out[static_cast<std::size_t>(dp)](q, m) =
          2.0 * p.mu_b * e.dval(dp, q) + p.lambda_b * div - p.alpha_b * pb.val(0, q);
      if (visco) {
        Complex divd = ed.dval(dp, q);
        for (int j = 0; j < dp; ++j) divd += I * kap(j) * ed.val(j, q);
        for (int j = 0; j < dp; ++j) {
          const Complex Djzd = 0.5 * (ed.dval(j, q) + I * kap(j) * ed.val(dp, q));
          out[static_cast<std::size_t>(j)](q, m) += 2.0 * p.mu_v * Djzd;
        }
        out[static_cast<std::size_t>(dp)](q, m) +=
            2.0 * p.mu_v * ed.dval(dp, q) + p.lambda_v * divd;
      }
    }
  }
  return out;
}

} // namespace fpsi
