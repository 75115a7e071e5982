/** @file acceptance_main.cpp
 *  @brief System-level acceptance gate for the coupled fluid / poroelastic
 *         plate / poroelastic layer stepper.
 *
 *  Ten checks, one pass/fail line each:
 *    1. discrete energy inequality at scale, in all three run modes
 *    2. one-step equivalence with the dense reference solver
 *    3. first-order temporal convergence on a manufactured solution
 *    4. second-order transverse convergence on a manufactured solution
 *    5. interface conditions: essential ties exact, natural couplings recovered
 *    6. discrete incompressibility of every constructed state
 *    7. nonlinear permeability: bounds, energy stability, replay determinism
 *    8. uniform-in-step-size energy and dissipation sums
 *    9. perturbation stability (difference-energy growth)
 *   10. trace-coupling norm constants: finite, mesh-stable, constraint-driven
 *
 *  Exits nonzero if any check fails.
 */
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fpsi/diagnostics.hpp"
#include "fpsi/errors.hpp"
#include "fpsi/stepper.hpp"
#include "fpsi/verify.hpp"

using namespace fpsi;

namespace {

// ===========================================================================
// Harness
// ===========================================================================

int g_checks = 0;
int g_failures = 0;

void record(const std::string& name, bool pass, const std::string& extra = "") {
  ++g_checks;
  if (!pass) ++g_failures;
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << name
            << (extra.empty() ? "" : " " + extra) << "\n";
}

/// Quantity-of-interest formatting: "(val=X, thr=Y)".
std::string qoi(double value, double threshold) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(2);
  ss << "(val=" << value << ", thr=" << threshold << ")";
  return ss.str();
}

std::string qoi_pct(double value, double threshold) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2);
  ss << "(val=" << value * 100 << "%, thr=" << threshold * 100 << "%)";
  return ss.str();
}

void banner(const std::string& title) {
  std::cout << "\n--- " << title << " ---\n";
}

class Timer {
public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

// ===========================================================================
// Shared model builders
// ===========================================================================

PhysicalParams unit_params(RunMode mode) {
  PhysicalParams p; // every coefficient defaults to one
  p.mode = mode;
  if (mode != RunMode::DynamicLinear) p.rho_b = 0.0; // quasistatic: no layer inertia
  return p;
}

/// Bounded smooth permeability response f(content) = 1 + tanh(content)/2.
PermeabilityModel bounded_response_model() {
  PermeabilityModel m;
  m.kind = PermeabilityKind::Nonlinear;
  m.response = Expr::parse("1 + 0.5*((exp(z) - exp(-z))/(exp(z) + exp(-z)))");
  m.k_min = 0.5;
  m.k_max = 1.5;
  return m;
}

PermeabilityModel model_for(RunMode mode) {
  return mode == RunMode::QuasistaticNonlinear ? bounded_response_model()
                                               : PermeabilityModel{};
}

const RunMode kModes[] = {RunMode::DynamicLinear, RunMode::QuasistaticLinear,
                          RunMode::QuasistaticNonlinear};

double max_rel_diff(const State& a, const State& b) {
  auto piece = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
    return x.size() == 0 ? 0.0 : (x - y).cwiseAbs().maxCoeff();
  };
  auto amp = [](const Eigen::MatrixXcd& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
  };
  const double diff =
      std::max({piece(a.u, b.u), piece(a.pf, b.pf), piece(a.w, b.w),
                piece(a.wdot, b.wdot), piece(a.pp, b.pp), piece(a.eta, b.eta),
                piece(a.etadot, b.etadot), piece(a.pb, b.pb)});
  const double scale =
      std::max({amp(b.u), amp(b.pf), amp(b.w), amp(b.wdot), amp(b.pp), amp(b.eta),
                amp(b.etadot), amp(b.pb), 1e-30});
  return diff / scale;
}

bool states_identical(const State& a, const State& b) {
  auto same = [](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (x(i, j) != y(i, j)) return false;
    return true;
  };
  return same(a.u, b.u) && same(a.pf, b.pf) && same(a.w, b.w) &&
         same(a.wdot, b.wdot) && same(a.pp, b.pp) && same(a.eta, b.eta) &&
         same(a.etadot, b.etadot) && same(a.pb, b.pb);
}

// ===========================================================================
// 1. Discrete energy inequality
// ===========================================================================

void criterion_energy_inequality() {
  banner("1. discrete energy inequality, all run modes");
  DomainSpec dom;
  dom.d_plane = 1;
  const Discretization disc = build_discretization(dom, 8, 16, 16, 16);
  PlaneTransform tr(dom.d_plane, 8, disc.n_colloc);

  for (const RunMode mode : kModes) {
    Timer timer;
    RunSetup setup;
    setup.params = unit_params(mode);
    setup.perm = model_for(mode);
    setup.T = 1.0;
    setup.N = 50;
    const State init = random_admissible_state(disc, 2024);
    const Trajectory traj = rothe_run(setup, disc, init);
    const EnergyCheck chk = check_energy_inequality(
        traj.states, disc, setup.params, setup.perm, tr, SourceProvider{}, 1e-9);
    const double elapsed = timer.seconds();
    const double floor = -1e-9 * chk.e0;
    record(std::string("energy margin >= -1e-9*E0 each step, ") +
               run_mode_name(mode),
           chk.min_margin >= floor, qoi(chk.min_margin, floor));
    record(std::string("energy run under 10 s, ") + run_mode_name(mode),
           elapsed < 10.0, qoi(elapsed, 10.0));
  }
}

// ===========================================================================
// 2. One-step oracle equivalence
// ===========================================================================

void criterion_oracle_equivalence() {
  banner("2. one-step equivalence with the dense reference solver");
  Timer timer;
  IterativeOptions tight;
  tight.tol = 1e-13;
  tight.max_iters = 2000;

  for (const RunMode mode : kModes) {
    const PhysicalParams p = unit_params(mode);
    const PermeabilityModel perm = model_for(mode);
    double worst = 0.0;
    int cases = 0;
    for (const int M : {0, 1}) {
      const Discretization disc = build_discretization(DomainSpec{1, 0.1}, M, 2, 2, 2);
      std::mt19937_64 rng(4400u + 10u * static_cast<unsigned>(mode) +
                          static_cast<unsigned>(M));
      std::uniform_real_distribution<double> dt_dist(1e-3, 0.5);
      for (int c = 0; c < 10; ++c, ++cases) {
        const double dt = dt_dist(rng);
        const State prev = random_admissible_state(disc, rng());
        RotheDriver driver(disc, p, perm, dt, tight);
        const State got = driver.advance(prev, zero_sources(disc));
        const State want =
            dense_reference_step(prev, disc, p, dt, driver.last_permeability());
        worst = std::max(worst, max_rel_diff(got, want));
      }
    }
    record(std::string("20 random (state, dt) steps match dense reference, ") +
               run_mode_name(mode),
           worst <= 1e-10 && cases == 20, qoi(worst, 1e-10));
  }
  const double elapsed = timer.seconds();
  record("oracle comparison under 5 s", elapsed < 5.0, qoi(elapsed, 5.0));
}

// ===========================================================================
// 3. Temporal order of accuracy
// ===========================================================================

void criterion_temporal_order() {
  banner("3. temporal convergence dt in {T/25..T/200}");
  Timer timer;
  StudySpec spec;
  spec.refinement = Refinement::Time;
  spec.mode = RunMode::DynamicLinear;
  spec.M = 1;
  spec.levels = 4;
  spec.T = 1.0;
  spec.base_steps = 25;
  spec.fixed_elems = 4;
  PhysicalParams p;
  p.mu_v = 1.0; // viscoelastic damping keeps the rate fields inside the
  p.lambda_v = 1.0; // asymptotic first-order window at these step sizes
  const OrderReport rep = order_study(mms_temporal_case(), p, spec);
  for (int f = 0; f < MmsErrors::n_fields; ++f) {
    const double slope = rep.slopes[f];
    record(std::string("temporal order of ") + MmsErrors::field_name(f) +
               " in [0.9, 1.1]",
           !rep.exact[static_cast<size_t>(f)] && slope >= 0.9 && slope <= 1.1,
           qoi(slope, 1.0));
  }
  const double elapsed = timer.seconds();
  record("temporal study under 60 s", elapsed < 60.0, qoi(elapsed, 60.0));
}

// ===========================================================================
// 4. Transverse (spatial) order of accuracy
// ===========================================================================

void criterion_spatial_order() {
  banner("4. transverse convergence, x4 element refinement");
  Timer timer;
  StudySpec spec;
  spec.refinement = Refinement::Transverse;
  spec.mode = RunMode::QuasistaticLinear;
  spec.M = 1;
  spec.levels = 3; // 4 -> 8 -> 16 elements per region
  spec.T = 1.0;
  spec.base_elems = 4;
  spec.fixed_steps = 32;
  const OrderReport rep = order_study(mms_spatial_case(), PhysicalParams{}, spec);

  const struct {
    int field;
    const char* label;
  } second_order[] = {{2, "w"}, {3, "wdot"}, {4, "p_p"}, {5, "eta"}, {7, "p_b"}};
  for (const auto& item : second_order) {
    const double slope = rep.slopes[item.field];
    record(std::string("transverse order of ") + item.label + " in [1.8, 2.2]",
           !rep.exact[static_cast<size_t>(item.field)] && slope >= 1.8 && slope <= 2.2,
           qoi(slope, 2.0));
  }
  record("transverse order of u >= 1.8 (degree-2 velocity)", rep.slopes[0] >= 1.8,
         qoi(rep.slopes[0], 1.8));
  const double elapsed = timer.seconds();
  record("transverse study under 60 s", elapsed < 60.0, qoi(elapsed, 60.0));
}

// ===========================================================================
// State collection shared by checks 5 and 6
// ===========================================================================

struct LabeledState {
  std::string label;
  State state;
  Discretization disc;
};

std::vector<LabeledState> constructed_states() {
  std::vector<LabeledState> all;
  // Random admissible states on several meshes and mode cutoffs.
  for (const int M : {0, 2}) {
    for (const int elems : {3, 6}) {
      const Discretization disc =
          build_discretization(DomainSpec{1, 0.1}, M, elems, elems, elems);
      for (const std::uint64_t seed : {1ull, 17ull}) {
        all.push_back({"random M=" + std::to_string(M) + " elems=" +
                           std::to_string(elems) + " seed=" + std::to_string(seed),
                       random_admissible_state(disc, seed), disc});
      }
    }
  }
  // Manufactured exact states.
  for (const MmsCase& c : {mms_temporal_case(), mms_spatial_case()}) {
    const Discretization disc = build_discretization(DomainSpec{c.d_plane, c.h}, 1, 4, 4, 4);
    all.push_back({"manufactured " + c.name + " t=0", mms_exact_state(c, disc, 0.0), disc});
    all.push_back({"manufactured " + c.name + " t=0.5", mms_exact_state(c, disc, 0.5), disc});
  }
  // States produced by time stepping (linear dynamic and nonlinear quasistatic).
  for (const RunMode mode : {RunMode::DynamicLinear, RunMode::QuasistaticNonlinear}) {
    const Discretization disc = build_discretization(DomainSpec{1, 0.1}, 2, 4, 4, 4);
    RunSetup setup;
    setup.params = unit_params(mode);
    setup.perm = model_for(mode);
    setup.T = 0.2;
    setup.N = 4;
    const Trajectory traj = rothe_run(setup, disc, random_admissible_state(disc, 55));
    all.push_back({std::string("stepped ") + run_mode_name(mode) + " n=1",
                   traj.states[1], disc});
    all.push_back({std::string("stepped ") + run_mode_name(mode) + " n=4",
                   traj.states[4], disc});
  }
  return all;
}

// ===========================================================================
// 5. Interface conditions
// ===========================================================================

void criterion_interfaces() {
  banner("5. interface conditions: essential exact, natural recovered");

  // Essential ties on every constructed state, against the state's own scale.
  double worst = 0.0;
  std::string worst_label = "none";
  for (const LabeledState& ls : constructed_states()) {
    PlaneTransform tr(ls.disc.domain.d_plane, ls.disc.M, ls.disc.n_colloc);
    const PhysicalParams p = unit_params(RunMode::DynamicLinear);
    const InterfaceResiduals ir =
        interface_residuals(ls.state, ls.disc, tr, p, PermeabilityModel{});
    const double scale =
        std::max(std::sqrt(sd_norm_sq(ls.state, ls.disc, p.mu_b, p.lambda_b)), 1e-30);
    const double rel = std::max(ir.kinematic, ir.pressure_trace) / scale;
    if (rel > worst) {
      worst = rel;
      worst_label = ls.label;
    }
  }
  record("essential interface residuals <= 1e-12 * scale on every state",
         worst <= 1e-12, qoi(worst, 1e-12) + " worst: " + worst_label);

  // Natural conditions on the manufactured sequence, refining transversely.
  const MmsCase c = mms_spatial_case();
  const PhysicalParams p = unit_params(RunMode::QuasistaticLinear);
  const PermeabilityModel perm;
  const MmsSources srcs = mms_sources(c, p, perm.k0);
  std::vector<InterfaceResiduals> nat;
  for (const int elems : {4, 8, 16}) {
    const Discretization disc =
        build_discretization(DomainSpec{c.d_plane, c.h}, 1, elems, elems, elems);
    PlaneTransform tr(c.d_plane, 1, disc.n_colloc);
    RunSetup setup;
    setup.params = p;
    setup.perm = perm;
    setup.T = 0.5;
    setup.N = 16;
    setup.sources = srcs.provider(disc);
    const Trajectory traj = rothe_run(setup, disc, mms_exact_state(c, disc, 0.0));
    const SampledSources corr = setup.sources(traj.states.back().t);
    nat.push_back(interface_residuals(traj.states.back(), disc, tr, p, perm, &corr));
  }
  const struct {
    const char* label;
    double InterfaceResiduals::* member;
  } naturals[] = {{"flux", &InterfaceResiduals::flux},
                  {"filtration", &InterfaceResiduals::filtration},
                  {"normal stress", &InterfaceResiduals::normal_stress},
                  {"tangential slip", &InterfaceResiduals::bjs},
                  {"layer traction", &InterfaceResiduals::biot_traction}};
  for (const auto& item : naturals) {
    const double r0 = nat[0].*(item.member), r1 = nat[1].*(item.member),
                 r2 = nat[2].*(item.member);
    // Observed order >= 0.9 counts as first-order decay, the same band
    // convention as the temporal-order check.
    const double slope = 0.5 * (std::log2(r0 / r1) + std::log2(r1 / r2));
    record(std::string("natural residual decays at >= first order: ") + item.label,
           slope >= 0.9, qoi(slope, 0.9));
  }
}

// ===========================================================================
// 6. Discrete incompressibility
// ===========================================================================

void criterion_incompressibility() {
  banner("6. discrete divergence residual of every constructed state");
  double worst = 0.0;
  std::string worst_label = "none";
  for (const LabeledState& ls : constructed_states()) {
    const DivergenceResidual dr = divergence_residual(ls.state, ls.disc);
    const double rel = dr.residual / std::max(dr.u_norm, 1e-30);
    if (rel > worst) {
      worst = rel;
      worst_label = ls.label;
    }
  }
  record("divergence residual <= 1e-10 * |u| on every state", worst <= 1e-10,
         qoi(worst, 1e-10) + " worst: " + worst_label);
}

// ===========================================================================
// 7. Nonlinear permeability: bounds, energy, replay determinism
// ===========================================================================

void criterion_nonlinear_permeability() {
  banner("7. nonlinear permeability bounds, energy, and replay");
  DomainSpec dom;
  dom.d_plane = 1;
  const Discretization disc = build_discretization(dom, 8, 16, 16, 16);
  PlaneTransform tr(dom.d_plane, 8, disc.n_colloc);
  const PhysicalParams p = unit_params(RunMode::QuasistaticNonlinear);
  const PermeabilityModel perm = bounded_response_model();

  RunSetup setup;
  setup.params = p;
  setup.perm = perm;
  setup.T = 1.0;
  setup.N = 50;
  setup.record_permeability = true;
  const State init = random_admissible_state(disc, 2024);
  const Trajectory traj = rothe_run(setup, disc, init);

  // Permeability samples at every quadrature point of every step stay inside
  // the stated window.
  double lo = perm.k_max, hi = perm.k_min;
  for (const PermField& k : traj.recorded_permeability) {
    for (int q = 0; q < k.mean.size(); ++q) {
      if (k.has_fluct) {
        for (int j = 0; j < k.fluct.cols(); ++j) {
          const double v = k.mean(q) + k.fluct(q, j);
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      } else {
        lo = std::min(lo, k.mean(q));
        hi = std::max(hi, k.mean(q));
      }
    }
  }
  const double tol = 1e-12;
  record("permeability samples >= k_min at every quadrature point",
         lo >= perm.k_min - tol, qoi(lo, perm.k_min));
  record("permeability samples <= k_max at every quadrature point",
         hi <= perm.k_max + tol, qoi(hi, perm.k_max));

  // The energy inequality of check 1 holds in this mode at the same scale.
  const EnergyCheck chk = check_energy_inequality(traj.states, disc, p, perm, tr,
                                                  SourceProvider{}, 1e-9);
  record("nonlinear energy margin >= -1e-9*E0 each step",
         chk.min_margin >= -1e-9 * chk.e0, qoi(chk.min_margin, -1e-9 * chk.e0));

  // Replaying the recorded permeability fields reproduces the trajectory
  // bit for bit (the lagged coefficient is deterministic).
  RunSetup replay_setup = setup;
  replay_setup.record_permeability = false;
  replay_setup.replay = &traj.recorded_permeability;
  const Trajectory replay = rothe_run(replay_setup, disc, init);
  bool identical = replay.states.size() == traj.states.size();
  if (identical)
    for (size_t n = 0; n < traj.states.size(); ++n)
      identical = identical && states_identical(traj.states[n], replay.states[n]);
  record("replay with recorded permeability is bitwise identical", identical);
}

// ===========================================================================
// 8. Uniform-in-step-size sums
// ===========================================================================

void criterion_uniform_bounds() {
  banner("8. energy and dissipation sums, N versus 2N");
  // Smooth compatible data: the manufactured solution and its sources. Rough
  // or force-unbalanced data burns an under-resolved transient whose split
  // between physical and numerical dissipation depends on the step size, so
  // the quantitative comparison is meaningful exactly for resolved data.
  const MmsCase c = mms_temporal_case();
  const PhysicalParams p = unit_params(RunMode::DynamicLinear);
  const PermeabilityModel perm;
  const MmsSources srcs = mms_sources(c, p, perm.k0);

  double max_e[2] = {0.0, 0.0}, diss_sum[2] = {0.0, 0.0};
  const int base_steps = 100;
  for (int half = 0; half < 2; ++half) {
    const int N = base_steps << half;
    const Discretization disc = build_discretization(DomainSpec{c.d_plane, c.h}, 1, 8, 8, 8);
    PlaneTransform tr(c.d_plane, 1, disc.n_colloc);
    RunSetup setup;
    setup.params = p;
    setup.perm = perm;
    setup.T = 1.0;
    setup.N = N;
    setup.sources = srcs.provider(disc);
    const Trajectory traj = rothe_run(setup, disc, mms_exact_state(c, disc, 0.0));
    const EnergyCheck chk = check_energy_inequality(traj.states, disc, p, perm, tr,
                                                    setup.sources, 1e-9);
    max_e[half] = *std::max_element(chk.energies.begin(), chk.energies.end());
    for (const double d : chk.dissipations) diss_sum[half] += (1.0 / N) * d;
  }
  const double de = std::abs(max_e[1] - max_e[0]) / max_e[0];
  const double dd = std::abs(diss_sum[1] - diss_sum[0]) / diss_sum[0];
  record("max energy changes < 5% under step halving", de < 0.05, qoi_pct(de, 0.05));
  record("summed dissipation changes < 5% under step halving", dd < 0.05,
         qoi_pct(dd, 0.05));
}

// ===========================================================================
// 9. Perturbation stability
// ===========================================================================

void criterion_stability() {
  banner("9. difference-energy stability under initial perturbations");
  DomainSpec dom;
  dom.d_plane = 1;
  const Discretization disc = build_discretization(dom, 2, 8, 8, 8);
  const State base = random_admissible_state(disc, 31);

  // Linear, zero sources: the difference of two solutions contracts, so the
  // worst-case growth ratio cannot exceed one (up to solver roundoff).
  const StabilityReport lin = stability_experiment(
      disc, unit_params(RunMode::DynamicLinear), PermeabilityModel{}, base, 0.5, 20,
      1e-2, 77);
  record("linear difference-energy ratio <= 1 + 1e-8",
         lin.valid && lin.ratio <= 1.0 + 1e-8, qoi(lin.ratio, 1.0 + 1e-8));

  // Nonlinear: the ratio is delta-stable (changes < 10% when delta halves).
  const PhysicalParams pn = unit_params(RunMode::QuasistaticNonlinear);
  const PermeabilityModel mn = bounded_response_model();
  const StabilityReport a = stability_experiment(disc, pn, mn, base, 0.5, 20, 1e-2, 77);
  const StabilityReport b = stability_experiment(disc, pn, mn, base, 0.5, 20, 5e-3, 77);
  const double change = std::abs(a.ratio - b.ratio) / std::max(a.ratio, 1e-30);
  record("nonlinear ratio changes < 10% when delta halves",
         a.valid && b.valid && change < 0.10, qoi_pct(change, 0.10));
}

// ===========================================================================
// 10. Trace-coupling norm constants
// ===========================================================================

void criterion_poincare() {
  banner("10. trace-coupling constants across mesh refinement");
  std::vector<double> ce, cp;
  bool all_finite = true;
  for (const int elems : {4, 8, 16}) {
    const Discretization disc =
        build_discretization(DomainSpec{1, 0.1}, 2, elems, elems, elems);
    const PoincareReport r = poincare_probe(disc);
    all_finite = all_finite && std::isfinite(r.c_eta) && std::isfinite(r.c_pb) &&
                 !r.divergent_eta && !r.divergent_pb;
    ce.push_back(r.c_eta);
    cp.push_back(r.c_pb);
  }
  record("constants finite on 3 refinement levels", all_finite,
         "(c_eta=" + std::to_string(ce.back()) + ", c_pb=" + std::to_string(cp.back()) +
             ")");
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / *lo;
  };
  record("displacement constant varies < 10% across levels", spread(ce) <= 0.10,
         qoi_pct(spread(ce), 0.10));
  record("pressure constant varies < 10% across levels", spread(cp) <= 0.10,
         qoi_pct(spread(cp), 0.10));

  const Discretization disc = build_discretization(DomainSpec{1, 0.1}, 2, 4, 4, 4);
  const PoincareReport ab = poincare_probe(disc, /*interface_constraints=*/false);
  record("variant without interface ties diverges", ab.divergent_eta || ab.divergent_pb);
}

} // namespace

int main() {
  std::cout << "acceptance: coupled fluid / poroelastic plate / poroelastic layer\n";
  Timer total;
  try {
    criterion_energy_inequality();
    criterion_oracle_equivalence();
    criterion_temporal_order();
    criterion_spatial_order();
    criterion_interfaces();
    criterion_incompressibility();
    criterion_nonlinear_permeability();
    criterion_uniform_bounds();
    criterion_stability();
    criterion_poincare();
  } catch (const std::exception& e) {
    std::cout << "[FAIL] unexpected exception: " << e.what() << "\n";
    ++g_failures;
    ++g_checks;
  }
  std::cout << "\n" << (g_checks - g_failures) << "/" << g_checks << " checks passed in "
            << std::fixed << std::setprecision(1) << total.seconds() << " s\n";
  if (g_failures > 0) {
    std::cout << "ACCEPTANCE: FAIL (" << g_failures << " failing)\n";
    return 1;
  }
  std::cout << "ACCEPTANCE: PASS\n";
  return 0;
}
