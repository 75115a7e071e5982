/** @file verify.hpp
 *  @brief Independent correctness oracles: a brute-force dense assembler and
 *         solver for tiny grids (explicit constrained-subspace basis, no
 *         per-mode shortcuts) and manufactured-solution machinery with
 *         symbolic source derivation and order-of-accuracy studies.
 */
#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/expression.hpp"
#include "fpsi/physics.hpp"
#include "fpsi/state.hpp"

namespace fpsi {

// ===========================================================================
// Dense reference oracle
// ===========================================================================

struct DenseReport {
  int n_total = 0;       ///< global unconstrained size (all modes)
  int n_constraints = 0;
  int n_free = 0;
  double condition = 0.0; ///< spectral condition estimate (when requested)
};

/** Assemble the global step matrix over all modes in full (unconstrained)
 *  variables by direct quadrature of every weak-form term, with in-plane
 *  integrals evaluated as explicit collocation sums. Row/column index:
 *  mode * n_full + per-mode offset (same bookkeeping as FieldLayout, none of
 *  the per-mode assembly code).
 */
Eigen::MatrixXcd dense_reference_matrix(const Discretization& disc,
                                        const PhysicalParams& p, double dt,
                                        const PermField& k);

/** One implicit-Euler step by the brute-force path: dense global matrix, the
 *  essential constraints imposed through an explicitly computed null-space
 *  basis (LU kernel), one dense factorization. Optional sources must be
 *  sampled at the target time. Throws ConfigError when the free size exceeds
 *  `dense_cap`. Set `want_condition` to also report the spectral condition
 *  number of the reduced matrix (costly: full SVD).
 */
State dense_reference_step(const State& prev, const Discretization& disc,
                           const PhysicalParams& p, double dt, const PermField& k,
                           const SampledSources* src = nullptr,
                           DenseReport* report = nullptr, bool want_condition = false,
                           int dense_cap = 2000);

// ===========================================================================
// Manufactured solutions
// ===========================================================================

/** One separable term of a modal field: amp * profile(x3 or s) * timef(t).
 *  Profiles of fluid/Biot fields use x3, plate profiles use s; evaluation
 *  binds both names to the transverse coordinate.
 */
struct ModalTerm {
  Complex amp{0.0, 0.0};
  Expr profile; ///< transverse shape
  Expr timef;   ///< time factor
};
using ModalSum = std::vector<ModalTerm>;

Complex modal_eval(const ModalSum& f, double coord, double t);

/// Closed-form fields of one canonical mode (the mirror is implied by
/// Hermitian symmetry). Vector fields hold ncomp component sums.
struct MmsModeData {
  ModeIndex xi{0, 0};
  std::vector<ModalSum> u; ///< ncomp
  ModalSum pf;
  ModalSum w;  ///< profile = 1 (midsurface scalar)
  ModalSum pp;
  std::vector<ModalSum> eta; ///< ncomp
  ModalSum pb;
};

/** A manufactured case: exact fields satisfying every essential constraint
 *  and div u = 0 identically (validated on construction). `representable`
 *  marks cases whose transverse profiles lie in the discrete spaces (so
 *  spatial error sits at solver tolerance).
 */
struct MmsCase {
  std::string name;
  int d_plane = 1;
  double h = 0.1;
  bool representable = false;
  std::vector<MmsModeData> modes;
};

/// Polynomial profiles inside the discrete spaces, e^{-t} time factor:
/// temporal studies see pure implicit-Euler error.
MmsCase mms_temporal_case();

/// Trigonometric transverse profiles, linear-in-time factor (integrated
/// exactly by implicit Euler): spatial studies see pure discretization error.
MmsCase mms_spatial_case();

/** Sources and interface corrections induced by an MmsCase: obtained by
 *  symbolic differentiation of the exact fields in the strong equations and
 *  the natural-coupling mismatches. The permeability is the constant k0. The
 *  plate momentum source Fp and plate mass source Sp exist only for
 *  verification runs (`manufactured` stays true so physical drivers can
 *  refuse them).
 */
struct MmsSources {
  bool manufactured = true;
  int d_plane = 1;
  std::vector<MmsModeData> exact; ///< the case's fields (kept for errors)
  struct PerMode {
    ModeIndex xi{0, 0};
    std::vector<ModalSum> f, Fb;    ///< ncomp each
    ModalSum S, Sp, Fp;
    std::vector<ModalSum> g_bjs;    ///< d_plane
    ModalSum g_pres, g_filt, g_flux, g_btop;
    std::vector<ModalSum> g_btrac;  ///< ncomp
  };
  std::vector<PerMode> modes;

  /// Collocation-free sampling (the case IS modal); requires every case mode
  /// to exist in the discretization.
  SampledSources sample(const Discretization& disc, double t) const;

  SourceProvider provider(const Discretization& disc) const;
};

MmsSources mms_sources(const MmsCase& c, const PhysicalParams& p, double k0);

/// Nodal interpolation of the exact fields (exact when representable);
/// rates from symbolic time derivatives; constraints snapped and the
/// velocity projected onto the discrete divergence-free manifold.
State mms_exact_state(const MmsCase& c, const Discretization& disc, double t);

/// L2 errors of a state against the exact fields at the state's time, one
/// entry per field, plus the exact-field norms for relative scaling.
struct MmsErrors {
  static constexpr int n_fields = 8;
  static const char* field_name(int i); ///< u, p_f, w, wdot, p_p, eta, etadot, p_b
  Eigen::Array<double, n_fields, 1> error{Eigen::Array<double, n_fields, 1>::Zero()};
  Eigen::Array<double, n_fields, 1> scale{Eigen::Array<double, n_fields, 1>::Zero()};
};

MmsErrors mms_errors(const State& s, const MmsCase& c, const Discretization& disc);

// ===========================================================================
// Order studies
// ===========================================================================

enum class Refinement { Time, Transverse };

struct StudySpec {
  Refinement refinement = Refinement::Time;
  RunMode mode = RunMode::DynamicLinear;
  double k0 = 1.0;       ///< constant permeability
  int M = 1;             ///< in-plane modes (must cover the case's modes)
  int levels = 4;        ///< >= 3
  double T = 1.0;
  int base_steps = 25;   ///< level l runs base_steps * 2^l steps (Time)
  int base_elems = 4;    ///< level l uses base_elems * 2^l elements (Transverse)
  int fixed_elems = 4;   ///< transverse resolution held fixed in Time studies
  int fixed_steps = 4;   ///< step count held fixed in Transverse studies
};

/** Per-level L2 errors at the final time plus per-field least-squares slopes
 *  of log error vs log(dt) or log(h). A field whose finest error sits at
 *  solver tolerance relative to its scale is flagged `exact` (slope
 *  meaningless); a field whose error sequence fails to decrease monotonically
 *  is flagged.
 */
struct OrderReport {
  StudySpec spec;
  std::vector<double> hs;                  ///< dt or h per level
  Eigen::MatrixXd errors;                  ///< levels x n_fields
  Eigen::Array<double, MmsErrors::n_fields, 1> slopes;
  std::array<bool, MmsErrors::n_fields> exact{};
  std::array<bool, MmsErrors::n_fields> monotone{};
};

OrderReport order_study(const MmsCase& c, const PhysicalParams& p, const StudySpec& spec);

} // namespace fpsi
