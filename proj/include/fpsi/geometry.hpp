/** @file geometry.hpp
 *  @brief Domains, Fourier mode bookkeeping, transverse 1D meshes and their
 *         quadrature/matrix builders.
 *
 *  The computational domains are periodic boxes in the horizontal directions:
 *  fluid layer (0,1)^d x (-1,0), interface plate midsurface (0,1)^d x {0}
 *  (inflated to thickness [-h/2, h/2] for its pressure), and poroelastic layer
 *  (0,1)^d x (0,1), with d = d_plane in {1,2}. Discretization is Fourier
 *  pseudospectral in-plane (modes xi in [-M,M]^d, wavevector 2*pi*xi) times a
 *  conforming 1D FEM in the transverse coordinate. Everything downstream
 *  (assembly, norms, diagnostics) is built from the per-element quadrature
 *  tables and the small dense matrices produced here.
 */
#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "fpsi/errors.hpp"

namespace fpsi {

using Complex = std::complex<double>;

// ===========================================================================
// Fourier modes
// ===========================================================================

/// In-plane Fourier multi-index. Only the first d_plane entries are used;
/// the trailing entry stays 0 when d_plane == 1.
using ModeIndex = std::array<int, 2>;

inline ModeIndex negate(ModeIndex xi) { return {-xi[0], -xi[1]}; }

/// True for the zero mode and for the lexicographically positive half of the
/// mode set; exactly one of {xi, -xi} is canonical. Solvers process canonical
/// modes and obtain the rest by conjugation (Hermitian symmetry).
inline bool is_canonical(ModeIndex xi) {
  if (xi[0] != 0) return xi[0] > 0;
  return xi[1] >= 0;
}

/// Full mode set [-M,M]^d_plane in lexicographic order. Contains the zero
/// mode and is closed under negation.
std::vector<ModeIndex> mode_set(int M, int d_plane);

/// Flat index of xi within mode_set(M, d_plane); throws ConfigError if out of
/// range.
int mode_flat_index(ModeIndex xi, int M, int d_plane);

/// Wavevector kappa = 2*pi*xi (length d_plane).
Eigen::Vector2d wavevector(ModeIndex xi);

// ===========================================================================
// Domain
// ===========================================================================

/// Geometry parameters: number of periodic in-plane directions and plate
/// thickness h (the plate pressure lives on s in [-h/2, h/2]).
struct DomainSpec {
  int d_plane = 1;
  double h = 0.1;

  int n_comp() const { return d_plane + 1; } ///< vector field components
};

// ===========================================================================
// Transverse 1D meshes
// ===========================================================================

/** Uniform 1D Lagrange mesh on [a,b] with continuous elements of degree 1 or
 *  2, plus per-element Gauss quadrature tables. Nodes are coordinate-ordered
 *  (degree 2 interleaves midpoints), so index 0 / n_nodes()-1 are the
 *  endpoint traces. `shape` and `dshape` tabulate all nodal basis functions
 *  and derivatives at every quadrature point; matrix builders below are just
 *  weighted products of these tables.
 */
struct TransverseMesh {
  double a = 0.0, b = 1.0;
  int n_elem = 1;
  int degree = 1;
  int n_quad = 3; ///< Gauss points per element

  std::vector<double> nodes;      ///< size n_nodes(), ascending
  Eigen::VectorXd quad_x, quad_w; ///< size Q = n_elem * n_quad
  Eigen::MatrixXd shape, dshape;  ///< Q x n_nodes

  /// One-sided derivative evaluation rows: f'(a) = deriv_left * nodal values,
  /// f'(b) = deriv_right * nodal values.
  Eigen::RowVectorXd deriv_left, deriv_right;

  int n_nodes() const { return degree * n_elem + 1; }
  int n_quad_total() const { return n_elem * n_quad; }
  double length() const { return b - a; }
};

/// Build a mesh; n_quad = 0 selects the default degree + 2 (exact well beyond
/// the bilinear forms assembled from it).
TransverseMesh make_mesh(double a, double b, int n_elem, int degree, int n_quad = 0);

// --- matrix builders (dense; transverse problems are desk-scale) -----------

/// Mass matrix  M[a][b] = int phi_a phi_b.
Eigen::MatrixXd mass_matrix(const TransverseMesh& m);

/// Stiffness matrix  K[a][b] = int phi_a' phi_b'.
Eigen::MatrixXd stiffness_matrix(const TransverseMesh& m);

/// First-derivative matrix  D[a][b] = int phi_a phi_b'  (test value, trial
/// derivative).
Eigen::MatrixXd deriv_matrix(const TransverseMesh& m);

/// Coefficient-weighted mass / stiffness with c given at the quadrature
/// points (size n_quad_total()).
Eigen::MatrixXd weighted_mass_matrix(const TransverseMesh& m, const Eigen::VectorXd& c);
Eigen::MatrixXd weighted_stiffness_matrix(const TransverseMesh& m, const Eigen::VectorXd& c);

/// Mixed products between two meshes sharing the same partition and
/// quadrature rule (e.g. fluid velocity/pressure):
///   mixed_mass[a][b]  = int psi_a phi_b,
///   mixed_deriv[a][b] = int psi_a phi_b'   (test from `test`, trial from `trial`).
Eigen::MatrixXd mixed_mass_matrix(const TransverseMesh& test, const TransverseMesh& trial);
Eigen::MatrixXd mixed_deriv_matrix(const TransverseMesh& test, const TransverseMesh& trial);

/// Coordinate moment row  r[a] = int x phi_a(x) dx  (first moment against the
/// basis; used for the plate pressure moment coupling).
Eigen::RowVectorXd moment_row(const TransverseMesh& m);

// ===========================================================================
// Discretization bundle
// ===========================================================================

/** Everything geometric a run needs: domain, mode set, the four transverse
 *  meshes (fluid velocity one degree above fluid pressure on the same
 *  partition), and the in-plane collocation resolution used for transforms
 *  (n_colloc >= 2*(2M+1) points per direction, dealiased).
 */
struct Discretization {
  DomainSpec domain;
  int M = 0;
  int n_colloc = 2;

  TransverseMesh fluid_velocity; ///< on [-1, 0]
  TransverseMesh fluid_pressure; ///< on [-1, 0], degree = velocity - 1
  TransverseMesh plate;          ///< on [-h/2, h/2]
  TransverseMesh biot;           ///< on [0, 1]

  std::vector<ModeIndex> modes; ///< lexicographic, closed under negation

  int n_modes() const { return static_cast<int>(modes.size()); }
  int mode_index(ModeIndex xi) const { return mode_flat_index(xi, M, domain.d_plane); }
  int n_colloc_total() const {
    return domain.d_plane == 1 ? n_colloc : n_colloc * n_colloc;
  }
};

/// Validates and builds the bundle. Throws ConfigError on inconsistent input
/// (degrees outside {1,2}, velocity degree != pressure degree + 1, d_plane
/// outside {1,2}, nonpositive sizes, collocation factor < 2).
Discretization build_discretization(const DomainSpec& dom, int M,
                                    int fluid_elems, int plate_elems, int biot_elems,
                                    int velocity_degree = 2, int pressure_degree = 1,
                                    int plate_degree = 1, int biot_degree = 1,
                                    int colloc_factor = 2);

} // namespace fpsi
