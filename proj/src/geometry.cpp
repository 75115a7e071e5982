/** @file geometry.cpp
 *  @brief Mesh construction, Gauss tables, and the small dense matrix
 *         builders used throughout assembly and diagnostics.
 */
#include "fpsi/geometry.hpp"

#include <cmath>
#include <string>

namespace fpsi {

namespace {

// Gauss-Legendre rules on [-1,1] (nodes symmetric, weights sum to 2).
// Enough digits for double round-trip.
void gauss_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  switch (n) {
    case 1:
      x = {0.0};
      w = {2.0};
      return;
    case 2:
      x = {-0.5773502691896257645, 0.5773502691896257645};
      w = {1.0, 1.0};
      return;
    case 3:
      x = {-0.7745966692414833770, 0.0, 0.7745966692414833770};
      w = {0.5555555555555555556, 0.8888888888888888889, 0.5555555555555555556};
      return;
    case 4:
      x = {-0.8611363115940525752, -0.3399810435848562648,
           0.3399810435848562648, 0.8611363115940525752};
      w = {0.3478548451374538574, 0.6521451548625461426,
           0.6521451548625461426, 0.3478548451374538574};
      return;
    case 5:
      x = {-0.9061798459386639928, -0.5384693101056830910, 0.0,
           0.5384693101056830910, 0.9061798459386639928};
      w = {0.2369268850561890875, 0.4786286704993664680, 0.5688888888888888889,
           0.4786286704993664680, 0.2369268850561890875};
      return;
    case 6:
      x = {-0.9324695142031520278, -0.6612093864662645137, -0.2386191860831969086,
           0.2386191860831969086, 0.6612093864662645137, 0.9324695142031520278};
      w = {0.1713244923791703450, 0.3607615730481386076, 0.4679139345726910474,
           0.4679139345726910474, 0.3607615730481386076, 0.1713244923791703450};
      return;
    default:
      throw ConfigError("gauss_rule: unsupported point count " + std::to_string(n));
  }
}

// Reference shape functions on [0,1].
void ref_shape(int degree, double r, std::vector<double>& N, std::vector<double>& dN) {
  if (degree == 1) {
    N = {1.0 - r, r};
    dN = {-1.0, 1.0};
  } else { // degree == 2, nodes at r = 0, 1/2, 1
    N = {(1.0 - r) * (1.0 - 2.0 * r), 4.0 * r * (1.0 - r), r * (2.0 * r - 1.0)};
    dN = {4.0 * r - 3.0, 4.0 - 8.0 * r, 4.0 * r - 1.0};
  }
}

} // namespace

// ===========================================================================
// Modes
// ===========================================================================

std::vector<ModeIndex> mode_set(int M, int d_plane) {
  std::vector<ModeIndex> out;
  if (d_plane == 1) {
    out.reserve(2 * M + 1);
    for (int k = -M; k <= M; ++k) out.push_back({k, 0});
  } else {
    out.reserve((2 * M + 1) * (2 * M + 1));
    for (int k1 = -M; k1 <= M; ++k1)
      for (int k2 = -M; k2 <= M; ++k2) out.push_back({k1, k2});
  }
  return out;
}

int mode_flat_index(ModeIndex xi, int M, int d_plane) {
  if (xi[0] < -M || xi[0] > M || (d_plane == 2 && (xi[1] < -M || xi[1] > M)) ||
      (d_plane == 1 && xi[1] != 0)) {
    throw ConfigError("mode_flat_index: mode out of range");
  }
  return d_plane == 1 ? xi[0] + M : (xi[0] + M) * (2 * M + 1) + (xi[1] + M);
}

Eigen::Vector2d wavevector(ModeIndex xi) {
  constexpr double two_pi = 6.283185307179586476925286766559;
  return {two_pi * xi[0], two_pi * xi[1]};
}

// ===========================================================================
// Meshes
// ===========================================================================

TransverseMesh make_mesh(double a, double b, int n_elem, int degree, int n_quad) {
  if (!(b > a)) throw ConfigError("make_mesh: empty interval");
  if (n_elem < 1) throw ConfigError("make_mesh: need at least one element");
  if (degree != 1 && degree != 2)
    throw ConfigError("make_mesh: element degree must be 1 or 2");
  if (n_quad == 0) n_quad = degree + 2;

  TransverseMesh m;
  m.a = a;
  m.b = b;
  m.n_elem = n_elem;
  m.degree = degree;
  m.n_quad = n_quad;

  const int nn = m.n_nodes();
  const double he = (b - a) / n_elem;
  m.nodes.resize(nn);
  for (int i = 0; i < nn; ++i) m.nodes[i] = a + he * i / degree;
  m.nodes.back() = b; // exact endpoint

  std::vector<double> gx, gw;
  gauss_rule(n_quad, gx, gw);

  const int Q = m.n_quad_total();
  m.quad_x.resize(Q);
  m.quad_w.resize(Q);
  m.shape = Eigen::MatrixXd::Zero(Q, nn);
  m.dshape = Eigen::MatrixXd::Zero(Q, nn);

  std::vector<double> N, dN;
  for (int e = 0; e < n_elem; ++e) {
    const double x0 = a + he * e;
    for (int q = 0; q < n_quad; ++q) {
      const int row = e * n_quad + q;
      const double r = 0.5 * (gx[q] + 1.0); // reference coordinate in [0,1]
      m.quad_x[row] = x0 + he * r;
      m.quad_w[row] = 0.5 * he * gw[q];
      ref_shape(degree, r, N, dN);
      for (int l = 0; l <= degree; ++l) {
        const int g = degree * e + l;
        m.shape(row, g) = N[l];
        m.dshape(row, g) = dN[l] / he;
      }
    }
  }

  // Endpoint derivative rows from the first/last element.
  m.deriv_left = Eigen::RowVectorXd::Zero(nn);
  m.deriv_right = Eigen::RowVectorXd::Zero(nn);
  std::vector<double> N0, dN0, N1, dN1;
  ref_shape(degree, 0.0, N0, dN0);
  ref_shape(degree, 1.0, N1, dN1);
  for (int l = 0; l <= degree; ++l) {
    m.deriv_left(l) = dN0[l] / he;
    m.deriv_right(degree * (n_elem - 1) + l) = dN1[l] / he;
  }
  return m;
}

// ===========================================================================
// Matrix builders
// ===========================================================================

Eigen::MatrixXd mass_matrix(const TransverseMesh& m) {
  return m.shape.transpose() * m.quad_w.asDiagonal() * m.shape;
}

Eigen::MatrixXd stiffness_matrix(const TransverseMesh& m) {
  return m.dshape.transpose() * m.quad_w.asDiagonal() * m.dshape;
}

Eigen::MatrixXd deriv_matrix(const TransverseMesh& m) {
  return m.shape.transpose() * m.quad_w.asDiagonal() * m.dshape;
}

Eigen::MatrixXd weighted_mass_matrix(const TransverseMesh& m, const Eigen::VectorXd& c) {
  if (c.size() != m.n_quad_total())
    throw ConfigError("weighted_mass_matrix: coefficient size mismatch");
  return m.shape.transpose() * (m.quad_w.cwiseProduct(c)).asDiagonal() * m.shape;
}

Eigen::MatrixXd weighted_stiffness_matrix(const TransverseMesh& m, const Eigen::VectorXd& c) {
  if (c.size() != m.n_quad_total())
    throw ConfigError("weighted_stiffness_matrix: coefficient size mismatch");
  return m.dshape.transpose() * (m.quad_w.cwiseProduct(c)).asDiagonal() * m.dshape;
}

namespace {
void check_shared_partition(const TransverseMesh& a, const TransverseMesh& b) {
  if (a.n_elem != b.n_elem || a.n_quad != b.n_quad ||
      std::abs(a.a - b.a) > 1e-14 || std::abs(a.b - b.b) > 1e-14) {
    throw ConfigError("mixed matrix: meshes must share partition and quadrature");
  }
}
} // namespace

Eigen::MatrixXd mixed_mass_matrix(const TransverseMesh& test, const TransverseMesh& trial) {
  check_shared_partition(test, trial);
  return test.shape.transpose() * test.quad_w.asDiagonal() * trial.shape;
}

Eigen::MatrixXd mixed_deriv_matrix(const TransverseMesh& test, const TransverseMesh& trial) {
  check_shared_partition(test, trial);
  return test.shape.transpose() * test.quad_w.asDiagonal() * trial.dshape;
}

Eigen::RowVectorXd moment_row(const TransverseMesh& m) {
  return (m.shape.transpose() * m.quad_w.cwiseProduct(m.quad_x)).transpose();
}

// ===========================================================================
// Discretization
// ===========================================================================

Discretization build_discretization(const DomainSpec& dom, int M,
                                    int fluid_elems, int plate_elems, int biot_elems,
                                    int velocity_degree, int pressure_degree,
                                    int plate_degree, int biot_degree,
                                    int colloc_factor) {
  if (dom.d_plane != 1 && dom.d_plane != 2)
    throw ConfigError("build_discretization: d_plane must be 1 or 2");
  if (!(dom.h > 0.0)) throw ConfigError("build_discretization: plate thickness h must be positive");
  if (M < 0) throw ConfigError("build_discretization: mode cutoff M must be >= 0");
  if (velocity_degree != pressure_degree + 1)
    throw ConfigError("build_discretization: velocity degree must exceed fluid pressure degree by one");
  if (colloc_factor < 2)
    throw ConfigError("build_discretization: collocation factor must be >= 2 (dealiasing)");

  Discretization d;
  d.domain = dom;
  d.M = M;
  d.n_colloc = colloc_factor * (2 * M + 1);
  // One shared quadrature rule per region pair keeps mixed products exact.
  const int fluid_quad = velocity_degree + 2;
  d.fluid_velocity = make_mesh(-1.0, 0.0, fluid_elems, velocity_degree, fluid_quad);
  d.fluid_pressure = make_mesh(-1.0, 0.0, fluid_elems, pressure_degree, fluid_quad);
  d.plate = make_mesh(-0.5 * dom.h, 0.5 * dom.h, plate_elems, plate_degree);
  d.biot = make_mesh(0.0, 1.0, biot_elems, biot_degree);
  d.modes = mode_set(M, dom.d_plane);
  return d;
}

} // namespace fpsi
