/** @file transform.hpp
 *  @brief In-plane transforms between Fourier mode coefficients and values on
 *         the periodic collocation grid.
 *
 *  The collocation grid has n_colloc >= 2*(2M+1) equispaced points per
 *  direction (x = j/n_colloc), which both dealiases the quadratic
 *  permeability products and makes the grid values of a bandlimited field an
 *  exact, invertible representation of its modes. Transforms use FFTW with
 *  FFTW_ESTIMATE plans: plan selection is then deterministic, which the
 *  bit-reproducibility guarantees of the stepper rely on. Construction and
 *  destruction serialize FFTW planning internally, so distinct instances may
 *  be created and executed from concurrent threads; a single instance is not
 *  reentrant (it owns a scratch buffer).
 */
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fpsi/geometry.hpp"

namespace fpsi {

class PlaneTransform {
public:
  /// Grid and mode layout must match the Discretization that produced them.
  PlaneTransform(int d_plane, int M, int n_colloc);
  ~PlaneTransform();

  PlaneTransform(const PlaneTransform&) = delete;
  PlaneTransform& operator=(const PlaneTransform&) = delete;

  int n_points() const { return n_pts_; }
  int n_modes() const { return static_cast<int>(modes_.size()); }

  /// In-plane coordinates of collocation point i (x2 component unused when
  /// d_plane == 1). Point ordering is row-major: i = i1 * n_colloc + i2.
  Eigen::Vector2d point(int i) const;

  /// Synthesis: f(x_i) = sum_xi modes[xi] e^{i 2 pi xi . x_i}.
  void to_physical(const Eigen::VectorXcd& modes, Eigen::VectorXcd& phys) const;

  /// Analysis: modes[xi] = (1/n_points) sum_i phys[i] e^{-i 2 pi xi . x_i};
  /// exact inverse of to_physical for bandlimited data, truncation otherwise.
  void to_modes(const Eigen::VectorXcd& phys, Eigen::VectorXcd& modes) const;

private:
  int dp_, M_, nc_, n_pts_;
  std::vector<ModeIndex> modes_;
  std::vector<int> bin_; ///< FFT bin of each mode

  void* plan_fwd_ = nullptr; ///< fftw_plan, physical -> bins
  void* plan_bwd_ = nullptr; ///< fftw_plan, bins -> physical
  mutable std::vector<Complex> buf_;
};

} // namespace fpsi
