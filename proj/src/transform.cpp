/** @file transform.cpp
 *  @brief FFTW-backed synthesis/analysis between mode coefficients and the
 *         collocation grid.
 */
#include "fpsi/transform.hpp"

#include <mutex>

#include <fftw3.h>

namespace fpsi {

namespace {
inline fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

// FFTW plan creation/destruction is not thread-safe (only execution is);
// concurrent transform construction (parallel study members) must serialize.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

PlaneTransform::PlaneTransform(int d_plane, int M, int n_colloc)
    : dp_(d_plane), M_(M), nc_(n_colloc) {
  if (d_plane != 1 && d_plane != 2)
    throw ConfigError("PlaneTransform: d_plane must be 1 or 2");
  if (n_colloc < 2 * (2 * M + 1))
    throw ConfigError("PlaneTransform: collocation grid under-resolves the mode set");
  n_pts_ = d_plane == 1 ? nc_ : nc_ * nc_;
  modes_ = mode_set(M, d_plane);

  bin_.resize(modes_.size());
  auto wrap = [this](int k) { return ((k % nc_) + nc_) % nc_; };
  for (size_t m = 0; m < modes_.size(); ++m) {
    bin_[m] = dp_ == 1 ? wrap(modes_[m][0]) : wrap(modes_[m][0]) * nc_ + wrap(modes_[m][1]);
  }

  buf_.assign(n_pts_, Complex(0.0, 0.0));
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (dp_ == 1) {
    plan_fwd_ = fftw_plan_dft_1d(nc_, as_fftw(buf_.data()), as_fftw(buf_.data()),
                                 FFTW_FORWARD, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_1d(nc_, as_fftw(buf_.data()), as_fftw(buf_.data()),
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  } else {
    plan_fwd_ = fftw_plan_dft_2d(nc_, nc_, as_fftw(buf_.data()), as_fftw(buf_.data()),
                                 FFTW_FORWARD, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_2d(nc_, nc_, as_fftw(buf_.data()), as_fftw(buf_.data()),
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  }
}

PlaneTransform::~PlaneTransform() {
  std::lock_guard<std::mutex> lock(plan_mutex());
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

Eigen::Vector2d PlaneTransform::point(int i) const {
  if (dp_ == 1) return {static_cast<double>(i) / nc_, 0.0};
  return {static_cast<double>(i / nc_) / nc_, static_cast<double>(i % nc_) / nc_};
}

void PlaneTransform::to_physical(const Eigen::VectorXcd& modes, Eigen::VectorXcd& phys) const {
  if (modes.size() != static_cast<Eigen::Index>(modes_.size()))
    throw ConfigError("PlaneTransform::to_physical: mode vector size mismatch");
  std::fill(buf_.begin(), buf_.end(), Complex(0.0, 0.0));
  for (size_t m = 0; m < modes_.size(); ++m) buf_[bin_[m]] = modes[m];
  fftw_execute(static_cast<fftw_plan>(plan_bwd_)); // unnormalized synthesis
  phys.resize(n_pts_);
  for (int i = 0; i < n_pts_; ++i) phys[i] = buf_[i];
}

void PlaneTransform::to_modes(const Eigen::VectorXcd& phys, Eigen::VectorXcd& modes) const {
  if (phys.size() != n_pts_)
    throw ConfigError("PlaneTransform::to_modes: grid vector size mismatch");
  for (int i = 0; i < n_pts_; ++i) buf_[i] = phys[i];
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  modes.resize(modes_.size());
  const double scale = 1.0 / n_pts_;
  for (size_t m = 0; m < modes_.size(); ++m) modes[m] = buf_[bin_[m]] * scale;
}

} // namespace fpsi
