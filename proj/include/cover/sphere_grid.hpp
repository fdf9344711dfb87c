#pragma once

#include <vector>

#include <Eigen/Dense>

namespace cover {

/// Discretization of the unit sphere into L patches, each represented by a
/// unit direction. A direction belongs to the patch whose representative has
/// the largest dot product with it.
class DirectionGrid {
 public:
  DirectionGrid() = default;

  /// Geodesic icosphere; vertex count is 10 * 4^subdivisions + 2.
  static DirectionGrid icosphere(int subdivisions);
  /// Fibonacci lattice with exactly `count` points.
  static DirectionGrid fibonacci(int count);
  /// Icosphere when `count` is an icosphere vertex count, Fibonacci otherwise.
  static DirectionGrid with_size(int count);

  int size() const { return static_cast<int>(dirs_.size()); }
  const Eigen::Vector3d& direction(int patch) const { return dirs_[patch]; }
  const std::vector<Eigen::Vector3d>& directions() const { return dirs_; }

  /// argmax_l d . dir_l, lowest index on ties.
  int quantize(const Eigen::Vector3d& d) const;

  /// Largest angle (radians) between any unit vector and its nearest patch
  /// direction. Exact for icospheres; a dense-sampling estimate otherwise.
  double covering_radius() const { return covering_radius_; }

  bool operator==(const DirectionGrid& other) const;

  static DirectionGrid from_directions(std::vector<Eigen::Vector3d> dirs);

 private:
  std::vector<Eigen::Vector3d> dirs_;
  double covering_radius_ = 0.0;
};

/// True when `count` is 10 * 4^k + 2 for some k >= 0.
bool is_icosphere_size(int count);

/// beta(d; mu, kappa) = C exp(kappa d . mu) evaluated over a direction grid.
struct SphericalGaussianKernel {
  double kappa = 16.0;
  // Global normalizer of the kernel over a grid of `grid_size` patches,
  // stored as log C because C underflows for large kappa.
  double log_norm_const = 0.0;

  double norm_const() const;
};

/// C chosen so that sum_l (C exp(kappa d_l . d))^2 is 1 on average over d
/// for L uniformly spread patches: C^2 = 2 kappa / (L sinh 2 kappa).
SphericalGaussianKernel make_kernel(double kappa, int grid_size);

/// L2-normalized kernel weights centered at d.
Eigen::VectorXd kernel_weights(const SphericalGaussianKernel& kernel,
                               const DirectionGrid& grid,
                               const Eigen::Vector3d& d);

/// L1-normalized variant used for color lookup, so that a color is a convex
/// combination of patch radiances.
Eigen::VectorXd kernel_weights_l1(double kappa, const DirectionGrid& grid,
                                  const Eigen::Vector3d& d);

/// Exact patch-sum dot product sum_l C^2 exp(kappa d_l . (d_train + d_test)).
double sg_dot(const SphericalGaussianKernel& kernel, const DirectionGrid& grid,
              const Eigen::Vector3d& d_train, const Eigen::Vector3d& d_test);

/// Linearized surrogate (1 + d_train . d_test) / 2.
double sg_dot_surrogate(const Eigen::Vector3d& d_train,
                        const Eigen::Vector3d& d_test);

}  // namespace cover
