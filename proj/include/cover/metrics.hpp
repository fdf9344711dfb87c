#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cover/raster.hpp"
#include "cover/scene.hpp"
#include "cover/sphere_grid.hpp"

namespace cover {

/// Running squared column norms ||W_{:,i}||^2 of all observed unit rows.
struct TransAccumulator {
  Eigen::VectorXd col_sq_norms;

  TransAccumulator() = default;
  explicit TransAccumulator(int n_primitives)
      : col_sq_norms(Eigen::VectorXd::Zero(n_primitives)) {}
  bool operator==(const TransAccumulator&) const = default;
};

/// col_sq_norms[i] += w_i^2. The row must be unit L2 (or empty).
void update_trans(TransAccumulator& acc, const WeightRow& row);
/// sum_i w_i ||W_{:,i}||_2.
double score_trans(const TransAccumulator& acc, const WeightRow& row);

/// Running squared norms of the per-primitive, per-patch columns of the
/// view-expanded design matrix (P x L).
struct ViewAccumulator {
  Eigen::MatrixXd patch_sq_norms;

  ViewAccumulator() = default;
  ViewAccumulator(int n_primitives, int n_patches)
      : patch_sq_norms(Eigen::MatrixXd::Zero(n_primitives, n_patches)) {}
  bool operator==(const ViewAccumulator&) const = default;
};

/// `betas[k]` holds the unit-L2 patch weights of primitive row.indices[k].
void update_view(ViewAccumulator& acc, const WeightRow& row,
                 std::span<const Eigen::VectorXd> betas);
/// sum_i w_i sum_l beta^i_l ||[W~]^i_l||_2.
double score_view(const ViewAccumulator& acc, const WeightRow& row,
                  std::span<const Eigen::VectorXd> betas);

/// Variants where every primitive on the ray shares one beta (the kernel
/// centered on the ray direction).
void update_view_shared(ViewAccumulator& acc, const WeightRow& row, const Eigen::VectorXd& beta);
double score_view_shared(const ViewAccumulator& acc, const WeightRow& row,
                         const Eigen::VectorXd& beta);

/// Flattened view-expanded row w~ = w^T blkdiag(beta^1, ..., beta^P) as a
/// dense P*L vector (primitive-major).
Eigen::VectorXd expand_view_row(const WeightRow& row, std::span<const Eigen::VectorXd> betas,
                                int n_primitives, int n_patches);

/// Per-primitive record of which sphere patches have observed it.
class CoverageGrids {
 public:
  CoverageGrids() = default;
  CoverageGrids(DirectionGrid grid, int n_primitives);

  const DirectionGrid& grid() const { return grid_; }
  int primitive_count() const { return n_primitives_; }
  int patch_count() const { return grid_.size(); }

  bool seen(int primitive, int patch) const {
    return seen_[index(primitive, patch)] != 0;
  }
  void mark(int primitive, int patch) { seen_[index(primitive, patch)] = 1; }
  int seen_count(int primitive) const;

  /// (1 + max over seen patches of dir_l . d) / 2, or 0 if never seen.
  double coverage(int primitive, const Vec3& d) const;

  const std::vector<std::uint8_t>& raw() const { return seen_; }
  std::vector<std::uint8_t>& raw() { return seen_; }

  bool operator==(const CoverageGrids& o) const {
    return n_primitives_ == o.n_primitives_ && grid_ == o.grid_ && seen_ == o.seen_;
  }

 private:
  std::size_t index(int primitive, int patch) const {
    return static_cast<std::size_t>(primitive) * grid_.size() + patch;
  }

  DirectionGrid grid_;
  int n_primitives_ = 0;
  std::vector<std::uint8_t> seen_;
};

/// A primitive seen by a camera, with the camera-to-primitive direction and
/// the number of pixels it contributes to.
struct Visibility {
  int primitive = 0;
  Vec3 direction = Vec3::UnitZ();
  int pixel_count = 0;
};

/// Unit direction from the camera center to the primitive mean.
Vec3 viewing_direction(const Primitive& primitive, const Camera& camera);

/// Default composited weight a primitive must reach to count as observed.
inline constexpr double kVisibilityCutoff = 1e-4;

/// Primitives whose mean lies in the camera frustum. With `occlusion_aware`
/// a primitive must also reach `cutoff` weight in some sampled pixel.
std::vector<Visibility> visible_primitives(const Scene& scene, const CameraRender& render,
                                           bool occlusion_aware,
                                           double cutoff = kVisibilityCutoff);

/// Marks the patch of each visible primitive's viewing direction as seen.
void observe_coverage(CoverageGrids& grids, std::span<const Visibility> visible);

/// Coverage factor of every primitive as seen from `camera`, in [0, 1].
std::vector<double> coverage_per_primitive(const CoverageGrids& grids, const Scene& scene,
                                           const Camera& camera);

struct CoverageScore {
  // Mean over the alpha mask; 1.0 when the camera sees nothing. Lower values
  // mean less covered, i.e. more informative.
  double mean_score = 1.0;
  MetricImage image;
};

inline constexpr double kEmptyMaskScore = 1.0;

/// Mean of the coverage metric image over pixels with alpha > 0 and
/// alpha >= min_alpha.
CoverageScore score_coverage(const Scene& scene, const CoverageGrids& grids,
                             const Camera& camera, double background,
                             double min_alpha = 0.0);
CoverageScore score_coverage(const Scene& scene, const CoverageGrids& grids,
                             const CameraRender& render, double background,
                             double min_alpha = 0.0);

}  // namespace cover
