#include "cover/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cover/error.hpp"

namespace cover {
namespace {

void require_unit(const WeightRow& row) {
  if (row.empty()) return;
  require(std::abs(row.l2_norm() - 1.0) <= 1e-9, Errc::precondition,
          "accumulator rows must have unit L2 norm");
}

void check_betas(const WeightRow& row, std::span<const Eigen::VectorXd> betas, int n_patches) {
  require(betas.size() == row.size(), Errc::dimension_mismatch,
          "need one beta vector per row entry");
  for (const auto& b : betas)
    require(b.size() == n_patches, Errc::dimension_mismatch,
            "beta length must equal patch count");
}

}  // namespace

void update_trans(TransAccumulator& acc, const WeightRow& row) {
  require_unit(row);
  for (std::size_t k = 0; k < row.size(); ++k) {
    require(row.indices[k] >= 0 && row.indices[k] < acc.col_sq_norms.size(),
            Errc::dimension_mismatch, "row index out of range");
    acc.col_sq_norms[row.indices[k]] += row.weights[k] * row.weights[k];
  }
}

double score_trans(const TransAccumulator& acc, const WeightRow& row) {
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k)
    s += row.weights[k] * std::sqrt(acc.col_sq_norms[row.indices[k]]);
  return s;
}

void update_view(ViewAccumulator& acc, const WeightRow& row,
                 std::span<const Eigen::VectorXd> betas) {
  require_unit(row);
  check_betas(row, betas, static_cast<int>(acc.patch_sq_norms.cols()));
  for (std::size_t k = 0; k < row.size(); ++k) {
    require(row.indices[k] >= 0 && row.indices[k] < acc.patch_sq_norms.rows(),
            Errc::dimension_mismatch, "row index out of range");
    acc.patch_sq_norms.row(row.indices[k]) +=
        (row.weights[k] * betas[k]).cwiseAbs2().transpose();
  }
}

double score_view(const ViewAccumulator& acc, const WeightRow& row,
                  std::span<const Eigen::VectorXd> betas) {
  check_betas(row, betas, static_cast<int>(acc.patch_sq_norms.cols()));
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k)
    s += row.weights[k] *
         betas[k].dot(acc.patch_sq_norms.row(row.indices[k]).cwiseSqrt().transpose());
  return s;
}

void update_view_shared(ViewAccumulator& acc, const WeightRow& row,
                        const Eigen::VectorXd& beta) {
  require_unit(row);
  require(beta.size() == acc.patch_sq_norms.cols(), Errc::dimension_mismatch,
          "beta length must equal patch count");
  const Eigen::RowVectorXd beta_sq = beta.cwiseAbs2().transpose();
  for (std::size_t k = 0; k < row.size(); ++k) {
    require(row.indices[k] >= 0 && row.indices[k] < acc.patch_sq_norms.rows(),
            Errc::dimension_mismatch, "row index out of range");
    acc.patch_sq_norms.row(row.indices[k]) += row.weights[k] * row.weights[k] * beta_sq;
  }
}

double score_view_shared(const ViewAccumulator& acc, const WeightRow& row,
                         const Eigen::VectorXd& beta) {
  require(beta.size() == acc.patch_sq_norms.cols(), Errc::dimension_mismatch,
          "beta length must equal patch count");
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k)
    s += row.weights[k] *
         beta.dot(acc.patch_sq_norms.row(row.indices[k]).cwiseSqrt().transpose());
  return s;
}

Eigen::VectorXd expand_view_row(const WeightRow& row, std::span<const Eigen::VectorXd> betas,
                                int n_primitives, int n_patches) {
  check_betas(row, betas, n_patches);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_primitives) * n_patches);
  for (std::size_t k = 0; k < row.size(); ++k)
    out.segment(static_cast<Eigen::Index>(row.indices[k]) * n_patches, n_patches) +=
        row.weights[k] * betas[k];
  return out;
}

CoverageGrids::CoverageGrids(DirectionGrid grid, int n_primitives)
    : grid_(std::move(grid)),
      n_primitives_(n_primitives),
      seen_(static_cast<std::size_t>(n_primitives) * grid_.size(), 0) {}

int CoverageGrids::seen_count(int primitive) const {
  int n = 0;
  for (int l = 0; l < patch_count(); ++l) n += seen(primitive, l) ? 1 : 0;
  return n;
}

double CoverageGrids::coverage(int primitive, const Vec3& d) const {
  // Empty max is taken as -1, which maps to a score of 0.
  double best = -1.0;
  for (int l = 0; l < patch_count(); ++l)
    if (seen(primitive, l)) best = std::max(best, grid_.direction(l).dot(d));
  return std::clamp(0.5 * (1.0 + best), 0.0, 1.0);
}

Vec3 viewing_direction(const Primitive& primitive, const Camera& camera) {
  const Vec3 d = primitive.mean - camera.position;
  const double n = d.norm();
  return n > 0.0 ? Vec3(d / n) : camera.forward();
}

std::vector<Visibility> visible_primitives(const Scene& scene, const CameraRender& render,
                                           bool occlusion_aware, double cutoff) {
  std::map<int, int> hits;
  for (const auto& px : render.pixels)
    for (std::size_t k = 0; k < px.row.size(); ++k)
      if (px.row.weights[k] >= cutoff) ++hits[px.row.indices[k]];

  std::vector<Visibility> out;
  for (int i = 0; i < scene.primitive_count(); ++i) {
    const auto& p = scene.primitives[i];
    if (!render.camera.in_frustum(p.mean)) continue;
    const auto it = hits.find(i);
    const int count = it == hits.end() ? 0 : it->second;
    if (occlusion_aware && count == 0) continue;
    out.push_back({i, viewing_direction(p, render.camera), count});
  }
  return out;
}

void observe_coverage(CoverageGrids& grids, std::span<const Visibility> visible) {
  for (const auto& v : visible) {
    require(v.primitive >= 0 && v.primitive < grids.primitive_count(),
            Errc::dimension_mismatch, "visible primitive out of range");
    require(std::abs(v.direction.norm() - 1.0) <= 1e-9, Errc::precondition,
            "viewing direction must be unit length");
    grids.mark(v.primitive, grids.grid().quantize(v.direction));
  }
}

std::vector<double> coverage_per_primitive(const CoverageGrids& grids, const Scene& scene,
                                           const Camera& camera) {
  require(grids.primitive_count() == scene.primitive_count(), Errc::dimension_mismatch,
          "coverage grids do not match the scene");
  std::vector<double> scores(static_cast<std::size_t>(scene.primitive_count()));
  for (int i = 0; i < scene.primitive_count(); ++i)
    scores[i] = grids.coverage(i, viewing_direction(scene.primitives[i], camera));
  return scores;
}

CoverageScore score_coverage(const Scene& scene, const CoverageGrids& grids,
                             const Camera& camera, double background, double min_alpha) {
  return score_coverage(scene, grids, Compositor(scene).render_weights(camera), background,
                        min_alpha);
}

CoverageScore score_coverage(const Scene& scene, const CoverageGrids& grids,
                             const CameraRender& render, double background,
                             double min_alpha) {
  const auto scores = coverage_per_primitive(grids, scene, render.camera);
  CoverageScore out;
  out.image = render_metric(render, scores, background);
  out.mean_score = out.image.mean_over_mask(kEmptyMaskScore, min_alpha);
  return out;
}

}  // namespace cover
