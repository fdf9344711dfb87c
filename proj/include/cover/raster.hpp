#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cover/scene.hpp"

namespace cover {

/// Samples with alpha below this are dropped from a ray.
inline constexpr double kAlphaCutoff = 1e-4;

struct RaySample {
  int primitive = 0;
  double depth = 0.0;
  double alpha = 0.0;
};

enum class NormMode { raw, unit_l2, unit_l1_with_background };

/// Sparse row of termination probabilities. Entries of a composited row are
/// stored front to back.
struct WeightRow {
  std::vector<int> indices;
  std::vector<double> weights;
  NormMode mode = NormMode::raw;
  // Background share, only meaningful for unit_l1_with_background.
  double background = 0.0;

  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
  double sum() const;
  double l2_norm() const;
};

/// Rescales a raw row. Empty rows stay empty (and are left unnormalized).
WeightRow normalize_row(WeightRow row, NormMode mode);

struct WeightMatrix {
  std::vector<WeightRow> rows;
  int n_primitives = 0;
  // Rays that hit nothing and were not stored.
  int dropped_empty = 0;

  Eigen::MatrixXd to_dense() const;
};

/// One composited pixel of a camera render.
struct PixelRow {
  int pixel = 0;
  Vec3 direction = Vec3::UnitZ();
  WeightRow row;
};

/// Raw compositing weights for every sampled pixel of one camera. Sampled
/// pixels are those whose linear index is a multiple of `stride`.
struct CameraRender {
  Camera camera;
  int stride = 1;
  std::vector<PixelRow> pixels;
};

/// Ray caster over an immutable scene. Caches per-primitive precision
/// matrices and culling radii.
class Compositor {
 public:
  explicit Compositor(const Scene& scene);

  const Scene& scene() const { return *scene_; }

  /// Samples along the ray sorted by depth (ties by primitive index).
  std::vector<RaySample> ray_samples(const Vec3& origin, const Vec3& direction) const;

  /// Front-to-back alpha compositing: w_i = alpha_i prod_{j<i} (1 - alpha_j).
  WeightRow composite_ray(const Vec3& origin, const Vec3& direction) const;

  CameraRender render_weights(const Camera& camera, int stride = 1) const;

 private:
  const Scene* scene_;
  std::vector<Mat3> precision_;
  std::vector<double> cull_radius_;
};

/// Convenience wrapper; builds a Compositor per call.
WeightRow composite_ray(const Scene& scene, const Vec3& origin, const Vec3& direction);

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0.0) {}

  double& at(int pixel, int channel = 0) { return data[std::size_t(pixel) * channels + channel]; }
  double at(int pixel, int channel = 0) const { return data[std::size_t(pixel) * channels + channel]; }
  bool operator==(const Image&) const = default;
};

/// Color render over a black background. Matte scenes use matte colors;
/// view-dependent scenes blend patch radiances with the kernel centered on the
/// ray direction.
Image render_color(const Scene& scene, const Camera& camera);
Image render_color(const Scene& scene, const CameraRender& render);

/// Renders arbitrary per-primitive colors (P x 3) through cached weights.
Image render_with_colors(const CameraRender& render, const Eigen::MatrixX3d& colors);

struct MetricImage {
  Image image;                  // single channel, values in [0, 1]
  std::vector<std::uint8_t> mask;  // 1 where the composited alpha is > 0
  std::vector<double> alpha;       // composited alpha per pixel

  int mask_count() const;
  /// Mean over masked pixels whose alpha is at least `min_alpha`;
  /// `empty_value` when no pixel qualifies.
  double mean_over_mask(double empty_value, double min_alpha = 0.0) const;
};

/// Composites per-primitive scores in [0, 1] with background b in {0, 1}:
/// sum_i w_i s_i + (1 - sum_i w_i) b, using raw (unnormalized) weights.
MetricImage render_metric(const Scene& scene, const Camera& camera,
                          std::span<const double> scores, double background);
MetricImage render_metric(const CameraRender& render, std::span<const double> scores,
                          double background);

WeightMatrix assemble_weight_matrix(const Scene& scene, std::span<const Camera> cameras,
                                    NormMode mode, int pixel_stride);
WeightMatrix assemble_weight_matrix(std::span<const CameraRender> renders,
                                    int n_primitives, NormMode mode);

/// Binary P5 (1 channel) / P6 (3 channel) with 8-bit samples.
void write_pgm(const Image& image, const std::string& path);
void write_ppm(const Image& image, const std::string& path);
/// Little-endian 32-bit float PFM, 1 or 3 channels.
void write_pfm(const Image& image, const std::string& path);

}  // namespace cover
