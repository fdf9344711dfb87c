#include "cover/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cover/error.hpp"
#include "cover/sphere_grid.hpp"

namespace cover {

double WeightRow::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double WeightRow::l2_norm() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return std::sqrt(s);
}

WeightRow normalize_row(WeightRow row, NormMode mode) {
  switch (mode) {
    case NormMode::raw:
      row.background = 0.0;
      break;
    case NormMode::unit_l2: {
      const double n = row.l2_norm();
      if (n > 0.0)
        for (double& w : row.weights) w /= n;
      row.background = 0.0;
      break;
    }
    case NormMode::unit_l1_with_background:
      // A composited row already satisfies sum w <= 1; the remainder is the
      // background's share.
      row.background = std::max(0.0, 1.0 - row.sum());
      break;
  }
  row.mode = mode;
  return row;
}

Eigen::MatrixXd WeightMatrix::to_dense() const {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n_primitives);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].size(); ++k)
      w(static_cast<Eigen::Index>(r), rows[r].indices[k]) += rows[r].weights[k];
  return w;
}

Compositor::Compositor(const Scene& scene) : scene_(&scene) {
  const auto n = scene.primitives.size();
  precision_.resize(n);
  cull_radius_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = scene.primitives[i];
    Eigen::SelfAdjointEigenSolver<Mat3> eig(p.covariance);
    const Vec3 inv = eig.eigenvalues().cwiseInverse();
    precision_[i] = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    // Beyond this Mahalanobis radius alpha drops under the cutoff.
    if (p.opacity <= kAlphaCutoff) {
      cull_radius_[i] = -1.0;
    } else {
      const double m2 = 2.0 * std::log(p.opacity / kAlphaCutoff);
      cull_radius_[i] = std::sqrt(eig.eigenvalues().maxCoeff() * m2);
    }
  }
}

std::vector<RaySample> Compositor::ray_samples(const Vec3& origin,
                                               const Vec3& direction) const {
  require(std::abs(direction.norm() - 1.0) <= 1e-9, Errc::precondition,
          "ray direction must be unit length");
  std::vector<RaySample> samples;
  const auto& prims = scene_->primitives;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    if (cull_radius_[i] < 0.0) continue;
    const Vec3 offset = prims[i].mean - origin;
    const double along = offset.dot(direction);
    const double perp2 = offset.squaredNorm() - along * along;
    if (perp2 > cull_radius_[i] * cull_radius_[i]) continue;

    const Vec3 pd = precision_[i] * direction;
    const double dpd = direction.dot(pd);
    const double opd = offset.dot(pd);
    const double t = opd / dpd;
    if (t <= 0.0) continue;
    const double m2 = std::max(0.0, offset.dot(precision_[i] * offset) - opd * t);
    const double alpha = prims[i].opacity * std::exp(-0.5 * m2);
    if (alpha < kAlphaCutoff) continue;
    samples.push_back({static_cast<int>(i), t, alpha});
  }
  std::sort(samples.begin(), samples.end(), [](const RaySample& a, const RaySample& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.primitive < b.primitive);
  });
  return samples;
}

WeightRow Compositor::composite_ray(const Vec3& origin, const Vec3& direction) const {
  WeightRow row;
  double transmittance = 1.0;
  for (const auto& s : ray_samples(origin, direction)) {
    row.indices.push_back(s.primitive);
    row.weights.push_back(transmittance * s.alpha);
    transmittance *= 1.0 - s.alpha;
  }
  return row;
}

CameraRender Compositor::render_weights(const Camera& camera, int stride) const {
  camera.validate();
  require(stride >= 1, Errc::invalid_argument, "pixel stride must be >= 1");
  CameraRender out;
  out.camera = camera;
  out.stride = stride;
  for (int p = 0; p < camera.pixel_count(); p += stride) {
    PixelRow px;
    px.pixel = p;
    px.direction = camera.ray_direction(p);
    px.row = composite_ray(camera.position, px.direction);
    out.pixels.push_back(std::move(px));
  }
  return out;
}

WeightRow composite_ray(const Scene& scene, const Vec3& origin, const Vec3& direction) {
  return Compositor(scene).composite_ray(origin, direction);
}

Image render_color(const Scene& scene, const Camera& camera) {
  return render_color(scene, Compositor(scene).render_weights(camera));
}

Image render_color(const Scene& scene, const CameraRender& render) {
  const Camera& cam = render.camera;
  Image img(cam.width(), cam.height(), 3);
  const bool vd = scene.view_dependent();
  DirectionGrid grid;
  if (vd) grid = DirectionGrid::with_size(scene.patch_grid_size);
  for (const auto& px : render.pixels) {
    Vec3 color = Vec3::Zero();
    if (vd) {
      const Eigen::VectorXd beta = kernel_weights_l1(scene.color_kappa, grid, px.direction);
      for (std::size_t k = 0; k < px.row.size(); ++k) {
        const auto& field = *scene.primitives[px.row.indices[k]].patch_radiances;
        color += px.row.weights[k] * (field.transpose() * beta);
      }
    } else {
      for (std::size_t k = 0; k < px.row.size(); ++k)
        color += px.row.weights[k] * scene.primitives[px.row.indices[k]].matte_color;
    }
    for (int c = 0; c < 3; ++c) img.at(px.pixel, c) = std::clamp(color[c], 0.0, 1.0);
  }
  return img;
}

Image render_with_colors(const CameraRender& render, const Eigen::MatrixX3d& colors) {
  Image img(render.camera.width(), render.camera.height(), 3);
  for (const auto& px : render.pixels) {
    Vec3 color = Vec3::Zero();
    for (std::size_t k = 0; k < px.row.size(); ++k)
      color += px.row.weights[k] * colors.row(px.row.indices[k]).transpose();
    for (int c = 0; c < 3; ++c) img.at(px.pixel, c) = std::clamp(color[c], 0.0, 1.0);
  }
  return img;
}

int MetricImage::mask_count() const {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double MetricImage::mean_over_mask(double empty_value, double min_alpha) const {
  double sum = 0.0;
  int n = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p] || (min_alpha > 0.0 && alpha[p] < min_alpha)) continue;
    sum += image.data[p];
    ++n;
  }
  return n == 0 ? empty_value : sum / n;
}

MetricImage render_metric(const Scene& scene, const Camera& camera,
                          std::span<const double> scores, double background) {
  return render_metric(Compositor(scene).render_weights(camera), scores, background);
}

MetricImage render_metric(const CameraRender& render, std::span<const double> scores,
                          double background) {
  require(background == 0.0 || background == 1.0, Errc::precondition,
          "background must be 0 or 1");
  for (double s : scores)
    require(s >= 0.0 && s <= 1.0, Errc::precondition, "metric scores must be in [0, 1]");
  MetricImage out;
  out.image = Image(render.camera.width(), render.camera.height(), 1);
  out.mask.assign(static_cast<std::size_t>(render.camera.pixel_count()), 0);
  out.alpha.assign(out.mask.size(), 0.0);
  for (const auto& px : render.pixels) {
    double value = 0.0;
    double alpha = 0.0;
    for (std::size_t k = 0; k < px.row.size(); ++k) {
      const auto idx = static_cast<std::size_t>(px.row.indices[k]);
      require(idx < scores.size(), Errc::precondition,
              "score vector shorter than primitive count");
      value += px.row.weights[k] * scores[idx];
      alpha += px.row.weights[k];
    }
    value += std::max(0.0, 1.0 - alpha) * background;
    out.image.at(px.pixel) = std::clamp(value, 0.0, 1.0);
    out.mask[static_cast<std::size_t>(px.pixel)] = alpha > 0.0 ? 1 : 0;
    out.alpha[static_cast<std::size_t>(px.pixel)] = alpha;
  }
  return out;
}

WeightMatrix assemble_weight_matrix(const Scene& scene, std::span<const Camera> cameras,
                                    NormMode mode, int pixel_stride) {
  require(pixel_stride >= 1, Errc::invalid_argument, "pixel stride must be >= 1");
  const Compositor comp(scene);
  std::vector<CameraRender> renders;
  renders.reserve(cameras.size());
  for (const auto& cam : cameras) renders.push_back(comp.render_weights(cam, pixel_stride));
  return assemble_weight_matrix(renders, scene.primitive_count(), mode);
}

WeightMatrix assemble_weight_matrix(std::span<const CameraRender> renders,
                                    int n_primitives, NormMode mode) {
  WeightMatrix w;
  w.n_primitives = n_primitives;
  for (const auto& r : renders) {
    for (const auto& px : r.pixels) {
      if (px.row.empty()) {
        ++w.dropped_empty;
        continue;
      }
      w.rows.push_back(normalize_row(px.row, mode));
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Image files

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_netpbm(const Image& image, const std::string& path, int channels,
                  const char* magic) {
  require(image.channels == channels, Errc::invalid_argument,
          std::string(magic) + " output needs " + std::to_string(channels) + " channel(s)");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  out << magic << '\n' << image.width << ' ' << image.height << "\n255\n";
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

}  // namespace

void write_pgm(const Image& image, const std::string& path) {
  write_netpbm(image, path, 1, "P5");
}

void write_ppm(const Image& image, const std::string& path) {
  write_netpbm(image, path, 3, "P6");
}

void write_pfm(const Image& image, const std::string& path) {
  require(image.channels == 1 || image.channels == 3, Errc::invalid_argument,
          "PFM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  out << (image.channels == 3 ? "PF" : "Pf") << '\n'
      << image.width << ' ' << image.height << "\n-1.0\n";
  // PFM stores scanlines bottom to top.
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        float v = static_cast<float>(image.at(y * image.width + x, c));
        auto bits = std::bit_cast<std::uint32_t>(v);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
      }
    }
  }
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

}  // namespace cover
