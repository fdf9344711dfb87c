#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace cover {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// One Gaussian primitive. `patch_radiances`, when present, is an L x 3
/// color field sampled at the patches of the scene's direction grid.
struct Primitive {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
  double opacity = 1.0;
  Vec3 matte_color = Vec3::Zero();
  std::optional<Eigen::MatrixX3d> patch_radiances;

  void validate() const;
};

struct Intrinsics {
  double fx = 28.0;
  double fy = 28.0;
  double cx = 16.0;
  double cy = 16.0;
  int width = 32;
  int height = 32;
};

/// Pinhole camera. Camera frame is x right, y down, z forward; `rotation`
/// maps camera coordinates to world coordinates.
struct Camera {
  Intrinsics intrinsics;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 position = Vec3::Zero();

  int width() const { return intrinsics.width; }
  int height() const { return intrinsics.height; }
  int pixel_count() const { return intrinsics.width * intrinsics.height; }

  Vec3 forward() const { return rotation * Vec3::UnitZ(); }

  /// Unit world-space direction through the center of pixel (u, v).
  Vec3 ray_direction(int u, int v) const;
  Vec3 ray_direction(int pixel) const {
    return ray_direction(pixel % width(), pixel / width());
  }

  /// Continuous pixel coordinates of a world point, or nullopt when the point
  /// is behind the camera.
  std::optional<Eigen::Vector2d> project(const Vec3& world) const;

  /// True when `world` is in front of the camera and projects inside the image.
  bool in_frustum(const Vec3& world) const;

  void validate() const;
};

struct Scene {
  std::vector<Primitive> primitives;
  std::vector<Camera> eval_cameras;
  std::vector<Camera> candidate_cameras;
  std::vector<Camera> seed_cameras;
  // Direction grid size and kernel concentration used by the view-dependent
  // color model. Ignored for matte scenes.
  int patch_grid_size = 162;
  double color_kappa = 16.0;

  int primitive_count() const { return static_cast<int>(primitives.size()); }
  bool view_dependent() const;
  void validate() const;
};

struct SceneSpec {
  int n_primitives = 200;
  Vec3 box_min = Vec3(-1.0, -1.0, -1.0);
  Vec3 box_max = Vec3(1.0, 1.0, 1.0);
  int n_candidates = 100;
  int n_eval = 20;
  int n_seed = 10;
  std::uint64_t rng_seed = 0;
  bool view_dependent = false;
  int L = 162;
  double color_kappa = 16.0;

  Intrinsics intrinsics;
  // Per-axis standard deviations are drawn log-uniformly from this range.
  double scale_min = 0.05;
  double scale_max = 0.16;
  double opacity_min = 0.6;
  double opacity_max = 1.0;
  // Camera shell radius as a multiple of the box half-diagonal.
  double shell_min = 1.7;
  double shell_max = 2.0;
  // Seed cameras sit in a cap of this half-angle (degrees) around one random
  // axis, like the opening frames of a capture; 180 spreads them uniformly.
  double seed_cone_deg = 45.0;
};

Scene generate_scene(const SceneSpec& spec);

/// Builds a camera at `position` looking at `target`. Throws
/// Errc::degenerate_frame when position == target or `up` is parallel to the
/// viewing direction.
Camera look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up,
                      const Intrinsics& intrinsics);

nlohmann::json camera_to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const nlohmann::json& j);

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace cover
