#include "cover/scene.hpp"

#include <numbers>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cover/error.hpp"
#include "cover/rng.hpp"
#include "cover/sphere_grid.hpp"

namespace cover {

using nlohmann::json;

Vec3 Camera::ray_direction(int u, int v) const {
  const Vec3 local((u + 0.5 - intrinsics.cx) / intrinsics.fx,
                   (v + 0.5 - intrinsics.cy) / intrinsics.fy, 1.0);
  return (rotation * local).normalized();
}

std::optional<Eigen::Vector2d> Camera::project(const Vec3& world) const {
  const Vec3 local = rotation.conjugate() * (world - position);
  if (local.z() <= 1e-9) return std::nullopt;
  return Eigen::Vector2d(intrinsics.fx * local.x() / local.z() + intrinsics.cx,
                         intrinsics.fy * local.y() / local.z() + intrinsics.cy);
}

bool Camera::in_frustum(const Vec3& world) const {
  const auto px = project(world);
  return px && px->x() >= 0.0 && px->x() < width() && px->y() >= 0.0 &&
         px->y() < height();
}

void Camera::validate() const {
  const auto& k = intrinsics;
  require(k.fx > 0.0 && k.fy > 0.0, Errc::invalid_argument,
          "camera focal lengths must be positive");
  require(k.width > 0 && k.height > 0, Errc::invalid_argument,
          "camera image size must be positive");
  require(k.cx > 0.0 && k.cx < k.width && k.cy > 0.0 && k.cy < k.height,
          Errc::invalid_argument, "principal point must lie inside the image");
  require(std::abs(rotation.norm() - 1.0) <= 1e-9, Errc::invalid_argument,
          "camera rotation must be a unit quaternion");
  require(position.allFinite(), Errc::invalid_argument,
          "camera position must be finite");
}

void Primitive::validate() const {
  require(mean.allFinite(), Errc::invalid_argument, "primitive mean not finite");
  const double scale = covariance.cwiseAbs().maxCoeff();
  require((covariance - covariance.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * std::max(scale, 1.0),
          Errc::invalid_argument, "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(covariance, Eigen::EigenvaluesOnly);
  require(eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0,
          Errc::invalid_argument, "covariance must be positive definite");
  require(opacity >= 0.0 && opacity <= 1.0, Errc::invalid_argument,
          "opacity must be in [0, 1]");
  require(matte_color.minCoeff() >= 0.0 && matte_color.maxCoeff() <= 1.0,
          Errc::invalid_argument, "color must be in [0, 1]");
  if (patch_radiances) {
    require(patch_radiances->size() == 0 ||
                (patch_radiances->minCoeff() >= 0.0 &&
                 patch_radiances->maxCoeff() <= 1.0),
            Errc::invalid_argument, "patch radiances must be in [0, 1]");
  }
}

bool Scene::view_dependent() const {
  return !primitives.empty() && primitives.front().patch_radiances.has_value();
}

namespace {

bool same_camera(const Camera& a, const Camera& b) {
  return a.position == b.position && a.rotation.coeffs() == b.rotation.coeffs() &&
         a.intrinsics.fx == b.intrinsics.fx && a.intrinsics.fy == b.intrinsics.fy &&
         a.intrinsics.cx == b.intrinsics.cx && a.intrinsics.cy == b.intrinsics.cy &&
         a.intrinsics.width == b.intrinsics.width &&
         a.intrinsics.height == b.intrinsics.height;
}

bool disjoint(const std::vector<Camera>& a, const std::vector<Camera>& b) {
  for (const auto& x : a)
    for (const auto& y : b)
      if (same_camera(x, y)) return false;
  return true;
}

}  // namespace

void Scene::validate() const {
  require(!primitives.empty(), Errc::invalid_argument,
          "scene needs at least one primitive");
  const bool vd = view_dependent();
  for (const auto& p : primitives) {
    p.validate();
    require(p.patch_radiances.has_value() == vd, Errc::invalid_argument,
            "patch radiances must be present on all primitives or none");
    if (vd)
      require(p.patch_radiances->rows() == patch_grid_size,
              Errc::dimension_mismatch,
              "patch radiance rows must equal patch_grid_size");
  }
  for (const auto* list : {&eval_cameras, &candidate_cameras, &seed_cameras})
    for (const auto& c : *list) c.validate();
  require(disjoint(eval_cameras, candidate_cameras) &&
              disjoint(eval_cameras, seed_cameras) &&
              disjoint(candidate_cameras, seed_cameras),
          Errc::invalid_argument, "camera lists must be pairwise disjoint");
}

Camera look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up,
                      const Intrinsics& intrinsics) {
  const Vec3 delta = target - position;
  require(delta.norm() > 1e-12, Errc::degenerate_frame,
          "camera position coincides with target");
  const Vec3 forward = delta.normalized();
  const Vec3 side = forward.cross(up);
  require(up.norm() > 0.0 && side.norm() > 1e-9 * up.norm(),
          Errc::degenerate_frame, "up vector is parallel to viewing direction");
  const Vec3 right = side.normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  Camera cam;
  cam.intrinsics = intrinsics;
  cam.rotation = Eigen::Quaterniond(r).normalized();
  cam.position = position;
  return cam;
}

Scene generate_scene(const SceneSpec& spec) {
  require(spec.n_primitives >= 1, Errc::invalid_spec, "n_primitives must be >= 1");
  require(spec.n_candidates >= 0 && spec.n_eval >= 0 && spec.n_seed >= 0,
          Errc::invalid_spec, "camera counts must be >= 0");
  const Vec3 extent = spec.box_max - spec.box_min;
  require(extent.allFinite() && extent.minCoeff() > 0.0, Errc::invalid_spec,
          "bounding box must have positive extent on every axis");
  require(spec.scale_min > 0.0 && spec.scale_max >= spec.scale_min,
          Errc::invalid_spec, "invalid scale range");
  require(spec.opacity_min >= 0.0 && spec.opacity_max <= 1.0 &&
              spec.opacity_min <= spec.opacity_max,
          Errc::invalid_spec, "invalid opacity range");
  require(spec.shell_min > 0.0 && spec.shell_max >= spec.shell_min,
          Errc::invalid_spec, "invalid camera shell range");
  require(spec.seed_cone_deg > 0.0 && spec.seed_cone_deg <= 180.0, Errc::invalid_spec,
          "seed cone must lie in (0, 180] degrees");
  require(spec.L >= 1, Errc::invalid_spec, "L must be >= 1");

  Rng rng(spec.rng_seed);
  Scene scene;
  scene.patch_grid_size = spec.L;
  scene.color_kappa = spec.color_kappa;

  DirectionGrid grid;
  if (spec.view_dependent) grid = DirectionGrid::with_size(spec.L);

  const double log_lo = std::log(spec.scale_min);
  const double log_hi = std::log(spec.scale_max);
  scene.primitives.reserve(spec.n_primitives);
  for (int i = 0; i < spec.n_primitives; ++i) {
    Primitive p;
    for (int a = 0; a < 3; ++a)
      p.mean[a] = rng.uniform(spec.box_min[a], spec.box_max[a]);
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    const Mat3 rot = q.toRotationMatrix();
    Vec3 s;
    for (int a = 0; a < 3; ++a) s[a] = std::exp(rng.uniform(log_lo, log_hi));
    const Mat3 cov = rot * s.cwiseAbs2().asDiagonal() * rot.transpose();
    p.covariance = 0.5 * (cov + cov.transpose());
    p.opacity = rng.uniform(spec.opacity_min, spec.opacity_max);
    for (int c = 0; c < 3; ++c) p.matte_color[c] = rng.uniform();
    if (spec.view_dependent) {
      // Smooth field: matte color plus a linear ramp over the sphere.
      Eigen::MatrixX3d field(grid.size(), 3);
      for (int c = 0; c < 3; ++c) {
        Vec3 axis(rng.normal(), rng.normal(), rng.normal());
        axis.normalize();
        const double amplitude = rng.uniform(0.15, 0.35);
        for (int l = 0; l < grid.size(); ++l)
          field(l, c) = std::clamp(
              p.matte_color[c] + amplitude * axis.dot(grid.direction(l)), 0.0, 1.0);
      }
      p.patch_radiances = std::move(field);
    }
    scene.primitives.push_back(std::move(p));
  }

  const Vec3 centroid = 0.5 * (spec.box_min + spec.box_max);
  const double half_diag = 0.5 * extent.norm();
  std::vector<Camera> all;
  auto random_direction = [&] {
    for (;;) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      if (dir.norm() >= 1e-12) return Vec3(dir.normalized());
    }
  };
  // Uniform on the cap of directions within `cone` radians of `axis`.
  auto cap_direction = [&](const Vec3& axis, double cone) {
    const double z = rng.uniform(std::cos(cone), 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = axis.cross(helper).normalized();
    const Vec3 e2 = axis.cross(e1);
    return Vec3((z * axis + r * std::cos(phi) * e1 + r * std::sin(phi) * e2).normalized());
  };
  const Vec3 seed_axis = random_direction();
  const double seed_cone = spec.seed_cone_deg * std::numbers::pi / 180.0;
  auto sample_camera = [&](bool seed) {
    for (;;) {
      const Vec3 dir = seed ? cap_direction(seed_axis, seed_cone) : random_direction();
      const double radius =
          half_diag * rng.uniform(spec.shell_min, spec.shell_max);
      const Vec3 up = std::abs(dir.z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
      Camera cam = look_at_camera(centroid + radius * dir, centroid, up,
                                  spec.intrinsics);
      bool clash = false;
      for (const auto& other : all) clash = clash || same_camera(cam, other);
      if (clash) continue;
      all.push_back(cam);
      return cam;
    }
  };
  for (int i = 0; i < spec.n_candidates; ++i)
    scene.candidate_cameras.push_back(sample_camera(false));
  for (int i = 0; i < spec.n_eval; ++i)
    scene.eval_cameras.push_back(sample_camera(false));
  for (int i = 0; i < spec.n_seed; ++i)
    scene.seed_cameras.push_back(sample_camera(true));

  scene.validate();
  return scene;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  require(j.is_array() && j.size() == 3, Errc::format, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json cameras_json(const std::vector<Camera>& cams) {
  json arr = json::array();
  for (const auto& c : cams) arr.push_back(camera_to_json(c));
  return arr;
}

std::vector<Camera> json_cameras(const json& j) {
  std::vector<Camera> out;
  for (const auto& c : j) out.push_back(camera_from_json(c));
  return out;
}

}  // namespace

json camera_to_json(const Camera& c) {
  const auto& k = c.intrinsics;
  return {{"fx", k.fx},
          {"fy", k.fy},
          {"cx", k.cx},
          {"cy", k.cy},
          {"w", k.width},
          {"h", k.height},
          {"quat", {c.rotation.w(), c.rotation.x(), c.rotation.y(), c.rotation.z()}},
          {"pos", vec_json(c.position)}};
}

Camera camera_from_json(const json& j) {
  try {
    Camera c;
    c.intrinsics.fx = j.at("fx").get<double>();
    c.intrinsics.fy = j.at("fy").get<double>();
    c.intrinsics.cx = j.at("cx").get<double>();
    c.intrinsics.cy = j.at("cy").get<double>();
    c.intrinsics.width = j.at("w").get<int>();
    c.intrinsics.height = j.at("h").get<int>();
    const auto& q = j.at("quat");
    require(q.is_array() && q.size() == 4, Errc::format, "quat needs 4 entries");
    c.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(),
                                    q[2].get<double>(), q[3].get<double>());
    c.position = json_vec(j.at("pos"));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("bad camera: ") + e.what());
  }
}

json scene_to_json(const Scene& scene) {
  json prims = json::array();
  for (const auto& p : scene.primitives) {
    const Mat3& s = p.covariance;
    json jp = {{"mean", vec_json(p.mean)},
               {"cov", {s(0, 0), s(0, 1), s(0, 2), s(1, 1), s(1, 2), s(2, 2)}},
               {"opacity", p.opacity},
               {"color", vec_json(p.matte_color)}};
    if (p.patch_radiances) {
      json rows = json::array();
      for (int l = 0; l < p.patch_radiances->rows(); ++l)
        rows.push_back({(*p.patch_radiances)(l, 0), (*p.patch_radiances)(l, 1),
                        (*p.patch_radiances)(l, 2)});
      jp["patches"] = std::move(rows);
    }
    prims.push_back(std::move(jp));
  }
  return {{"format_version", 1},
          {"patch_grid_size", scene.patch_grid_size},
          {"color_kappa", scene.color_kappa},
          {"primitives", std::move(prims)},
          {"eval_cameras", cameras_json(scene.eval_cameras)},
          {"candidate_cameras", cameras_json(scene.candidate_cameras)},
          {"seed_cameras", cameras_json(scene.seed_cameras)}};
}

Scene scene_from_json(const json& j) {
  try {
    Scene scene;
    require(j.value("format_version", 1) == 1, Errc::format,
            "unsupported scene format version");
    scene.patch_grid_size = j.value("patch_grid_size", 162);
    scene.color_kappa = j.value("color_kappa", 16.0);
    for (const auto& jp : j.at("primitives")) {
      Primitive p;
      p.mean = json_vec(jp.at("mean"));
      const auto& c = jp.at("cov");
      require(c.is_array() && c.size() == 6, Errc::format,
              "cov needs 6 upper-triangular entries");
      p.covariance << c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5];
      p.opacity = jp.at("opacity").get<double>();
      p.matte_color = json_vec(jp.at("color"));
      if (jp.contains("patches")) {
        const auto& rows = jp.at("patches");
        Eigen::MatrixX3d field(rows.size(), 3);
        for (std::size_t l = 0; l < rows.size(); ++l)
          field.row(static_cast<Eigen::Index>(l)) = json_vec(rows[l]).transpose();
        p.patch_radiances = std::move(field);
      }
      scene.primitives.push_back(std::move(p));
    }
    scene.eval_cameras = json_cameras(j.at("eval_cameras"));
    scene.candidate_cameras = json_cameras(j.at("candidate_cameras"));
    scene.seed_cameras = json_cameras(j.at("seed_cameras"));
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("bad scene: ") + e.what());
  }
}

json scene_spec_to_json(const SceneSpec& s) {
  const auto& k = s.intrinsics;
  return {{"n_primitives", s.n_primitives},
          {"box_min", vec_json(s.box_min)},
          {"box_max", vec_json(s.box_max)},
          {"n_candidates", s.n_candidates},
          {"n_eval", s.n_eval},
          {"n_seed", s.n_seed},
          {"rng_seed", s.rng_seed},
          {"view_dependent", s.view_dependent},
          {"L", s.L},
          {"color_kappa", s.color_kappa},
          {"intrinsics",
           {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
            {"w", k.width}, {"h", k.height}}},
          {"scale_min", s.scale_min},
          {"scale_max", s.scale_max},
          {"opacity_min", s.opacity_min},
          {"opacity_max", s.opacity_max},
          {"shell_min", s.shell_min},
          {"shell_max", s.shell_max},
          {"seed_cone_deg", s.seed_cone_deg}};
}

SceneSpec scene_spec_from_json(const json& j) {
  static const char* kKeys[] = {
      "n_primitives", "box_min",   "box_max",   "n_candidates", "n_eval",
      "n_seed",       "rng_seed",  "view_dependent", "L",       "color_kappa",
      "intrinsics",   "scale_min", "scale_max", "opacity_min",  "opacity_max",
      "shell_min",    "shell_max", "seed_cone_deg"};
  require(j.is_object(), Errc::format, "scene spec must be an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKeys) known = known || key == k;
    require(known, Errc::format, "unknown scene spec key: " + key);
  }
  try {
    SceneSpec s;
    s.n_primitives = j.value("n_primitives", s.n_primitives);
    if (j.contains("box_min")) s.box_min = json_vec(j["box_min"]);
    if (j.contains("box_max")) s.box_max = json_vec(j["box_max"]);
    s.n_candidates = j.value("n_candidates", s.n_candidates);
    s.n_eval = j.value("n_eval", s.n_eval);
    s.n_seed = j.value("n_seed", s.n_seed);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.view_dependent = j.value("view_dependent", s.view_dependent);
    s.L = j.value("L", s.L);
    s.color_kappa = j.value("color_kappa", s.color_kappa);
    if (j.contains("intrinsics")) {
      const auto& k = j["intrinsics"];
      s.intrinsics.fx = k.at("fx").get<double>();
      s.intrinsics.fy = k.at("fy").get<double>();
      s.intrinsics.cx = k.at("cx").get<double>();
      s.intrinsics.cy = k.at("cy").get<double>();
      s.intrinsics.width = k.at("w").get<int>();
      s.intrinsics.height = k.at("h").get<int>();
    }
    s.scale_min = j.value("scale_min", s.scale_min);
    s.scale_max = j.value("scale_max", s.scale_max);
    s.opacity_min = j.value("opacity_min", s.opacity_min);
    s.opacity_max = j.value("opacity_max", s.opacity_max);
    s.shell_min = j.value("shell_min", s.shell_min);
    s.shell_max = j.value("shell_max", s.shell_max);
    s.seed_cone_deg = j.value("seed_cone_deg", s.seed_cone_deg);
    return s;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("bad scene spec: ") + e.what());
  }
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  out << scene_to_json(scene).dump(1) << '\n';
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::format, path + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace cover
