#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cover/error.hpp"
#include "cover/scene.hpp"
#include "support.hpp"

using namespace cover;
using namespace cover::test;

namespace {

bool same_pose(const Camera& a, const Camera& b) {
  return (a.position - b.position).norm() < 1e-12 &&
         a.rotation.coeffs().isApprox(b.rotation.coeffs(), 1e-12);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("minimal spec gives one primitive and no cameras") {
  SceneSpec spec;
  spec.n_primitives = 1;
  spec.n_candidates = spec.n_eval = spec.n_seed = 0;
  const Scene s = generate_scene(spec);
  CHECK(s.primitive_count() == 1);
  CHECK(s.candidate_cameras.empty());
  CHECK(s.eval_cameras.empty());
  CHECK(s.seed_cameras.empty());
}

TEST_CASE("generation is a pure function of the spec") {
  SceneSpec spec;
  spec.rng_seed = 3;
  spec.view_dependent = true;
  const auto a = scene_to_json(generate_scene(spec)).dump();
  const auto b = scene_to_json(generate_scene(spec)).dump();
  CHECK(a == b);
  spec.rng_seed = 4;
  CHECK(scene_to_json(generate_scene(spec)).dump() != a);
}

TEST_CASE("default-sized scene has disjoint camera sets of the requested sizes") {
  SceneSpec spec;
  spec.rng_seed = 7;
  const Scene s = generate_scene(spec);
  CHECK(s.primitive_count() == 200);
  REQUIRE(s.candidate_cameras.size() == 100);
  REQUIRE(s.eval_cameras.size() == 20);
  REQUIRE(s.seed_cameras.size() == 10);
  std::vector<const Camera*> all;
  for (const auto* list : {&s.candidate_cameras, &s.eval_cameras, &s.seed_cameras})
    for (const auto& c : *list) all.push_back(&c);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) CHECK_FALSE(same_pose(*all[i], *all[j]));
}

TEST_CASE("generated primitives and cameras satisfy their invariants") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSpec spec;
    spec.rng_seed = seed;
    spec.view_dependent = seed % 2 == 1;
    const Scene s = generate_scene(spec);
    Rng rng(seed + 100);
    for (const auto& p : s.primitives) {
      CHECK((p.mean.array() >= spec.box_min.array()).all());
      CHECK((p.mean.array() <= spec.box_max.array()).all());
      CHECK((p.covariance - p.covariance.transpose()).norm() < 1e-12);
      for (int t = 0; t < 100; ++t) {
        const Vec3 x = random_unit(rng, 3);
        CHECK(x.dot(p.covariance * x) > 0.0);
      }
      CHECK(p.opacity >= 0.0);
      CHECK(p.opacity <= 1.0);
      CHECK((p.matte_color.array() >= 0.0).all());
      CHECK((p.matte_color.array() <= 1.0).all());
      CHECK(p.patch_radiances.has_value() == spec.view_dependent);
      if (p.patch_radiances) {
        CHECK(p.patch_radiances->rows() == spec.L);
        CHECK(p.patch_radiances->minCoeff() >= 0.0);
        CHECK(p.patch_radiances->maxCoeff() <= 1.0);
      }
    }
    const Vec3 centroid = 0.5 * (spec.box_min + spec.box_max);
    for (const auto* list : {&s.candidate_cameras, &s.eval_cameras, &s.seed_cameras})
      for (const auto& c : *list) {
        CHECK(std::abs(c.rotation.norm() - 1.0) < 1e-9);
        CHECK(c.forward().dot((centroid - c.position).normalized()) > 1.0 - 1e-9);
      }
  }
}

TEST_CASE("seed cameras stay inside their cap") {
  SceneSpec spec;
  spec.rng_seed = 11;
  spec.seed_cone_deg = 30.0;
  const Scene s = generate_scene(spec);
  // Any two directions within a 30 degree cap are at most 60 degrees apart.
  for (const auto& a : s.seed_cameras)
    for (const auto& b : s.seed_cameras)
      CHECK(a.position.normalized().dot(b.position.normalized()) >= std::cos(M_PI / 3) - 1e-9);
}

TEST_CASE("degenerate box and bad counts are rejected") {
  SceneSpec spec;
  spec.box_max.x() = spec.box_min.x();
  CHECK_THROWS_AS(generate_scene(spec), Error);
  try {
    generate_scene(spec);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_spec);
  }
  SceneSpec zero;
  zero.n_primitives = 0;
  CHECK_THROWS_AS(generate_scene(zero), Error);
  SceneSpec negative;
  negative.n_eval = -1;
  CHECK_THROWS_AS(generate_scene(negative), Error);
}

TEST_CASE("look_at_camera geometry") {
  const Camera c = look_at_camera(Vec3(0, 0, 5), Vec3::Zero(), Vec3::UnitY(), Intrinsics{});
  CHECK((c.forward() - Vec3(0, 0, -1)).norm() < 1e-12);
  // Center of the image looks straight ahead.
  const Vec3 d = c.ray_direction(16, 16);
  CHECK(d.dot(c.forward()) > 0.999);
  // The target projects to the principal point.
  const auto uv = c.project(Vec3::Zero());
  REQUIRE(uv.has_value());
  CHECK((*uv - Eigen::Vector2d(16, 16)).norm() < 1e-9);

  CHECK_THROWS_AS(look_at_camera(Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3::UnitZ(), {}), Error);
  try {
    look_at_camera(Vec3(0, 0, 5), Vec3::Zero(), Vec3::UnitZ(), {});
    FAIL("parallel up accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_frame);
  }

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const Vec3 pos = 5.0 * random_unit(rng, 3);
    const Vec3 target = 0.5 * random_unit(rng, 3);
    const Vec3 up = random_unit(rng, 3);
    const Vec3 fwd = (target - pos).normalized();
    if (std::abs(fwd.dot(up)) > 0.999) continue;
    const Camera cam = look_at_camera(pos, target, up, {});
    const Mat3 r = cam.rotation.toRotationMatrix();
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() > 0.0);
    CHECK((cam.forward() - fwd).norm() < 1e-12);
  }
}

TEST_CASE("projection inverts ray directions") {
  const Camera c = axis_camera(Vec3(3, -2, 1));
  for (int v = 0; v < c.height(); v += 5)
    for (int u = 0; u < c.width(); u += 5) {
      const Vec3 p = c.position + 2.5 * c.ray_direction(u, v);
      const auto uv = c.project(p);
      REQUIRE(uv.has_value());
      CHECK(std::abs((*uv)[0] - (u + 0.5)) < 1e-9);
      CHECK(std::abs((*uv)[1] - (v + 0.5)) < 1e-9);
      CHECK(c.in_frustum(p));
    }
  CHECK_FALSE(c.project(c.position - c.forward()).has_value());
  CHECK_FALSE(c.in_frustum(c.position - c.forward()));
}

TEST_CASE("invalid primitives and cameras are rejected") {
  Primitive p;
  p.covariance = Mat3::Identity();
  p.covariance(2, 2) = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p.covariance = Mat3::Identity();
  p.opacity = 1.5;
  CHECK_THROWS_AS(p.validate(), Error);
  p.opacity = 0.5;
  p.matte_color = Vec3(0.2, -0.1, 0.0);
  CHECK_THROWS_AS(p.validate(), Error);

  Camera c;
  c.intrinsics.fx = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = Camera{};
  c.intrinsics.cx = 40.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = Camera{};
  c.rotation = Eigen::Quaterniond(2.0, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("scene validation requires disjoint camera lists") {
  Scene s = one_primitive_scene(Vec3::Zero(), 0.1, 0.9);
  const Camera cam = axis_camera(Vec3(0, 0, 4));
  s.candidate_cameras.push_back(cam);
  s.seed_cameras.push_back(cam);
  CHECK_THROWS_AS(s.validate(), Error);
  s.seed_cameras.clear();
  CHECK_NOTHROW(s.validate());
  s.primitives.clear();
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("scene JSON round trip") {
  SceneSpec spec = small_spec(2);
  spec.view_dependent = true;
  spec.L = 42;
  const Scene s = generate_scene(spec);
  const auto path = (std::filesystem::temp_directory_path() / "cover_scene_rt.json").string();
  save_scene(s, path);
  const Scene back = load_scene(path);
  CHECK(scene_to_json(back).dump() == scene_to_json(s).dump());
  // Saving the reloaded scene reproduces the file byte for byte.
  const auto path2 = path + ".2";
  save_scene(back, path2);
  CHECK(read_file(path) == read_file(path2));

  const auto j = scene_to_json(s);
  CHECK(j.at("format_version") == 1);
  CHECK(j.at("primitives")[0].at("cov").size() == 6);
  CHECK(j.at("primitives")[0].at("patches").size() == 42);
  CHECK(j.at("candidate_cameras")[0].at("quat").size() == 4);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("malformed scene files are reported as format errors") {
  auto j = scene_to_json(generate_scene(small_spec(1)));
  j["primitives"][0]["cov"] = {1.0, 0.0, 0.0, -1.0, 0.0, 1.0};
  CHECK_THROWS_AS(scene_from_json(j), Error);
  auto k = scene_to_json(generate_scene(small_spec(1)));
  k.erase("primitives");
  try {
    scene_from_json(k);
    FAIL("missing primitives accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::format);
  }
  CHECK_THROWS_AS(load_scene("/nonexistent/scene.json"), Error);
}

TEST_CASE("scene spec JSON rejects unknown keys") {
  SceneSpec spec;
  spec.rng_seed = 99;
  spec.view_dependent = true;
  spec.seed_cone_deg = 70.0;
  const SceneSpec back = scene_spec_from_json(scene_spec_to_json(spec));
  CHECK(scene_spec_to_json(back) == scene_spec_to_json(spec));
  auto j = scene_spec_to_json(spec);
  j["n_prims"] = 3;
  CHECK_THROWS_AS(scene_spec_from_json(j), Error);
}
