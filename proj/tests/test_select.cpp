#include <doctest.h>

#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "cover/error.hpp"
#include "cover/select.hpp"
#include "cover/stats.hpp"
#include "support.hpp"

using namespace cover;
using namespace cover::test;

namespace {

SelectionOptions fast_options() {
  SelectionOptions o;
  o.grid_size = 42;
  return o;
}

Primitive blob(const Vec3& mean, const Vec3& color) {
  Primitive p;
  p.mean = mean;
  p.covariance = Mat3::Identity() * 0.3 * 0.3;
  p.opacity = 0.9;
  p.matte_color = color;
  return p;
}

// Two clusters far apart along x. The seed looks at cluster A; candidate 0
// repeats that view, candidate 1 looks at cluster B.
Scene two_cluster_scene() {
  Scene s;
  for (int i = 0; i < 3; ++i) {
    s.primitives.push_back(blob(Vec3(-3.0 + 0.4 * i, 0.0, 0.0), Vec3(0.9, 0.2, 0.1)));
    s.primitives.push_back(blob(Vec3(3.0 + 0.4 * i, 0.0, 0.0), Vec3(0.1, 0.3, 0.8)));
  }
  s.seed_cameras.push_back(axis_camera(Vec3(-2.6, 0.0, 4.0), Vec3(-2.6, 0.0, 0.0)));
  s.candidate_cameras.push_back(axis_camera(Vec3(-2.6, 0.01, 4.0), Vec3(-2.6, 0.0, 0.0)));
  s.candidate_cameras.push_back(axis_camera(Vec3(3.4, 0.0, 4.0), Vec3(3.4, 0.0, 0.0)));
  s.eval_cameras.push_back(axis_camera(Vec3(0.0, -0.5, 9.0), Vec3::Zero()));
  s.validate();
  return s;
}

std::vector<int> ids_of(const CurveReport& r) {
  std::vector<int> ids;
  for (std::size_t i = 1; i < r.rows.size(); ++i) ids.push_back(r.rows[i].camera_id);
  return ids;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("method names") {
  for (Method m : {Method::cover, Method::trans, Method::view, Method::exact_fig, Method::random})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), Error);
}

TEST_CASE("PSNR convention") {
  CHECK(psnr_from_mse(1e-2) == doctest::Approx(20.0));
  CHECK(psnr_from_mse(0.0) == doctest::Approx(100.0));
}

TEST_CASE("noiseless reconstruction from every camera is exact") {
  const Scene s = generate_scene(small_spec(1, 30, 16));
  std::vector<Camera> all = s.candidate_cameras;
  all.insert(all.end(), s.seed_cameras.begin(), s.seed_cameras.end());
  const auto r = reconstruct(s, all, 1e-12);
  CHECK(r.train_residual <= 1e-6);
  CHECK(r.eval_mse <= 1e-6);
  const auto again = reconstruct(s, all, 1e-12);
  CHECK(again.eval_mse == r.eval_mse);
  CHECK(again.fitted_colors == r.fitted_colors);
  CHECK_THROWS_AS(reconstruct(s, std::vector<Camera>{}, 1e-6), Error);
}

TEST_CASE("a camera seeing one primitive recovers just that color") {
  Scene s;
  s.primitives.push_back(blob(Vec3(0, 0, 0), Vec3(0.7, 0.4, 0.2)));
  s.primitives.push_back(blob(Vec3(10, 0, 0), Vec3(0.3, 0.9, 0.5)));
  s.eval_cameras.push_back(axis_camera(Vec3(0, 0.2, 4)));
  const std::vector<Camera> one{axis_camera(Vec3(0, 0, 4))};
  const auto r = reconstruct(s, one, 1e-9);
  CHECK((r.fitted_colors.row(0).transpose() - s.primitives[0].matte_color).norm() < 1e-6);
  CHECK(r.fitted_colors.row(1).norm() == 0.0);
  CHECK(r.eval_mse < 1e-10);
}

TEST_CASE("observation noise perturbs training images deterministically") {
  const Scene s = generate_scene(small_spec(2));
  const Compositor comp(s);
  const CameraRender r = comp.render_weights(s.candidate_cameras[0]);
  const NoiseModel noise{0.1, 5};
  const Image a = observe(s, {&r, 3}, noise);
  CHECK(a == observe(s, {&r, 3}, noise));
  CHECK_FALSE(a == observe(s, {&r, 4}, noise));
  CHECK(observe(s, {&r, 3}, NoiseModel{}) == render_color(s, r));
  // The sample standard deviation of the perturbation matches sigma.
  const Image clean = render_color(s, r);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) sq += (a.data[i] - clean.data[i]) * (a.data[i] - clean.data[i]);
  CHECK(std::sqrt(sq / a.data.size()) == doctest::Approx(0.1).epsilon(0.1));
}

TEST_CASE("training on every camera beats the seed set on noiseless scenes") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Scene s = generate_scene(small_spec(seed));
    std::vector<Camera> all = s.candidate_cameras;
    all.insert(all.end(), s.seed_cameras.begin(), s.seed_cameras.end());
    CHECK(reconstruct(s, all, 1e-6).eval_mse <= reconstruct(s, s.seed_cameras, 1e-6).eval_mse + 1e-12);
  }
}

TEST_CASE("cover picks the camera that sees unobserved geometry") {
  const Scene s = two_cluster_scene();
  const SelectionContext ctx(s, fast_options());
  SelectionState state = init_state(ctx, Method::cover, 1, 0);
  const std::vector<int> ids{0, 1};
  const auto scores = score_candidates(state, ctx, ids);
  // Cluster B was never seen: every primitive there scores 0.
  CHECK(scores[1] == 0.0);
  CHECK(scores[0] > 0.5);
  const auto sel = select_next(state, ctx);
  CHECK(sel.camera_id == 1);
  CHECK(state.pool == std::vector<int>{0});
  // Pool of one: that camera, then an empty pool.
  CHECK(select_next(state, ctx).camera_id == 0);
  CHECK(state.pool.empty());
  try {
    select_next(state, ctx);
    FAIL("selection from an empty pool");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::exhausted);
  }
}

TEST_CASE("exact FIG agrees on the two-cluster scene") {
  const Scene s = two_cluster_scene();
  const SelectionContext ctx(s, fast_options());
  SelectionState state = init_state(ctx, Method::exact_fig, 1, 0);
  const std::vector<int> ids{0, 1};
  const auto scores = score_candidates(state, ctx, ids);
  CHECK(scores[1] > scores[0]);
  CHECK(select_next(state, ctx).camera_id == 1);
}

TEST_CASE("selection protocol invariants") {
  const Scene s = generate_scene(small_spec(3, 30, 12));
  const SelectionContext ctx(s, fast_options());
  for (Method m : {Method::cover, Method::trans, Method::view, Method::exact_fig, Method::random}) {
    CAPTURE(to_string(m));
    SelectionState state = init_state(ctx, m, 3, 11);
    std::set<int> chosen;
    for (int r = 0; r < 6; ++r) {
      const std::size_t total = state.chosen.size() + state.pool.size();
      const auto pool_before = state.pool;
      const auto sel = select_next(state, ctx);
      CHECK(chosen.insert(sel.camera_id).second);
      CHECK(std::find(pool_before.begin(), pool_before.end(), sel.camera_id) != pool_before.end());
      CHECK(state.chosen.size() + state.pool.size() == total);
      CHECK(std::find(state.pool.begin(), state.pool.end(), sel.camera_id) == state.pool.end());
    }
  }
}

TEST_CASE("cover scores saturate after absorbing the chosen camera") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Scene s = generate_scene(small_spec(seed, 40, 12));
    const SelectionContext ctx(s, fast_options());
    SelectionState state = init_state(ctx, Method::cover, 3, seed);
    for (int r = 0; r < 5; ++r) {
      const auto sel = select_next(state, ctx);
      const std::vector<int> id{sel.camera_id};
      CHECK(score_candidates(state, ctx, id)[0] >= sel.score);
    }
  }
}

TEST_CASE("scores do not depend on the worker count") {
  const Scene s = generate_scene(small_spec(4, 40, 12));
  SelectionOptions one = fast_options(), many = fast_options();
  many.jobs = 4;
  const SelectionContext a(s, one), b(s, many);
  std::vector<int> ids(12);
  std::iota(ids.begin(), ids.end(), 0);
  for (Method m : {Method::cover, Method::trans, Method::view, Method::exact_fig}) {
    const auto sa = init_state(a, m, 3, 0);
    const auto sb = init_state(b, m, 3, 0);
    CHECK(score_candidates(sa, a, ids) == score_candidates(sb, b, ids));
  }
}

TEST_CASE("fixed runs") {
  const Scene s = generate_scene(small_spec(5, 30, 10));
  const SelectionContext ctx(s, fast_options());
  CHECK(run_fixed(ctx, Method::cover, 0, 3, 0).report.rows.size() == 1);
  CHECK_THROWS_AS(run_fixed(ctx, Method::cover, 11, 3, 0), Error);
  const auto a = run_fixed(ctx, Method::random, 6, 3, 42);
  const auto b = run_fixed(ctx, Method::random, 6, 3, 42);
  CHECK(curve_csv(a.report) == curve_csv(b.report));
  CHECK(a.report.rows.size() == 7);
  CHECK(ids_of(run_fixed(ctx, Method::random, 6, 3, 43).report) != ids_of(a.report));
  const auto ex = run_fixed(ctx, Method::exact_fig, 4, 3, 0);
  CHECK(ex.report.rows.size() == 5);
}

TEST_CASE("embodied runs") {
  const Scene s = generate_scene(small_spec(6, 30, 10));
  const SelectionContext ctx(s, fast_options());
  SUBCASE("k at least the pool size matches the fixed protocol") {
    for (Method m : {Method::cover, Method::random}) {
      const auto fixed = run_fixed(ctx, m, 6, 3, 9);
      const auto emb = run_embodied(ctx, m, 6, 10, s.seed_cameras[0], 3, 9);
      CHECK(ids_of(fixed.report) == ids_of(emb.report));
    }
  }
  SUBCASE("k = 1 is a nearest-neighbour walk") {
    const auto emb = run_embodied(ctx, Method::cover, 5, 1, s.seed_cameras[0], 3, 0);
    Vec3 pos = s.seed_cameras[0].position;
    std::set<int> used;
    for (int id : ids_of(emb.report)) {
      int best = -1;
      for (int c = 0; c < 10; ++c) {
        if (used.count(c)) continue;
        if (best < 0 || (s.candidate_cameras[c].position - pos).norm() <
                            (s.candidate_cameras[best].position - pos).norm())
          best = c;
      }
      CHECK(id == best);
      used.insert(id);
      pos = s.candidate_cameras[id].position;
    }
  }
  SUBCASE("running out of candidates stops early and is flagged") {
    const auto emb = run_embodied(ctx, Method::trans, 15, 5, s.seed_cameras[0], 3, 0);
    CHECK(emb.report.exhausted);
    CHECK(emb.report.rows.size() == 11);
  }
  SUBCASE("bad k") { CHECK_THROWS_AS(run_embodied(ctx, Method::cover, 2, 0, s.seed_cameras[0], 3, 0), Error); }
}

TEST_CASE("pose refinement") {
  const Scene s = generate_scene(small_spec(7, 40, 8));
  const Compositor comp(s);
  CoverageGrids grids(DirectionGrid::icosphere(1), s.primitive_count());
  observe_coverage(grids, visible_primitives(s, comp.render_weights(s.seed_cameras[0]), true));
  const Camera root = s.candidate_cameras[0];

  RefineOptions zero;
  zero.steps = 0;
  const auto same = refine_pose(comp, grids, root, zero);
  CHECK(same.camera.position == root.position);
  CHECK(same.camera.rotation.coeffs() == root.rotation.coeffs());

  RefineOptions opts;
  opts.steps = 10;
  const auto r = refine_pose(comp, grids, root, opts);
  REQUIRE(r.best_history.size() == 10);
  for (std::size_t i = 1; i < r.best_history.size(); ++i) CHECK(r.best_history[i] <= r.best_history[i - 1]);
  CHECK(r.best_score <= score_coverage(s, grids, root, 0.0, opts.mask_alpha).mean_score);
  CHECK(r.best_score == doctest::Approx(score_coverage(s, grids, r.camera, 0.0, opts.mask_alpha).mean_score));

  // Everything seen from everywhere and a white background: flat objective.
  CoverageGrids full = grids;
  std::fill(full.raw().begin(), full.raw().end(), std::uint8_t{1});
  RefineOptions flat;
  flat.steps = 5;
  flat.background = 1.0;
  const auto f = refine_pose(comp, full, root, flat);
  CHECK((f.camera.position - root.position).norm() <= flat.lr_position + 1e-12);
  CHECK(f.camera.rotation.angularDistance(root.rotation) <= flat.lr_rotation + 1e-12);
}

TEST_CASE("refined runs add extra training cameras") {
  const Scene s = generate_scene(small_spec(8, 30, 8));
  const SelectionContext ctx(s, fast_options());
  RefineOptions opts;
  opts.steps = 2;
  const auto run = run_fixed(ctx, Method::cover, 3, 3, 0, opts);
  CHECK(run.report.refined);
  CHECK(run.state.extra_cameras.size() == 3);
}

TEST_CASE("AUC delta") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 3, 4, 5};
  CHECK(auc_delta(a, a) == 0.0);
  CHECK(auc_delta(b, a) == doctest::Approx(1.0));
  CHECK(auc_delta(a, b) == doctest::Approx(-1.0));
  // Triangle: difference grows linearly from 0 to 2 over two rounds.
  const std::vector<double> c{0, 1, 2}, z{0, 0, 0};
  CHECK(auc_delta(c, z) == doctest::Approx(1.0));
  CHECK_THROWS_AS(auc_delta(a, c), Error);
}

TEST_CASE("curve CSV, chosen JSON and checkpoint round trips") {
  const Scene s = generate_scene(small_spec(9, 30, 10));
  const SelectionContext ctx(s, fast_options());
  const auto run = run_fixed(ctx, Method::cover, 4, 3, 1);

  const auto csv = temp_path("cover_curve.csv");
  write_curve_csv(run.report, csv);
  const auto rows = read_curve_csv(csv);
  REQUIRE(rows.size() == run.report.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].round == run.report.rows[i].round);
    CHECK(rows[i].camera_id == run.report.rows[i].camera_id);
    CHECK(rows[i].eval_psnr == run.report.rows[i].eval_psnr);
    CHECK(rows[i].eval_mse == run.report.rows[i].eval_mse);
  }
  CHECK(curve_csv(run.report).rfind("round,camera_id,score,eval_mse,eval_psnr\n", 0) == 0);

  const auto chosen = nlohmann::json::parse(chosen_json(run.state));
  CHECK(chosen.at("chosen").get<std::vector<int>>() == run.state.chosen);

  const auto ckpt = temp_path("cover_state.bin");
  save_checkpoint(run.state, ckpt);
  const SelectionState back = load_checkpoint(ckpt);
  CHECK(back.chosen == run.state.chosen);
  CHECK(back.pool == run.state.pool);
  CHECK(back.seed_ids == run.state.seed_ids);
  CHECK(back.coverage == run.state.coverage);
  CHECK(back.trans == run.state.trans);
  CHECK(back.view == run.state.view);
  CHECK(back.gram.gram() == run.state.gram.gram());
  CHECK(back.log.size() == run.state.log.size());

  // Resuming from the checkpoint continues exactly like an uninterrupted run.
  for (Method m : {Method::cover, Method::random}) {
    const auto part = run_fixed(ctx, m, 2, 3, 5);
    save_checkpoint(part.state, ckpt);
    SelectionState resumed = load_checkpoint(ckpt);
    continue_fixed(resumed, ctx, 3);
    const auto whole = run_fixed(ctx, m, 5, 3, 5);
    CHECK(resumed.chosen == whole.state.chosen);
    REQUIRE(resumed.log.size() == whole.state.log.size());
    CHECK(resumed.log.back().eval_psnr == whole.state.log.back().eval_psnr);
  }

  CHECK_THROWS_AS(load_checkpoint(csv), Error);
  CHECK_THROWS_AS(read_curve_csv(ckpt), Error);
  std::filesystem::remove(csv);
  std::filesystem::remove(ckpt);
}
