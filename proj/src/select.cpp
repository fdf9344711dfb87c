#include "cover/select.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cover/error.hpp"
#include "cover/parallel.hpp"

namespace cover {

const char* to_string(Method m) {
  switch (m) {
    case Method::cover: return "cover";
    case Method::trans: return "trans";
    case Method::view: return "view";
    case Method::exact_fig: return "exact_fig";
    case Method::random: return "random";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::cover, Method::trans, Method::view, Method::exact_fig, Method::random})
    if (name == to_string(m)) return m;
  fail(Errc::invalid_argument,
       "unknown method '" + name + "' (expected cover, trans, view, exact_fig or random)");
}

SelectionContext::SelectionContext(const Scene& scene, SelectionOptions options)
    : scene_(&scene),
      options_(options),
      compositor_(scene),
      grid_(DirectionGrid::with_size(options.grid_size)),
      kernel_(make_kernel(options.kappa, options.grid_size)) {
  require(options_.pixel_stride >= 1 && options_.oracle_stride >= 1, Errc::invalid_argument,
          "pixel strides must be >= 1");
  require(options_.ridge >= 0.0, Errc::invalid_argument, "ridge must be >= 0");
  require(options_.observation_noise >= 0.0, Errc::invalid_argument,
          "observation noise must be >= 0");
  require(options_.background == 0.0 || options_.background == 1.0, Errc::invalid_argument,
          "background must be 0 or 1");
  const int jobs = options_.jobs;
  auto render_all = [&](const std::vector<Camera>& cams, int stride) {
    std::vector<CameraRender> out(cams.size());
    parallel_for(cams.size(), jobs,
                 [&](std::size_t i) { out[i] = compositor_.render_weights(cams[i], stride); });
    return out;
  };
  candidates_ = render_all(scene.candidate_cameras, options_.pixel_stride);
  seeds_ = render_all(scene.seed_cameras, options_.pixel_stride);
  evals_ = render_all(scene.eval_cameras, 1);
  eval_truth_.resize(evals_.size());
  parallel_for(evals_.size(), jobs,
               [&](std::size_t i) { eval_truth_[i] = render_color(scene, evals_[i]); });
}

// ---------------------------------------------------------------------------
// Reconstruction

double psnr_from_mse(double mse) { return -10.0 * std::log10(std::max(mse, 1e-10)); }

Image observe(const Scene& scene, const TrainingView& view, const NoiseModel& noise) {
  Image img = render_color(scene, *view.render);
  if (noise.sigma > 0.0) {
    Rng rng(noise.seed ^ (0x9e3779b97f4a7c15ULL * (view.noise_key + 1)));
    for (double& v : img.data) v += noise.sigma * rng.normal();
  }
  return img;
}

ReconstructionResult reconstruct(const Scene& scene, std::span<const TrainingView> training,
                                 std::span<const CameraRender> eval,
                                 std::span<const Image> eval_truth, double ridge,
                                 const NoiseModel& noise) {
  require(!training.empty(), Errc::invalid_argument, "reconstruction needs at least one camera");
  require(ridge >= 0.0, Errc::invalid_argument, "ridge must be >= 0");
  require(eval.size() == eval_truth.size(), Errc::dimension_mismatch,
          "eval renders and truth images differ in count");
  const int n = scene.primitive_count();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixX3d rhs = Eigen::MatrixX3d::Zero(n, 3);

  struct Observation {
    WeightRow row;
    Vec3 target;
  };
  std::vector<Observation> observations;
  for (const auto& view : training) {
    const CameraRender* render = view.render;
    const Image truth = observe(scene, view, noise);
    for (const auto& px : render->pixels) {
      if (px.row.empty()) continue;
      Observation obs{px.row, Vec3::Zero()};
      for (int c = 0; c < 3; ++c) obs.target[c] = truth.at(px.pixel, c);
      const auto& r = obs.row;
      for (std::size_t a = 0; a < r.size(); ++a) {
        for (std::size_t b = 0; b < r.size(); ++b)
          normal(r.indices[a], r.indices[b]) += r.weights[a] * r.weights[b];
        rhs.row(r.indices[a]) += r.weights[a] * obs.target.transpose();
      }
      observations.push_back(std::move(obs));
    }
  }

  Eigen::MatrixX3d solution;
  if (ridge > 0.0) {
    normal.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() == Eigen::Success) {
      solution = llt.solve(rhs);
    } else {
      solution = normal.ldlt().solve(rhs);
    }
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(normal);
    cod.setThreshold(1e-12);
    solution = cod.solve(rhs);
  }

  ReconstructionResult out;
  out.fitted_colors = solution.cwiseMax(0.0).cwiseMin(1.0);

  double sq = 0.0;
  for (const auto& obs : observations) {
    Vec3 pred = Vec3::Zero();
    for (std::size_t k = 0; k < obs.row.size(); ++k)
      pred += obs.row.weights[k] * out.fitted_colors.row(obs.row.indices[k]).transpose();
    sq += (pred - obs.target).squaredNorm();
  }
  out.train_residual =
      observations.empty() ? 0.0 : std::sqrt(sq / (3.0 * static_cast<double>(observations.size())));

  double err = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < eval.size(); ++e) {
    const Image pred = render_with_colors(eval[e], out.fitted_colors);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const double d = pred.data[i] - eval_truth[e].data[i];
      err += d * d;
    }
    count += pred.data.size();
  }
  out.eval_mse = count == 0 ? 0.0 : err / static_cast<double>(count);
  out.eval_psnr = psnr_from_mse(out.eval_mse);
  return out;
}

ReconstructionResult reconstruct(const Scene& scene, std::span<const Camera> cameras,
                                 double ridge) {
  require(!cameras.empty(), Errc::invalid_argument, "reconstruction needs at least one camera");
  const Compositor comp(scene);
  std::vector<CameraRender> train;
  for (const auto& c : cameras) train.push_back(comp.render_weights(c));
  std::vector<TrainingView> views;
  for (std::size_t i = 0; i < train.size(); ++i) views.push_back({&train[i], i});
  std::vector<CameraRender> eval;
  std::vector<Image> truth;
  for (const auto& c : scene.eval_cameras) {
    eval.push_back(comp.render_weights(c));
    truth.push_back(render_color(scene, eval.back()));
  }
  return reconstruct(scene, views, eval, truth, ridge);
}

std::vector<double> CurveReport::psnr_curve() const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.eval_psnr);
  return out;
}

// ---------------------------------------------------------------------------
// Selection state

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool oracle_pixel(const PixelRow& px, const SelectionContext& ctx) {
  return px.pixel % (ctx.options().pixel_stride * ctx.options().oracle_stride) == 0;
}

void log_point(SelectionState& state, const SelectionContext& ctx, int camera_id,
               double score) {
  const auto rec = reconstruct_state(state, ctx);
  state.log.push_back({static_cast<int>(state.log.size()), camera_id, score, rec.eval_mse,
                       rec.eval_psnr});
}

double score_one(const SelectionState& state, const SelectionContext& ctx,
                 const CameraRender& render, const FigScorer* fig_scorer) {
  switch (state.method) {
    case Method::cover:
      return score_coverage(ctx.scene(), state.coverage, render, ctx.options().background,
                            ctx.options().mask_alpha)
          .mean_score;
    case Method::trans:
    case Method::view: {
      double sum = 0.0;
      int n = 0;
      for (const auto& px : render.pixels) {
        if (px.row.empty()) continue;
        const WeightRow unit = normalize_row(px.row, NormMode::unit_l2);
        if (state.method == Method::trans) {
          sum += score_trans(state.trans, unit);
        } else {
          const auto beta = kernel_weights(ctx.kernel(), ctx.grid(), px.direction);
          sum += score_view_shared(state.view, unit, beta);
        }
        ++n;
      }
      return n == 0 ? std::numeric_limits<double>::infinity() : sum / n;
    }
    case Method::exact_fig: {
      double sum = 0.0;
      int n = 0;
      for (const auto& px : render.pixels) {
        if (px.row.empty() || !oracle_pixel(px, ctx)) continue;
        sum += fig_scorer->row_fig(normalize_row(px.row, NormMode::unit_l2));
        ++n;
      }
      return n == 0 ? 0.0 : sum / n;
    }
    case Method::random:
      return 0.0;
  }
  return 0.0;
}

void take(SelectionState& state, const SelectionContext& ctx, int id) {
  const auto it = std::find(state.pool.begin(), state.pool.end(), id);
  require(it != state.pool.end(), Errc::invalid_argument,
          "camera " + std::to_string(id) + " is not in the pool");
  state.pool.erase(it);
  state.chosen.push_back(id);
  const auto& render = ctx.candidate_render(id);
  absorb(state, ctx, render);
  state.current_position = render.camera.position;
}

void apply_refine(SelectionState& state, const SelectionContext& ctx, int root_id,
                  const RefineOptions& options) {
  const auto result = refine_pose(ctx.compositor(), state.coverage,
                                  ctx.candidate_render(root_id).camera, options);
  const auto render = ctx.compositor().render_weights(result.camera, ctx.options().pixel_stride);
  absorb(state, ctx, render);
  state.extra_cameras.push_back(result.camera);
}

}  // namespace

SelectionState init_state(const SelectionContext& ctx, Method method, int seed_count,
                          std::uint64_t rng_seed) {
  const Scene& scene = ctx.scene();
  require(seed_count >= 0 && seed_count <= static_cast<int>(scene.seed_cameras.size()),
          Errc::invalid_argument,
          "seed count must be in [0, " + std::to_string(scene.seed_cameras.size()) + "]");
  SelectionState s;
  s.method = method;
  s.rng_seed = rng_seed;
  s.rng = Rng(rng_seed);
  const int n = scene.primitive_count();
  s.trans = TransAccumulator(n);
  s.view = ViewAccumulator(n, ctx.grid().size());
  s.coverage = CoverageGrids(ctx.grid(), n);
  s.gram = GramAccumulator(n);
  for (int i = 0; i < ctx.candidate_count(); ++i) s.pool.push_back(i);
  if (!scene.seed_cameras.empty()) s.current_position = scene.seed_cameras.front().position;
  for (int i = 0; i < seed_count; ++i) {
    s.seed_ids.push_back(i);
    absorb(s, ctx, ctx.seed_render(i));
  }
  log_point(s, ctx, -1, kNaN);
  return s;
}

void absorb(SelectionState& state, const SelectionContext& ctx, const CameraRender& render) {
  for (const auto& px : render.pixels) {
    if (px.row.empty()) continue;
    const WeightRow unit = normalize_row(px.row, NormMode::unit_l2);
    update_trans(state.trans, unit);
    update_view_shared(state.view, unit, kernel_weights(ctx.kernel(), ctx.grid(), px.direction));
    if (oracle_pixel(px, ctx)) state.gram.add_row(unit);
  }
  const auto visible = visible_primitives(ctx.scene(), render, ctx.options().occlusion_aware,
                                          ctx.options().visibility_cutoff);
  observe_coverage(state.coverage, visible);
}

std::vector<double> score_candidates(const SelectionState& state, const SelectionContext& ctx,
                                     std::span<const int> ids) {
  std::optional<FigScorer> scorer;
  if (state.method == Method::exact_fig) scorer.emplace(state.gram.regularized(ctx.options().ridge));
  std::vector<double> scores(ids.size());
  parallel_for(ids.size(), ctx.options().jobs, [&](std::size_t i) {
    scores[i] = score_one(state, ctx, ctx.candidate_render(ids[i]),
                          scorer ? &*scorer : nullptr);
  });
  return scores;
}

Selection select_among(SelectionState& state, const SelectionContext& ctx,
                       std::span<const int> eligible) {
  require(!eligible.empty(), Errc::exhausted, "no eligible candidate cameras left");
  Selection sel;
  if (state.method == Method::random) {
    sel.camera_id = eligible[state.rng.below(eligible.size())];
    sel.score = kNaN;
  } else {
    const auto scores = score_candidates(state, ctx, eligible);
    const bool maximize = state.method == Method::exact_fig;
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      const bool better = maximize ? scores[i] > scores[best] : scores[i] < scores[best];
      if (better || (scores[i] == scores[best] && eligible[i] < eligible[best])) best = i;
    }
    sel.camera_id = eligible[best];
    sel.score = scores[best];
  }
  take(state, ctx, sel.camera_id);
  return sel;
}

Selection select_next(SelectionState& state, const SelectionContext& ctx) {
  const std::vector<int> pool = state.pool;
  return select_among(state, ctx, pool);
}

std::vector<CameraRender> training_extras(const SelectionState& state,
                                          const SelectionContext& ctx) {
  std::vector<CameraRender> out;
  for (const auto& cam : state.extra_cameras)
    out.push_back(ctx.compositor().render_weights(cam, ctx.options().pixel_stride));
  return out;
}

ReconstructionResult reconstruct_state(const SelectionState& state, const SelectionContext& ctx) {
  const auto extras = training_extras(state, ctx);
  // Noise keys: candidates use their id, seeds and refined poses get
  // disjoint offsets so every camera has a fixed noise realization.
  std::vector<TrainingView> train;
  for (int id : state.seed_ids) train.push_back({&ctx.seed_render(id), (1ULL << 32) + id});
  for (int id : state.chosen) train.push_back({&ctx.candidate_render(id), std::uint64_t(id)});
  for (std::size_t i = 0; i < extras.size(); ++i) train.push_back({&extras[i], (2ULL << 32) + i});
  if (train.empty()) {
    // Nothing observed yet: every color stays at the zero prior.
    ReconstructionResult out;
    out.fitted_colors = Eigen::MatrixX3d::Zero(ctx.scene().primitive_count(), 3);
    double err = 0.0;
    std::size_t count = 0;
    for (const auto& img : ctx.eval_truth()) {
      for (double v : img.data) err += v * v;
      count += img.data.size();
    }
    out.eval_mse = count == 0 ? 0.0 : err / static_cast<double>(count);
    out.eval_psnr = psnr_from_mse(out.eval_mse);
    return out;
  }
  return reconstruct(ctx.scene(), train, ctx.eval_renders(), ctx.eval_truth(),
                     ctx.options().ridge, {ctx.options().observation_noise, state.rng_seed});
}

// ---------------------------------------------------------------------------
// Pose refinement

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

Camera perturb(const Camera& root, const Vec6& x) {
  Camera cam = root;
  cam.position = root.position + x.head<3>();
  const Vec3 w = x.tail<3>();
  const double angle = w.norm();
  if (angle > 0.0)
    cam.rotation = (root.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle)))
                       .normalized();
  return cam;
}

Vec6 clamp_block(Vec6 step, double max_position, double max_rotation) {
  const double np = step.head<3>().norm();
  if (np > max_position) step.head<3>() *= max_position / np;
  const double nr = step.tail<3>().norm();
  if (nr > max_rotation) step.tail<3>() *= max_rotation / nr;
  return step;
}

}  // namespace

RefineResult refine_pose(const Compositor& compositor, const CoverageGrids& grids,
                         const Camera& root, const RefineOptions& options) {
  require(options.steps >= 0, Errc::invalid_argument, "refine steps must be >= 0");
  require(options.fd_position > 0.0 && options.fd_rotation > 0.0, Errc::invalid_argument,
          "finite-difference steps must be positive");
  const Scene& scene = compositor.scene();
  auto objective = [&](const Vec6& x) {
    return score_coverage(scene, grids, compositor.render_weights(perturb(root, x)),
                          options.background, options.mask_alpha)
        .mean_score;
  };

  RefineResult out;
  out.camera = root;
  if (options.steps == 0) {
    out.best_score = objective(Vec6::Zero());
    return out;
  }

  Vec6 x = Vec6::Zero();
  Vec6 best_x = x;
  double best = objective(x);
  for (int step = 0; step < options.steps; ++step) {
    Vec6 grad;
    for (int p = 0; p < 6; ++p) {
      const double h = p < 3 ? options.fd_position : options.fd_rotation;
      Vec6 e = Vec6::Zero();
      e[p] = h;
      grad[p] = (objective(x + e) - objective(x - e)) / (2.0 * h);
    }
    Vec6 delta;
    delta.head<3>() = -options.lr_position * grad.head<3>();
    delta.tail<3>() = -options.lr_rotation * grad.tail<3>();
    x += clamp_block(delta, options.lr_position, options.lr_rotation);
    const double value = objective(x);
    if (value < best) {
      best = value;
      best_x = x;
    }
    out.best_history.push_back(best);
  }
  out.camera = perturb(root, best_x);
  out.best_score = best;
  return out;
}

RefineResult refine_pose(const Scene& scene, const CoverageGrids& grids, const Camera& root,
                         const RefineOptions& options) {
  return refine_pose(Compositor(scene), grids, root, options);
}

// ---------------------------------------------------------------------------
// Runs

void continue_fixed(SelectionState& state, const SelectionContext& ctx, int rounds,
                    const std::optional<RefineOptions>& refine) {
  require(rounds >= 0, Errc::invalid_argument, "rounds must be >= 0");
  require(rounds <= static_cast<int>(state.pool.size()), Errc::invalid_argument,
          "rounds (" + std::to_string(rounds) + ") exceed the candidate pool size (" +
              std::to_string(state.pool.size()) + ")");
  for (int r = 0; r < rounds; ++r) {
    const auto sel = select_next(state, ctx);
    if (refine) apply_refine(state, ctx, sel.camera_id, *refine);
    log_point(state, ctx, sel.camera_id, sel.score);
  }
}

RunResult run_fixed(const SelectionContext& ctx, Method method, int rounds, int seed_count,
                    std::uint64_t rng_seed, const std::optional<RefineOptions>& refine) {
  require(rounds >= 0 && rounds <= ctx.candidate_count(), Errc::invalid_argument,
          "rounds must be in [0, " + std::to_string(ctx.candidate_count()) + "]");
  RunResult out{CurveReport{}, init_state(ctx, method, seed_count, rng_seed)};
  continue_fixed(out.state, ctx, rounds, refine);
  out.report.method = method;
  out.report.rows = out.state.log;
  out.report.refined = refine.has_value();
  return out;
}

RunResult run_embodied(const SelectionContext& ctx, Method method, int rounds, int k,
                       const Camera& start, int seed_count, std::uint64_t rng_seed,
                       const std::optional<RefineOptions>& refine) {
  require(k >= 1, Errc::invalid_argument, "k must be >= 1");
  require(rounds >= 0, Errc::invalid_argument, "rounds must be >= 0");
  require(ctx.candidate_count() > 0, Errc::exhausted, "candidate pool is empty");
  RunResult out{CurveReport{}, init_state(ctx, method, seed_count, rng_seed)};
  SelectionState& state = out.state;
  state.current_position = start.position;
  for (int r = 0; r < rounds; ++r) {
    if (state.pool.empty()) {
      out.report.exhausted = true;
      break;
    }
    std::vector<std::pair<double, int>> by_distance;
    for (int id : state.pool)
      by_distance.emplace_back(
          (ctx.candidate_render(id).camera.position - state.current_position).norm(), id);
    std::sort(by_distance.begin(), by_distance.end());
    const std::size_t take_n = std::min<std::size_t>(static_cast<std::size_t>(k), by_distance.size());
    std::vector<int> eligible;
    for (std::size_t i = 0; i < take_n; ++i) eligible.push_back(by_distance[i].second);
    std::sort(eligible.begin(), eligible.end());
    const auto sel = select_among(state, ctx, eligible);
    if (refine) apply_refine(state, ctx, sel.camera_id, *refine);
    log_point(state, ctx, sel.camera_id, sel.score);
  }
  out.report.method = method;
  out.report.rows = state.log;
  out.report.refined = refine.has_value();
  return out;
}

double auc_delta(std::span<const double> method_curve, std::span<const double> random_curve) {
  require(method_curve.size() == random_curve.size(), Errc::dimension_mismatch,
          "curves must have the same number of rounds");
  require(!method_curve.empty(), Errc::invalid_argument, "curves are empty");
  const std::size_t n = method_curve.size();
  if (n == 1) return method_curve[0] - random_curve[0];
  double area = 0.0;
  for (std::size_t r = 1; r < n; ++r) {
    const double a = method_curve[r - 1] - random_curve[r - 1];
    const double b = method_curve[r] - random_curve[r];
    area += 0.5 * (a + b);
  }
  return area / static_cast<double>(n - 1);
}

// ---------------------------------------------------------------------------
// Files

namespace {

constexpr const char* kCurveHeader = "round,camera_id,score,eval_mse,eval_psnr";

}  // namespace

std::string curve_csv(const CurveReport& report) {
  std::string out = std::string(kCurveHeader) + "\n";
  char line[256];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%.17g\n", r.round, r.camera_id, r.score,
                  r.eval_mse, r.eval_psnr);
    out += line;
  }
  return out;
}

void write_curve_csv(const CurveReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  out << curve_csv(report);
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

std::vector<StepRecord> read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kCurveHeader, Errc::format,
          path + ": missing curve header");
  std::vector<StepRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == 5, Errc::format, path + ": expected 5 columns: " + line);
    try {
      rows.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::strtod(cells[2].c_str(), nullptr),
                      std::stod(cells[3]), std::stod(cells[4])});
    } catch (const std::exception&) {
      fail(Errc::format, path + ": bad row: " + line);
    }
  }
  return rows;
}

std::string chosen_json(const SelectionState& state) {
  nlohmann::json j;
  j["method"] = to_string(state.method);
  j["rng_seed"] = state.rng_seed;
  j["seed_cameras"] = state.seed_ids;
  j["chosen"] = state.chosen;
  j["refined_cameras"] = nlohmann::json::array();
  for (const auto& c : state.extra_cameras) j["refined_cameras"].push_back(camera_to_json(c));
  return j.dump(2) + "\n";
}

namespace {

constexpr char kMagic[8] = {'C', 'O', 'V', 'E', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <class T>
  void pod(const T& v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void doubles(const double* p, std::size_t n) {
    os_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void ints(const std::vector<int>& v) {
    pod<std::uint64_t>(v.size());
    for (int x : v) pod<std::int32_t>(x);
  }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <class T>
  T pod() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  void doubles(double* p, std::size_t n) {
    is_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    check();
  }
  std::uint64_t count(std::uint64_t limit) {
    const auto n = pod<std::uint64_t>();
    require(n <= limit, Errc::format, "checkpoint length field out of range");
    return n;
  }
  std::vector<int> ints() {
    std::vector<int> v(count(1u << 24));
    for (int& x : v) x = pod<std::int32_t>();
    return v;
  }
  std::string string() {
    std::string s(count(1u << 24), '\0');
    is_.read(s.data(), static_cast<std::streamsize>(s.size()));
    check();
    return s;
  }

 private:
  void check() { require(static_cast<bool>(is_), Errc::format, "truncated checkpoint"); }
  std::istream& is_;
};

void write_camera(Writer& w, const Camera& c) {
  const auto& k = c.intrinsics;
  for (double v : {k.fx, k.fy, k.cx, k.cy}) w.pod(v);
  w.pod<std::int32_t>(k.width);
  w.pod<std::int32_t>(k.height);
  for (double v : {c.rotation.w(), c.rotation.x(), c.rotation.y(), c.rotation.z()}) w.pod(v);
  w.doubles(c.position.data(), 3);
}

Camera read_camera(Reader& r) {
  Camera c;
  c.intrinsics.fx = r.pod<double>();
  c.intrinsics.fy = r.pod<double>();
  c.intrinsics.cx = r.pod<double>();
  c.intrinsics.cy = r.pod<double>();
  c.intrinsics.width = r.pod<std::int32_t>();
  c.intrinsics.height = r.pod<std::int32_t>();
  const double qw = r.pod<double>(), qx = r.pod<double>(), qy = r.pod<double>(),
               qz = r.pod<double>();
  c.rotation = Eigen::Quaterniond(qw, qx, qy, qz);
  r.doubles(c.position.data(), 3);
  c.validate();
  return c;
}

}  // namespace

void save_checkpoint(const SelectionState& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod<std::uint8_t>(static_cast<std::uint8_t>(s.method));
  w.pod<std::uint64_t>(s.rng_seed);
  w.string(s.rng.state());
  w.ints(s.seed_ids);
  w.ints(s.chosen);
  w.ints(s.pool);
  w.pod<std::uint64_t>(s.extra_cameras.size());
  for (const auto& c : s.extra_cameras) write_camera(w, c);
  w.doubles(s.current_position.data(), 3);

  const int n = s.coverage.primitive_count();
  const int l = s.coverage.patch_count();
  w.pod<std::int32_t>(n);
  w.pod<std::int32_t>(l);
  for (int p = 0; p < l; ++p) w.doubles(s.coverage.grid().direction(p).data(), 3);
  out.write(reinterpret_cast<const char*>(s.coverage.raw().data()),
            static_cast<std::streamsize>(s.coverage.raw().size()));
  w.doubles(s.trans.col_sq_norms.data(), static_cast<std::size_t>(n));
  w.doubles(s.view.patch_sq_norms.data(), static_cast<std::size_t>(n) * l);
  w.doubles(s.gram.gram().data(), static_cast<std::size_t>(n) * n);

  w.pod<std::uint64_t>(s.log.size());
  for (const auto& r : s.log) {
    w.pod<std::int32_t>(r.round);
    w.pod<std::int32_t>(r.camera_id);
    for (double v : {r.score, r.eval_mse, r.eval_psnr}) w.pod(v);
  }
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

SelectionState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open: " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  require(static_cast<bool>(in) && std::memcmp(magic, kMagic, sizeof kMagic) == 0, Errc::format,
          path + ": not a selection checkpoint");
  Reader r(in);
  require(r.pod<std::uint32_t>() == kCheckpointVersion, Errc::format,
          path + ": unsupported checkpoint version");
  SelectionState s;
  const auto method = r.pod<std::uint8_t>();
  require(method <= static_cast<std::uint8_t>(Method::random), Errc::format, "bad method tag");
  s.method = static_cast<Method>(method);
  s.rng_seed = r.pod<std::uint64_t>();
  s.rng.set_state(r.string());
  s.seed_ids = r.ints();
  s.chosen = r.ints();
  s.pool = r.ints();
  const auto n_extra = r.count(1u << 20);
  for (std::uint64_t i = 0; i < n_extra; ++i) s.extra_cameras.push_back(read_camera(r));
  r.doubles(s.current_position.data(), 3);

  const int n = r.pod<std::int32_t>();
  const int l = r.pod<std::int32_t>();
  require(n >= 1 && l >= 1 && n <= (1 << 20) && l <= (1 << 16), Errc::format,
          "bad checkpoint dimensions");
  std::vector<Eigen::Vector3d> dirs(static_cast<std::size_t>(l));
  for (auto& d : dirs) r.doubles(d.data(), 3);
  DirectionGrid grid = DirectionGrid::with_size(l);
  require(grid.directions() == dirs, Errc::format, "checkpoint direction grid mismatch");
  s.coverage = CoverageGrids(std::move(grid), n);
  in.read(reinterpret_cast<char*>(s.coverage.raw().data()),
          static_cast<std::streamsize>(s.coverage.raw().size()));
  s.trans = TransAccumulator(n);
  r.doubles(s.trans.col_sq_norms.data(), static_cast<std::size_t>(n));
  s.view = ViewAccumulator(n, l);
  r.doubles(s.view.patch_sq_norms.data(), static_cast<std::size_t>(n) * l);
  s.gram = GramAccumulator(n);
  r.doubles(s.gram.mutable_gram().data(), static_cast<std::size_t>(n) * n);

  const auto n_log = r.count(1u << 24);
  for (std::uint64_t i = 0; i < n_log; ++i) {
    StepRecord rec;
    rec.round = r.pod<std::int32_t>();
    rec.camera_id = r.pod<std::int32_t>();
    rec.score = r.pod<double>();
    rec.eval_mse = r.pod<double>();
    rec.eval_psnr = r.pod<double>();
    s.log.push_back(rec);
  }
  return s;
}

}  // namespace cover
