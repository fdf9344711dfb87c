#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cover/error.hpp"
#include "cover/metrics.hpp"
#include "cover/raster.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cover::cli {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open for writing: " + path);
  out << text;
  require(static_cast<bool>(out), Errc::io, "write failed: " + path);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, Errc::invalid_argument, msg); };
  parse_method(method);
  check(rounds >= -1, "rounds must be >= 0 (or -1 for half the pool)");
  check(seed_count >= 0, "seed_count must be >= 0");
  check(k >= 1, "k must be >= 1");
  check(start >= 0, "start must be >= 0");
  check(refine_steps >= 0, "refine_steps must be >= 0");
  check(L >= 1, "L must be >= 1");
  check(kappa >= 0.0, "kappa must be >= 0");
  check(ridge >= 0.0, "ridge must be >= 0");
  check(pixel_stride >= 1 && oracle_stride >= 1, "strides must be >= 1");
  check(background == 0.0 || background == 1.0, "background must be 0 or 1");
  check(mask_alpha >= 0.0 && mask_alpha <= 1.0, "mask_alpha must lie in [0, 1]");
  check(observation_noise >= 0.0, "observation_noise must be >= 0");
  check(jobs >= 0, "jobs must be >= 0");
  check(!output_dir.empty(), "output_dir must not be empty");
}

json to_json(const RunConfig& c) {
  json j;
  if (c.scene_file.empty())
    j["generate"] = scene_spec_to_json(c.generate);
  else
    j["scene_file"] = c.scene_file;
  j["method"] = c.method;
  j["rounds"] = c.rounds;
  j["seed_count"] = c.seed_count;
  j["rng_seed"] = c.rng_seed;
  j["embodied"] = c.embodied;
  j["k"] = c.k;
  j["start"] = c.start;
  j["refine"] = c.refine;
  j["refine_steps"] = c.refine_steps;
  j["L"] = c.L;
  j["kappa"] = c.kappa;
  j["ridge"] = c.ridge;
  j["pixel_stride"] = c.pixel_stride;
  j["oracle_stride"] = c.oracle_stride;
  j["background"] = c.background;
  j["mask_alpha"] = c.mask_alpha;
  j["observation_noise"] = c.observation_noise;
  j["jobs"] = c.jobs;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig run_config_from_json(const json& in) {
  require(in.is_object(), Errc::format, "run config must be a JSON object");
  const json& j = in.contains("config") && in.contains("format_version") ? in.at("config") : in;
  if (&j != &in)
    require(in.at("format_version") == kManifestVersion, Errc::format,
            "unsupported manifest format_version");
  require(j.is_object(), Errc::format, "run config must be a JSON object");

  RunConfig c;
  using Setter = std::function<void(const json&)>;
  const std::vector<std::pair<std::string, Setter>> fields = {
      {"scene_file", [&](const json& v) { c.scene_file = v.get<std::string>(); }},
      {"generate", [&](const json& v) { c.generate = scene_spec_from_json(v); }},
      {"method", [&](const json& v) { c.method = v.get<std::string>(); }},
      {"rounds", [&](const json& v) { c.rounds = v.get<int>(); }},
      {"seed_count", [&](const json& v) { c.seed_count = v.get<int>(); }},
      {"rng_seed", [&](const json& v) { c.rng_seed = v.get<std::uint64_t>(); }},
      {"embodied", [&](const json& v) { c.embodied = v.get<bool>(); }},
      {"k", [&](const json& v) { c.k = v.get<int>(); }},
      {"start", [&](const json& v) { c.start = v.get<int>(); }},
      {"refine", [&](const json& v) { c.refine = v.get<bool>(); }},
      {"refine_steps", [&](const json& v) { c.refine_steps = v.get<int>(); }},
      {"L", [&](const json& v) { c.L = v.get<int>(); }},
      {"kappa", [&](const json& v) { c.kappa = v.get<double>(); }},
      {"ridge", [&](const json& v) { c.ridge = v.get<double>(); }},
      {"pixel_stride", [&](const json& v) { c.pixel_stride = v.get<int>(); }},
      {"oracle_stride", [&](const json& v) { c.oracle_stride = v.get<int>(); }},
      {"background", [&](const json& v) { c.background = v.get<double>(); }},
      {"mask_alpha", [&](const json& v) { c.mask_alpha = v.get<double>(); }},
      {"observation_noise", [&](const json& v) { c.observation_noise = v.get<double>(); }},
      {"jobs", [&](const json& v) { c.jobs = v.get<int>(); }},
      {"output_dir", [&](const json& v) { c.output_dir = v.get<std::string>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const auto& f) { return f.first == key; });
    require(it != fields.end(), Errc::format, "unknown config key: " + key);
    try {
      it->second(value);
    } catch (const json::exception& e) {
      fail(Errc::format, "bad value for config key " + key + ": " + e.what());
    }
  }
  require(!(j.contains("scene_file") && j.contains("generate")), Errc::format,
          "config may hold scene_file or generate, not both");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::format, "bad config JSON in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_gen_scene(const SceneSpec& spec, const std::string& path, std::ostream& log) {
  const Scene scene = generate_scene(spec);
  save_scene(scene, path);
  log << "wrote " << path << ": " << scene.primitive_count() << " primitives, "
      << scene.candidate_cameras.size() << " candidate / " << scene.eval_cameras.size()
      << " eval / " << scene.seed_cameras.size() << " seed cameras"
      << (scene.view_dependent() ? ", view-dependent" : "") << '\n';
}

RunOutputs cmd_run(const RunConfig& config, std::ostream& log) {
  config.validate();
  const Method method = parse_method(config.method);
  const Scene scene =
      config.scene_file.empty() ? generate_scene(config.generate) : load_scene(config.scene_file);

  const int pool = static_cast<int>(scene.candidate_cameras.size());
  const int rounds = config.rounds < 0 ? pool / 2 : config.rounds;
  require(config.seed_count <= static_cast<int>(scene.seed_cameras.size()),
          Errc::invalid_argument,
          "seed_count " + std::to_string(config.seed_count) + " exceeds the scene's " +
              std::to_string(scene.seed_cameras.size()) + " seed cameras");
  if (!config.embodied)
    require(rounds <= pool, Errc::invalid_argument,
            "rounds (" + std::to_string(rounds) + ") exceed the candidate pool size (" +
                std::to_string(pool) + ")");
  if (config.embodied)
    require(config.start < static_cast<int>(scene.seed_cameras.size()), Errc::invalid_argument,
            "start must index a seed camera in [0, " +
                std::to_string(static_cast<int>(scene.seed_cameras.size()) - 1) + "]");

  SelectionOptions options;
  options.grid_size = config.L;
  options.kappa = config.kappa;
  options.ridge = config.ridge;
  options.pixel_stride = config.pixel_stride;
  options.oracle_stride = config.oracle_stride;
  options.background = config.background;
  options.mask_alpha = config.mask_alpha;
  options.observation_noise = config.observation_noise;
  options.jobs = config.jobs;

  std::optional<RefineOptions> refine;
  if (config.refine) {
    RefineOptions r;
    r.steps = config.refine_steps;
    r.background = config.background;
    r.mask_alpha = config.mask_alpha;
    refine = r;
  }

  // Fail on an unwritable directory before the expensive part.
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), Errc::io,
          "cannot create output directory: " + config.output_dir);

  const SelectionContext ctx(scene, options);
  RunResult result =
      config.embodied
          ? run_embodied(ctx, method, rounds, config.k, scene.seed_cameras.at(config.start),
                         config.seed_count, config.rng_seed, refine)
          : run_fixed(ctx, method, rounds, config.seed_count, config.rng_seed, refine);

  save_scene(scene, (dir / "scene.json").string());
  write_curve_csv(result.report, (dir / "curve.csv").string());
  save_checkpoint(result.state, (dir / "checkpoint.bin").string());
  write_text((dir / "chosen.json").string(), chosen_json(result.state));

  json manifest;
  manifest["format_version"] = kManifestVersion;
  manifest["command"] = "run";
  manifest["config"] = to_json(config);
  manifest["resolved_rounds"] = rounds;
  manifest["exhausted"] = result.report.exhausted;
  if (result.report.refined)
    manifest["note"] = "refined poses were trained on ground-truth renders at the refined pose";
  write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");

  const auto& rows = result.report.rows;
  log << to_string(method) << (config.embodied ? " embodied" : " fixed") << ": "
      << rows.size() - 1 << " rounds, eval PSNR " << fmt(rows.front().eval_psnr, 3) << " -> "
      << fmt(rows.back().eval_psnr, 3) << " dB\n";
  if (result.report.exhausted)
    log << "note: candidate pool exhausted after " << rows.size() - 1 << " rounds\n";
  if (result.report.refined)
    log << "note: refined poses trained on ground-truth renders at the refined pose\n";
  log << "outputs in " << config.output_dir << '\n';
  return {std::move(result.report), config.output_dir, rounds};
}

double cmd_render_metric(const RenderMetricArgs& args, std::ostream& log) {
  const Scene scene = load_scene(args.scene_file);
  const SelectionState state = load_checkpoint(args.checkpoint);
  require(state.coverage.primitive_count() == scene.primitive_count(), Errc::dimension_mismatch,
          "checkpoint has " + std::to_string(state.coverage.primitive_count()) +
              " primitives but the scene has " + std::to_string(scene.primitive_count()));
  require((args.camera >= 0) != (args.pose.size() == 7), Errc::invalid_argument,
          "give exactly one of --camera or --pose");

  Camera camera;
  if (args.camera >= 0) {
    const std::vector<Camera>* list = nullptr;
    if (args.camera_set == "candidate") list = &scene.candidate_cameras;
    if (args.camera_set == "eval") list = &scene.eval_cameras;
    if (args.camera_set == "seed") list = &scene.seed_cameras;
    require(list != nullptr, Errc::invalid_argument,
            "camera set must be candidate, eval or seed");
    const int n = static_cast<int>(list->size());
    require(args.camera < n, Errc::invalid_argument,
            "camera id " + std::to_string(args.camera) + " out of range; valid " +
                args.camera_set + " ids are " +
                (n == 0 ? std::string("none") : "0.." + std::to_string(n - 1)));
    camera = (*list)[static_cast<std::size_t>(args.camera)];
  } else {
    const auto& p = args.pose;
    camera.intrinsics =
        scene.candidate_cameras.empty() ? Intrinsics{} : scene.candidate_cameras[0].intrinsics;
    camera.position = Vec3(p[0], p[1], p[2]);
    Eigen::Quaterniond q(p[3], p[4], p[5], p[6]);
    require(q.norm() > 1e-12, Errc::invalid_argument, "pose quaternion is zero");
    camera.rotation = q.normalized();
    camera.validate();
  }

  const auto score = score_coverage(scene, state.coverage, camera, args.background,
                                    args.mask_alpha);
  write_pgm(score.image.image, args.out);
  if (!args.pfm.empty()) write_pfm(score.image.image, args.pfm);
  log << "mean " << fmt(score.mean_score, 6) << " over " << score.image.mask_count()
      << " masked pixels; wrote " << args.out << '\n';
  return score.mean_score;
}

std::vector<ReportRow> cmd_report(const ReportArgs& args, std::ostream& log) {
  require(!args.curves.empty(), Errc::invalid_argument, "no curves given");
  require(!args.baseline.empty(), Errc::invalid_argument, "a --baseline curve is required");
  auto label_of = [](const std::string& path) {
    const fs::path p(path);
    const std::string stem = p.stem().string();
    if (stem == "curve" && p.has_parent_path() && !p.parent_path().filename().empty())
      return p.parent_path().filename().string();
    return stem;
  };
  auto psnr = [](const std::vector<StepRecord>& rows) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.eval_psnr);
    return v;
  };

  const auto base = read_curve_csv(args.baseline);
  require(!base.empty(), Errc::format, "baseline curve is empty: " + args.baseline);
  std::vector<ReportRow> rows;
  for (const auto& path : args.curves) {
    const auto curve = read_curve_csv(path);
    bool aligned = curve.size() == base.size();
    for (std::size_t i = 0; aligned && i < curve.size(); ++i)
      aligned = curve[i].round == base[i].round;
    require(aligned, Errc::dimension_mismatch,
            "curve " + path + " is not aligned with baseline " + args.baseline +
                " (rounds differ)");
    rows.push_back({label_of(path), static_cast<int>(curve.size()) - 1, curve.back().eval_psnr,
                    auc_delta(psnr(curve), psnr(base))});
  }

  log << std::left << std::setw(24) << "curve" << std::right << std::setw(8) << "rounds"
      << std::setw(14) << "final_psnr" << std::setw(12) << "delta" << '\n';
  for (const auto& r : rows)
    log << std::left << std::setw(24) << r.label << std::right << std::setw(8) << r.rounds
        << std::setw(14) << fmt(r.final_psnr) << std::setw(12) << fmt(r.auc_delta) << '\n';
  log << "delta: round-averaged PSNR gain over " << label_of(args.baseline) << " (dB)\n";

  if (!args.csv.empty()) {
    std::ostringstream s;
    s << "curve,rounds,final_psnr,auc_delta\n";
    char buf[128];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g\n", r.rounds, r.final_psnr, r.auc_delta);
      s << r.label << buf;
    }
    write_text(args.csv, s.str());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Command line

namespace {

int exit_code(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::invalid_spec:
      return 2;
    default:
      return 1;
  }
}

void add_gen_flags(CLI::App* app, SceneSpec& spec, bool with_seed) {
  app->add_option("--primitives", spec.n_primitives, "Number of Gaussian primitives (artifact default)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--candidates", spec.n_candidates, "Candidate camera pool size (artifact default)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--eval-views", spec.n_eval, "Held-out evaluation cameras (artifact default)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--seed-views", spec.n_seed, "Seed cameras stored in the scene (protocol default)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  if (with_seed)
    app->add_option("--seed", spec.rng_seed, "Scene generator RNG seed")->capture_default_str();
  app->add_flag("--view-dependent", spec.view_dependent,
                "Give primitives direction-dependent colors");
  app->add_option("--patches", spec.L, "Sphere patches per primitive color field (artifact default)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--color-kappa", spec.color_kappa,
                  "Spherical Gaussian sharpness of color fields (artifact default)")
      ->capture_default_str();
  app->add_option("--seed-cone", spec.seed_cone_deg,
                  "Half-angle in degrees of the cap holding seed cameras; 180 = anywhere (artifact default)")
      ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coverage-driven next-best-view selection on synthetic Gaussian scenes", "cover"};
  app.require_subcommand(1);

  // gen-scene
  SceneSpec gen_spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-scene", "Generate a synthetic scene and write it as JSON");
  gen->add_option("--out,-o", gen_out, "Output scene JSON path")->required();
  add_gen_flags(gen, gen_spec, true);
  int gen_resolution = gen_spec.intrinsics.width;
  double gen_focal = gen_spec.intrinsics.fx;
  gen->add_option("--resolution", gen_resolution, "Square image size in pixels (artifact default)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--focal", gen_focal, "Focal length in pixels (artifact default)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // run
  RunConfig cli_cfg;
  std::string config_path;
  std::uint64_t scene_seed = 0;
  auto* run = app.add_subcommand("run", "Run one view-selection experiment");
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;
  auto track = [&](CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    overrides.emplace_back(opt, std::move(apply));
    return opt;
  };
  run->add_option("--config", config_path,
                  "JSON config or manifest.json of an earlier run; flags given here override it");
  track(run->add_option("--scene", cli_cfg.scene_file, "Scene JSON file (default: generate one)"),
        [&](RunConfig& c) { c.scene_file = cli_cfg.scene_file; });
  track(run->add_option("--scene-seed", scene_seed, "RNG seed of the generated scene"),
        [&](RunConfig& c) { c.generate.rng_seed = scene_seed; });
  track(run->add_option("--primitives", cli_cfg.generate.n_primitives,
                        "Primitives in the generated scene (artifact default)")
            ->check(CLI::PositiveNumber)
            ->capture_default_str(),
        [&](RunConfig& c) { c.generate.n_primitives = cli_cfg.generate.n_primitives; });
  track(run->add_option("--candidates", cli_cfg.generate.n_candidates,
                        "Candidate pool of the generated scene (artifact default)")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str(),
        [&](RunConfig& c) { c.generate.n_candidates = cli_cfg.generate.n_candidates; });
  track(run->add_flag("--view-dependent", cli_cfg.generate.view_dependent,
                      "Generate direction-dependent colors"),
        [&](RunConfig& c) { c.generate.view_dependent = cli_cfg.generate.view_dependent; });
  track(run->add_option("--method,-m", cli_cfg.method,
                        "Selection method: cover, trans, view, exact_fig or random")
            ->capture_default_str(),
        [&](RunConfig& c) { c.method = cli_cfg.method; });
  track(run->add_option("--rounds,-r", cli_cfg.rounds,
                        "Selection rounds; -1 uses half the candidate pool (protocol default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.rounds = cli_cfg.rounds; });
  track(run->add_option("--seeds", cli_cfg.seed_count, "Seed views absorbed before round 1 (protocol default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.seed_count = cli_cfg.seed_count; });
  track(run->add_option("--seed,-s", cli_cfg.rng_seed, "Selection RNG seed (random method, noise)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.rng_seed = cli_cfg.rng_seed; });
  track(run->add_flag("--embodied", cli_cfg.embodied,
                      "Restrict each round to the k candidates nearest the current camera"),
        [&](RunConfig& c) { c.embodied = cli_cfg.embodied; });
  track(run->add_option("--k", cli_cfg.k, "Neighbourhood size of embodied runs (protocol default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.k = cli_cfg.k; });
  track(run->add_option("--start", cli_cfg.start, "Seed camera the embodied walk starts from")
            ->capture_default_str(),
        [&](RunConfig& c) { c.start = cli_cfg.start; });
  track(run->add_flag("--refine", cli_cfg.refine,
                      "Refine each chosen pose by descending the coverage score"),
        [&](RunConfig& c) { c.refine = cli_cfg.refine; });
  track(run->add_option("--refine-steps", cli_cfg.refine_steps, "Pose refinement steps (protocol default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.refine_steps = cli_cfg.refine_steps; });
  track(run->add_option("--L", cli_cfg.L, "Direction grid size for coverage and view metrics (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.L = cli_cfg.L; });
  track(run->add_option("--kappa", cli_cfg.kappa, "Spherical Gaussian sharpness of the view metric (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.kappa = cli_cfg.kappa; });
  track(run->add_option("--ridge", cli_cfg.ridge, "Ridge added to Gram and least-squares systems (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.ridge = cli_cfg.ridge; });
  track(run->add_option("--stride", cli_cfg.pixel_stride, "Pixel subsampling of candidate and training renders (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.pixel_stride = cli_cfg.pixel_stride; });
  track(run->add_option("--oracle-stride", cli_cfg.oracle_stride,
                        "Extra pixel subsampling for the exact Fisher Gram matrix (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.oracle_stride = cli_cfg.oracle_stride; });
  track(run->add_option("--background", cli_cfg.background, "Metric background value, 0 or 1 (protocol default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.background = cli_cfg.background; });
  track(run->add_option("--mask-alpha", cli_cfg.mask_alpha,
                        "Minimum pixel alpha counted in the coverage mean (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.mask_alpha = cli_cfg.mask_alpha; });
  track(run->add_option("--noise", cli_cfg.observation_noise,
                        "Std. dev. of noise on training images (artifact default)")
            ->capture_default_str(),
        [&](RunConfig& c) { c.observation_noise = cli_cfg.observation_noise; });
  track(run->add_option("--jobs,-j", cli_cfg.jobs, "Worker threads; 0 uses all cores")
            ->capture_default_str(),
        [&](RunConfig& c) { c.jobs = cli_cfg.jobs; });
  auto* out_opt = run->add_option("--out,-o", cli_cfg.output_dir,
                                  std::string("Output directory (default cover_out, or $") +
                                      kOutputDirEnv + ")");

  // render-metric
  RenderMetricArgs rm;
  auto* render = app.add_subcommand("render-metric",
                                    "Render the coverage metric image of one camera");
  render->add_option("--scene", rm.scene_file, "Scene JSON file")->required()->check(CLI::ExistingFile);
  render->add_option("--checkpoint", rm.checkpoint, "Checkpoint written by run")
      ->required()
      ->check(CLI::ExistingFile);
  auto* cam_opt = render->add_option("--camera", rm.camera, "Camera id within --camera-set");
  render->add_option("--camera-set", rm.camera_set, "candidate, eval or seed")->capture_default_str();
  auto* pose_opt = render->add_option("--pose", rm.pose, "Free pose: px py pz qw qx qy qz")
                       ->expected(7);
  cam_opt->excludes(pose_opt);
  render->add_option("--out,-o", rm.out, "Output PGM path")->required();
  render->add_option("--pfm", rm.pfm, "Also write the raw values as PFM");
  render->add_option("--background", rm.background, "Metric background, 0 or 1 (protocol default)")
      ->capture_default_str();
  render->add_option("--mask-alpha", rm.mask_alpha, "Minimum alpha counted in the mean (artifact default)")
      ->capture_default_str();

  // report
  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Tabulate round-averaged PSNR gains over a baseline");
  report->add_option("curves", rep.curves, "Curve CSV files")->required();
  report->add_option("--baseline,-b", rep.baseline, "Curve CSV of the random baseline")->required();
  report->add_option("--csv", rep.csv, "Also write the table as CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen) {
      gen_spec.intrinsics.width = gen_spec.intrinsics.height = gen_resolution;
      gen_spec.intrinsics.cx = gen_spec.intrinsics.cy = 0.5 * gen_resolution;
      gen_spec.intrinsics.fx = gen_spec.intrinsics.fy = gen_focal;
      cmd_gen_scene(gen_spec, gen_out, out);
    } else if (*run) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      for (auto& [opt, apply] : overrides)
        if (opt->count() > 0) apply(cfg);
      if (out_opt->count() > 0) {
        cfg.output_dir = cli_cfg.output_dir;
      } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
        cfg.output_dir = env;
      }
      cmd_run(cfg, out);
    } else if (*render) {
      if (rm.camera < 0 && rm.pose.empty()) fail(Errc::invalid_argument, "give --camera or --pose");
      cmd_render_metric(rm, out);
    } else if (*report) {
      cmd_report(rep, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace cover::cli
