#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cover/scene.hpp"
#include "cover/select.hpp"

namespace cover::cli {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kOutputDirEnv = "COVER_OUTPUT_DIR";

struct RunConfig {
  std::string scene_file;  // empty: generate from `generate`
  SceneSpec generate;
  std::string method = "cover";
  int rounds = -1;  // -1: half the candidate pool
  int seed_count = 10;
  std::uint64_t rng_seed = 0;
  bool embodied = false;
  int k = 5;
  int start = 0;  // seed camera the embodied walk starts from
  bool refine = false;
  int refine_steps = 50;
  int L = 162;
  double kappa = 16.0;
  double ridge = 1e-6;
  int pixel_stride = 1;
  int oracle_stride = 2;
  double background = 0.0;
  double mask_alpha = 0.5;
  double observation_noise = 0.05;
  int jobs = 1;
  std::string output_dir = "cover_out";

  /// Throws Errc::invalid_argument on the first bad field.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Accepts a bare config object or a run manifest holding one under
/// "config". Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

struct RunOutputs {
  CurveReport report;
  std::string output_dir;
  int rounds = 0;
};

/// Writes scene.json, curve.csv, checkpoint.bin, chosen.json and
/// manifest.json under config.output_dir.
RunOutputs cmd_run(const RunConfig& config, std::ostream& log);

void cmd_gen_scene(const SceneSpec& spec, const std::string& path, std::ostream& log);

struct RenderMetricArgs {
  std::string scene_file;
  std::string checkpoint;
  int camera = -1;
  std::string camera_set = "candidate";  // candidate | eval | seed
  std::vector<double> pose;              // px py pz qw qx qy qz
  std::string out;
  std::string pfm;
  double background = 0.0;
  double mask_alpha = 0.5;
};

/// Returns the mean-over-mask score it printed.
double cmd_render_metric(const RenderMetricArgs& args, std::ostream& log);

struct ReportRow {
  std::string label;
  int rounds = 0;
  double final_psnr = 0.0;
  double auc_delta = 0.0;
};

struct ReportArgs {
  std::vector<std::string> curves;
  std::string baseline;
  std::string csv;
};

std::vector<ReportRow> cmd_report(const ReportArgs& args, std::ostream& log);

/// Full command line (without the program name). Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cover::cli
