#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cover/fisher.hpp"
#include "cover/metrics.hpp"
#include "cover/raster.hpp"
#include "cover/rng.hpp"
#include "cover/scene.hpp"

namespace cover {

enum class Method { cover, trans, view, exact_fig, random };

const char* to_string(Method m);
/// Throws Errc::invalid_argument for unknown names.
Method parse_method(const std::string& name);

struct SelectionOptions {
  int grid_size = 162;
  double kappa = 16.0;
  double ridge = 1e-6;
  // Subsampling of every camera render used for scoring and training.
  int pixel_stride = 1;
  // Extra subsampling applied to rows fed to the exact Gram matrix.
  int oracle_stride = 2;
  double background = 0.0;
  // Pixels fainter than this are left out of the coverage mean; soft
  // Gaussian fringes would otherwise read as permanently unobserved.
  double mask_alpha = 0.5;
  bool occlusion_aware = true;
  double visibility_cutoff = kVisibilityCutoff;
  // Std. dev. of Gaussian noise added to training images (not eval images).
  double observation_noise = 0.05;
  int jobs = 1;
};

/// Everything about a scene that selection runs only read: cached weight
/// renders for every camera and the ground-truth evaluation images.
class SelectionContext {
 public:
  SelectionContext(const Scene& scene, SelectionOptions options);

  const Scene& scene() const { return *scene_; }
  const SelectionOptions& options() const { return options_; }
  const Compositor& compositor() const { return compositor_; }
  const DirectionGrid& grid() const { return grid_; }
  const SphericalGaussianKernel& kernel() const { return kernel_; }

  int candidate_count() const { return static_cast<int>(candidates_.size()); }
  const CameraRender& candidate_render(int id) const { return candidates_.at(id); }
  const CameraRender& seed_render(int i) const { return seeds_.at(i); }
  std::span<const CameraRender> eval_renders() const { return evals_; }
  std::span<const Image> eval_truth() const { return eval_truth_; }

 private:
  const Scene* scene_;
  SelectionOptions options_;
  Compositor compositor_;
  DirectionGrid grid_;
  SphericalGaussianKernel kernel_;
  std::vector<CameraRender> candidates_;
  std::vector<CameraRender> seeds_;
  std::vector<CameraRender> evals_;
  std::vector<Image> eval_truth_;
};

struct ReconstructionResult {
  Eigen::MatrixX3d fitted_colors;  // clamped to [0, 1]
  double train_residual = 0.0;     // RMS pixel residual on the training set
  double eval_mse = 0.0;
  double eval_psnr = 0.0;
};

/// PSNR of images in [0, 1]; MSE is floored at 1e-10 (100 dB).
double psnr_from_mse(double mse);

/// A training camera plus the key that selects its noise realization.
struct TrainingView {
  const CameraRender* render = nullptr;
  std::uint64_t noise_key = 0;
};

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Ground-truth render of a training view with deterministic Gaussian noise
/// drawn from (noise.seed, noise_key). Values are not clamped.
Image observe(const Scene& scene, const TrainingView& view, const NoiseModel& noise);

/// Ridge least squares of per-primitive colors against the training renders,
/// one channel at a time, in pixel space (raw compositing rows).
/// ridge == 0 uses a rank-revealing solve (unobserved primitives get 0).
ReconstructionResult reconstruct(const Scene& scene, std::span<const TrainingView> training,
                                 std::span<const CameraRender> eval,
                                 std::span<const Image> eval_truth, double ridge,
                                 const NoiseModel& noise = {});
/// Noiseless reconstruction from the given cameras, evaluated on the scene's
/// eval cameras.
ReconstructionResult reconstruct(const Scene& scene, std::span<const Camera> cameras,
                                 double ridge);

struct StepRecord {
  int round = 0;
  int camera_id = -1;  // candidate index; -1 for the seed-set point
  double score = 0.0;
  double eval_mse = 0.0;
  double eval_psnr = 0.0;
};

struct CurveReport {
  Method method = Method::cover;
  std::vector<StepRecord> rows;
  // Embodied runs: the pool ran out before the requested rounds.
  bool exhausted = false;
  // Refined poses were trained on renders of the ground-truth scene.
  bool refined = false;

  std::vector<double> psnr_curve() const;
};

struct SelectionState {
  Method method = Method::cover;
  std::uint64_t rng_seed = 0;
  Rng rng;
  std::vector<int> seed_ids;
  std::vector<int> chosen;              // candidate ids in selection order
  std::vector<Camera> extra_cameras;    // refined poses added to training
  std::vector<int> pool;                // remaining candidate ids, ascending
  Vec3 current_position = Vec3::Zero(); // embodied walk position
  TransAccumulator trans;
  ViewAccumulator view;
  CoverageGrids coverage;
  GramAccumulator gram;
  std::vector<StepRecord> log;
};

/// Fresh state with the first `seed_count` seed cameras absorbed.
SelectionState init_state(const SelectionContext& ctx, Method method, int seed_count,
                          std::uint64_t rng_seed);

/// Folds one camera's observations into every accumulator.
void absorb(SelectionState& state, const SelectionContext& ctx, const CameraRender& render);

/// Native score of each candidate for the state's method: coverage mean,
/// transmittance or view metric mean (lower is better), or mean FIG (higher
/// is better). Random scores are 0.
std::vector<double> score_candidates(const SelectionState& state, const SelectionContext& ctx,
                                     std::span<const int> ids);

struct Selection {
  int camera_id = -1;
  double score = 0.0;
};

/// Picks the best camera among `eligible` (ascending ids), moves it from the
/// pool to the training set and absorbs it. Throws Errc::exhausted when
/// `eligible` is empty.
Selection select_among(SelectionState& state, const SelectionContext& ctx,
                       std::span<const int> eligible);
/// select_among over the whole pool.
Selection select_next(SelectionState& state, const SelectionContext& ctx);

/// Training renders of the current state (seeds, chosen, refined).
std::vector<CameraRender> training_extras(const SelectionState& state,
                                          const SelectionContext& ctx);
ReconstructionResult reconstruct_state(const SelectionState& state, const SelectionContext& ctx);

struct RefineOptions {
  int steps = 50;
  double lr_position = 0.5;  // world units per unit of gradient, also max step
  double lr_rotation = 0.2;  // radians per unit of gradient, also max step
  double fd_position = 0.05;
  double fd_rotation = 0.02;
  double background = 0.0;
  double mask_alpha = 0.5;
};

struct RefineResult {
  Camera camera;
  double best_score = 1.0;
  std::vector<double> best_history;  // best-so-far after each step
};

/// Gradient descent of the coverage score over position and an axis-angle
/// perturbation of orientation, with central finite differences. Returns the
/// best pose seen.
RefineResult refine_pose(const Compositor& compositor, const CoverageGrids& grids,
                         const Camera& root, const RefineOptions& options);
RefineResult refine_pose(const Scene& scene, const CoverageGrids& grids,
                         const Camera& root, const RefineOptions& options);

struct RunResult {
  CurveReport report;
  SelectionState state;
};

/// Runs `rounds` more fixed-pool rounds on an existing state, appending to
/// its log.
void continue_fixed(SelectionState& state, const SelectionContext& ctx, int rounds,
                    const std::optional<RefineOptions>& refine = std::nullopt);

RunResult run_fixed(const SelectionContext& ctx, Method method, int rounds, int seed_count,
                    std::uint64_t rng_seed,
                    const std::optional<RefineOptions>& refine = std::nullopt);

/// Each round, only the k pool cameras nearest to the current position are
/// eligible; the chosen camera becomes the new position.
RunResult run_embodied(const SelectionContext& ctx, Method method, int rounds, int k,
                       const Camera& start, int seed_count, std::uint64_t rng_seed,
                       const std::optional<RefineOptions>& refine = std::nullopt);

/// Round-normalized trapezoidal integral of (method - random).
double auc_delta(std::span<const double> method_curve, std::span<const double> random_curve);

void write_curve_csv(const CurveReport& report, const std::string& path);
std::string curve_csv(const CurveReport& report);
std::vector<StepRecord> read_curve_csv(const std::string& path);

std::string chosen_json(const SelectionState& state);

void save_checkpoint(const SelectionState& state, const std::string& path);
SelectionState load_checkpoint(const std::string& path);

}  // namespace cover
