#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radon_roi/case_index.hpp"
#include "radon_roi/roi_search.hpp"

namespace radon_roi {

struct LabeledCase {
  std::string case_id;
  GrayImage image;
  BoundingBox gt;
  std::optional<int> cluster;  ///< synthetic data only
  std::string image_path;      ///< where the image was read from, if anywhere
};

struct LabeledDataset {
  std::vector<LabeledCase> cases;

  std::size_t size() const { return cases.size(); }
  /// Unique ids, every gt box inside its image.
  void validate() const;
};

// --- dataset files ---------------------------------------------------------

struct DatasetLoad {
  LabeledDataset dataset;
  std::vector<std::string> errors;  ///< one message per skipped case
};

/**
 * Reads a JSON-lines manifest, one object per line:
 *   {"case_id": ..., "image": path, "mask": path}  or  {..., "bbox": {x_s,y_s,x_e,y_e}}
 * with an optional integer "cluster". Relative paths resolve against the
 * manifest's directory. Unreadable or invalid cases are skipped and reported.
 */
DatasetLoad load_manifest(const std::filesystem::path& manifest);

/// Directory of <id>.png|pgm images, each with a <id>_mask.png|pgm mask.
DatasetLoad load_image_dir(const std::filesystem::path& dir);

/// Writes <dir>/<id>.png for every case plus <dir>/manifest.jsonl (bbox form).
std::filesystem::path write_dataset(const LabeledDataset& ds, const std::filesystem::path& dir);

// --- synthetic phantoms ----------------------------------------------------

/// Axis-aligned ellipse, pixel units.
struct LesionPose {
  double cx = 0, cy = 0;  ///< centre
  double ax = 0, ay = 0;  ///< semi-axes along x and y
};

struct SynthOptions {
  std::uint64_t seed = 42;
  int clusters = 4;
  int per_cluster = 10;
  int width = 128;
  int height = 128;
  /// Max per-member centre offset as a fraction of the image dims; semi-axes
  /// jitter by half of it.
  double jitter = 0.05;
  /// Lesion intensity relative to the surrounding tissue.
  double lesion_contrast = 0.35;
};

/// Box covering every pose a member of the cluster can take.
BoundingBox pose_region(const LesionPose& pose, const SynthOptions& options);

/// Cluster poses; pose regions are pairwise disjoint whenever the rejection
/// sampler finds such a layout (it does for the defaults).
std::vector<LesionPose> synthetic_cluster_poses(const SynthOptions& options);

/// Bright depth-graded background with Rayleigh speckle and a dark elliptic
/// lesion; the gt box is the tight box of the lesion pixels. Deterministic in
/// the options.
LabeledDataset generate_synthetic_dataset(const SynthOptions& options);

// --- leave-one-out -----------------------------------------------------------

/// Centre of the box, rounded half up.
Click simulate_click(const BoundingBox& gt);

struct EvalOptions {
  /// 0 disables. Otherwise the click moves by a uniform offset of at most
  /// this many pixels per axis, clamped to the image.
  int click_jitter = 0;
  std::uint64_t jitter_seed = 0;
};

struct CaseScore {
  std::string case_id;
  double dice = 0.0;
  Click click;
  BoundingBox gt;
  BoundingBox estimated;
  std::vector<Match> matches;
};

struct EvalReport {
  std::vector<CaseScore> cases;
  double mean_dice = 0.0;
  double std_dice = 0.0;  ///< population standard deviation
  /// Mean Dice of the click box at the image centre used as the estimate.
  double baseline_mean_dice = 0.0;

  std::size_t count() const { return cases.size(); }
};

/// Mean and population standard deviation.
std::pair<double, double> mean_and_std(std::span<const double> values);

/**
 * For each case i: index every other case, query with image i clicked at its
 * simulated click, score Dice against gt i. Needs at least two cases.
 */
EvalReport leave_one_out(const LabeledDataset& ds, const BarcodeConfig& cfg, const EvalOptions& options = {});

nlohmann::ordered_json to_json(const EvalReport& report);
/// "case_id,dice,matched_ids" header plus one row per case; ids joined by ';'.
std::string to_csv(const EvalReport& report);

/// Ground truth solid green, estimate dashed red, click box dotted blue.
RgbImage render_overlay(const GrayImage& img, const std::optional<BoundingBox>& gt, const BoundingBox& estimate,
                        const std::optional<BoundingBox>& query_box = {});

}  // namespace radon_roi
