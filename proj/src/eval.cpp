#include "radon_roi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "radon_roi/parallel.hpp"

namespace radon_roi {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Portable draws on top of mt19937_64; std distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

bool disjoint(const BoundingBox& a, const BoundingBox& b) {
  return a.x_e < b.x_s || b.x_e < a.x_s || a.y_e < b.y_s || b.y_e < a.y_s;
}

}  // namespace

void LabeledDataset::validate() const {
  std::set<std::string_view> seen;
  for (const auto& c : cases) {
    if (!seen.insert(c.case_id).second) throw InvalidArgument("duplicate case_id: " + c.case_id);
    if (!c.gt.valid_for(c.image.width(), c.image.height())) {
      throw InvalidArgument("case " + c.case_id + ": gt box outside image");
    }
  }
}

DatasetLoad load_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest: " + manifest.string());
  const fs::path base = manifest.parent_path();
  DatasetLoad out;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string label = "line " + std::to_string(line_no);
    try {
      const json j = json::parse(line);
      LabeledCase c;
      c.case_id = j.at("case_id").get<std::string>();
      label = c.case_id;
      if (!seen.insert(c.case_id).second) throw FormatError("duplicate case_id");
      const fs::path image_path = resolve(base, j.at("image").get<std::string>());
      c.image = load_grayscale(image_path);
      c.image_path = fs::absolute(image_path).lexically_normal().string();
      if (j.contains("bbox")) {
        c.gt = bbox_from_json(j.at("bbox"));
      } else if (j.contains("mask")) {
        const GrayImage mask = load_grayscale(resolve(base, j.at("mask").get<std::string>()));
        if (mask.width() != c.image.width() || mask.height() != c.image.height()) {
          throw FormatError("mask dimensions differ from image");
        }
        c.gt = bbox_from_mask(mask);
      } else {
        throw FormatError("needs either \"bbox\" or \"mask\"");
      }
      if (!c.gt.valid_for(c.image.width(), c.image.height())) throw FormatError("bbox outside image");
      if (j.contains("cluster")) c.cluster = j.at("cluster").get<int>();
      out.dataset.cases.push_back(std::move(c));
    } catch (const json::exception& e) {
      out.errors.push_back(label + ": " + e.what());
    } catch (const Error& e) {
      out.errors.push_back(label + ": " + e.what());
    }
  }
  return out;
}

DatasetLoad load_image_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    const auto stem = entry.path().stem().string();
    if ((ext == ".png" || ext == ".pgm") && !stem.ends_with("_mask")) images.push_back(entry.path());
  }
  std::ranges::sort(images);
  DatasetLoad out;
  for (const auto& image_path : images) {
    const std::string id = image_path.stem().string();
    try {
      fs::path mask_path;
      for (const char* ext : {".png", ".pgm"}) {
        const fs::path candidate = dir / (id + "_mask" + ext);
        if (fs::exists(candidate)) {
          mask_path = candidate;
          break;
        }
      }
      if (mask_path.empty()) throw IoError("no mask file " + id + "_mask.png|pgm");
      LabeledCase c;
      c.case_id = id;
      c.image = load_grayscale(image_path);
      const GrayImage mask = load_grayscale(mask_path);
      if (mask.width() != c.image.width() || mask.height() != c.image.height()) {
        throw FormatError("mask dimensions differ from image");
      }
      c.gt = bbox_from_mask(mask);
      c.image_path = fs::absolute(image_path).lexically_normal().string();
      out.dataset.cases.push_back(std::move(c));
    } catch (const Error& e) {
      out.errors.push_back(id + ": " + e.what());
    }
  }
  return out;
}

fs::path write_dataset(const LabeledDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest: " + manifest.string());
  for (const auto& c : ds.cases) {
    const std::string file = c.case_id + ".png";
    save_png(c.image, dir / file);
    ordered_json line = {{"case_id", c.case_id}, {"image", file}, {"bbox", to_json(c.gt)}};
    if (c.cluster) line["cluster"] = *c.cluster;
    out << line.dump() << '\n';
  }
  return manifest;
}

BoundingBox pose_region(const LesionPose& pose, const SynthOptions& o) {
  const double ex = pose.ax + o.jitter * o.width * 1.5;
  const double ey = pose.ay + o.jitter * o.height * 1.5;
  return {std::max(0, static_cast<int>(std::floor(pose.cx - ex))),
          std::max(0, static_cast<int>(std::floor(pose.cy - ey))),
          std::min(o.width - 1, static_cast<int>(std::ceil(pose.cx + ex))),
          std::min(o.height - 1, static_cast<int>(std::ceil(pose.cy + ey)))};
}

std::vector<LesionPose> synthetic_cluster_poses(const SynthOptions& o) {
  if (o.clusters < 2 || o.per_cluster < 2) throw InvalidArgument("need >= 2 clusters of >= 2 cases");
  if (o.width < 16 || o.height < 16) throw InvalidArgument("synthetic images must be at least 16x16");
  if (!(o.jitter >= 0.0 && o.jitter <= 0.1)) throw InvalidArgument("jitter must lie in [0, 0.1]");
  constexpr int kMaxTries = 20000;
  Rng rng(o.seed);
  std::vector<LesionPose> poses;
  for (int k = 0; k < o.clusters; ++k) {
    LesionPose pose;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
      pose.cx = rng.uniform(0.2, 0.8) * o.width;
      pose.cy = rng.uniform(0.2, 0.8) * o.height;
      pose.ax = rng.uniform(0.07, 0.13) * o.width;
      pose.ay = rng.uniform(0.06, 0.11) * o.height;
      const BoundingBox region = pose_region(pose, o);
      const bool clear = std::ranges::all_of(poses, [&](const LesionPose& p) {
        return disjoint(region, pose_region(p, o));
      });
      if (clear) break;
    }
    poses.push_back(pose);
  }
  return poses;
}

LabeledDataset generate_synthetic_dataset(const SynthOptions& o) {
  const auto poses = synthetic_cluster_poses(o);
  // Members draw from a stream independent of the pose sampler.
  Rng rng(o.seed ^ 0x9E3779B97F4A7C15ULL);
  const double speckle_mean = std::sqrt(std::numbers::pi / 2.0);
  const int digits = static_cast<int>(std::to_string(o.clusters * o.per_cluster - 1).size());

  LabeledDataset ds;
  for (int k = 0; k < o.clusters; ++k) {
    for (int i = 0; i < o.per_cluster; ++i) {
      const LesionPose& base = poses[static_cast<std::size_t>(k)];
      LesionPose pose;
      pose.cx = std::clamp(base.cx + rng.uniform(-o.jitter, o.jitter) * o.width, 0.0, o.width - 1.0);
      pose.cy = std::clamp(base.cy + rng.uniform(-o.jitter, o.jitter) * o.height, 0.0, o.height - 1.0);
      pose.ax = std::max(3.0, base.ax + rng.uniform(-o.jitter, o.jitter) * 0.5 * o.width);
      pose.ay = std::max(3.0, base.ay + rng.uniform(-o.jitter, o.jitter) * 0.5 * o.height);

      GrayImage img(o.width, o.height);
      GrayImage mask(o.width, o.height);
      for (int y = 0; y < o.height; ++y) {
        const double tissue = 70.0 + 50.0 * y / (o.height - 1.0);
        for (int x = 0; x < o.width; ++x) {
          const double n1 = rng.normal();
          const double n2 = rng.normal();
          const double speckle = std::hypot(n1, n2) / speckle_mean;
          const double u = (x - pose.cx) / pose.ax;
          const double v = (y - pose.cy) / pose.ay;
          const bool lesion = u * u + v * v <= 1.0;
          if (lesion) mask.at(x, y) = 255;
          img.at(x, y) = to_gray_level(tissue * speckle * (lesion ? o.lesion_contrast : 1.0));
        }
      }

      const int n = k * o.per_cluster + i;
      char id[32];
      std::snprintf(id, sizeof id, "synth_%0*d", digits, n);
      ds.cases.push_back({id, std::move(img), bbox_from_mask(mask), k, {}});
    }
  }
  return ds;
}

Click simulate_click(const BoundingBox& gt) {
  return {(gt.x_s + gt.x_e + 1) / 2, (gt.y_s + gt.y_e + 1) / 2};
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

EvalReport leave_one_out(const LabeledDataset& ds, const BarcodeConfig& cfg, const EvalOptions& options) {
  if (ds.size() < 2) throw InvalidArgument("leave-one-out needs at least 2 cases, got " + std::to_string(ds.size()));
  cfg.validate();
  ds.validate();
  const std::size_t n = ds.size();

  // Records depend only on their own case, so they are built once and each
  // fold indexes all but the held-out one.
  std::vector<GrayImage> prepared(n);
  std::vector<CaseRecord> records(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& c = ds.cases[i];
    prepared[i] = preprocess(c.image, cfg.preprocess_options());
    auto codes = describe(prepared[i], c.gt, cfg);
    records[i] = {c.case_id, c.image_path, c.image.width(), c.image.height(), c.gt, std::move(codes.global),
                  std::move(codes.roi)};
  });

  EvalReport report;
  report.cases.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& held_out = ds.cases[i];
    IndexDatabase fold{cfg, {}};
    fold.cases.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) fold.cases.push_back(records[j]);
    }
    Click click = simulate_click(held_out.gt);
    if (options.click_jitter > 0) {
      Rng rng(options.jitter_seed + i);
      click.x = std::clamp(click.x + rng.uniform_int(-options.click_jitter, options.click_jitter), 0,
                           held_out.image.width() - 1);
      click.y = std::clamp(click.y + rng.uniform_int(-options.click_jitter, options.click_jitter), 0,
                           held_out.image.height() - 1);
    }
    const QueryResult result = query_preprocessed(fold, prepared[i], click);
    report.cases[i] = {held_out.case_id, dice(held_out.gt, result.estimated_bbox), click, held_out.gt,
                       result.estimated_bbox, result.matches};
  });

  std::vector<double> scores;
  std::vector<double> baseline;
  for (std::size_t i = 0; i < n; ++i) {
    scores.push_back(report.cases[i].dice);
    const auto& img = ds.cases[i].image;
    const Click centre{(img.width() - 1) / 2, (img.height() - 1) / 2};
    baseline.push_back(dice(ds.cases[i].gt, query_bbox_from_click(centre, img.width(), img.height(), cfg.delta)));
  }
  std::tie(report.mean_dice, report.std_dice) = mean_and_std(scores);
  report.baseline_mean_dice = mean_and_std(baseline).first;
  return report;
}

ordered_json to_json(const EvalReport& report) {
  ordered_json cases = ordered_json::array();
  for (const auto& c : report.cases) {
    ordered_json matches = ordered_json::array();
    for (const auto& m : c.matches) {
      matches.push_back({{"case_id", m.case_id}, {"d_total", m.d_total}, {"weight", round6(m.weight)}});
    }
    cases.push_back({{"case_id", c.case_id},
                     {"dice", round6(c.dice)},
                     {"click", {{"x", c.click.x}, {"y", c.click.y}}},
                     {"gt_bbox", to_json(c.gt)},
                     {"estimated_bbox", to_json(c.estimated)},
                     {"matches", std::move(matches)}});
  }
  return {{"case_count", report.count()},
          {"mean_dice", round6(report.mean_dice)},
          {"std_dice", round6(report.std_dice)},
          {"baseline_mean_dice", round6(report.baseline_mean_dice)},
          {"cases", std::move(cases)}};
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "case_id,dice,matched_ids\n";
  char dice_text[32];
  for (const auto& c : report.cases) {
    std::snprintf(dice_text, sizeof dice_text, "%.6f", c.dice);
    out << c.case_id << ',' << dice_text << ',';
    for (std::size_t i = 0; i < c.matches.size(); ++i) out << (i ? ";" : "") << c.matches[i].case_id;
    out << '\n';
  }
  return out.str();
}

RgbImage render_overlay(const GrayImage& img, const std::optional<BoundingBox>& gt, const BoundingBox& estimate,
                        const std::optional<BoundingBox>& query_box) {
  RgbImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto g = img.at(x, y);
      out.at(x, y) = {g, g, g};
    }
  }
  // Walks the box outline; `on(step)` decides which outline pixels are painted.
  auto draw = [&](const BoundingBox& b, RgbPixel colour, auto on) {
    int step = 0;
    auto plot = [&](int x, int y) {
      if (on(step++) && x >= 0 && y >= 0 && x < out.width() && y < out.height()) out.at(x, y) = colour;
    };
    for (int x = b.x_s; x <= b.x_e; ++x) plot(x, b.y_s);
    for (int y = b.y_s + 1; y <= b.y_e; ++y) plot(b.x_e, y);
    for (int x = b.x_e - 1; x >= b.x_s; --x) plot(x, b.y_e);
    for (int y = b.y_e - 1; y > b.y_s; --y) plot(b.x_s, y);
  };
  if (query_box) draw(*query_box, {60, 120, 255}, [](int s) { return s % 3 == 0; });
  if (gt) draw(*gt, {0, 220, 0}, [](int) { return true; });
  draw(estimate, {255, 40, 40}, [](int s) { return s % 8 < 4; });
  return out;
}

}  // namespace radon_roi
