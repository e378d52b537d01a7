#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "radon_roi/image.hpp"
#include "radon_roi/radon.hpp"

namespace radon_roi {

/// Axis-aligned box, 0-based pixel coordinates, inclusive on both ends.
struct BoundingBox {
  int x_s = 0;
  int y_s = 0;
  int x_e = 0;
  int y_e = 0;

  int width() const { return x_e - x_s + 1; }
  int height() const { return y_e - y_s + 1; }
  long area() const { return static_cast<long>(width()) * height(); }

  /// 0 <= x_s <= x_e <= width-1 and 0 <= y_s <= y_e <= height-1.
  bool valid_for(int image_width, int image_height) const {
    return 0 <= x_s && x_s <= x_e && x_e < image_width && 0 <= y_s && y_s <= y_e && y_e < image_height;
  }

  bool operator==(const BoundingBox&) const = default;
};

GrayImage crop(const GrayImage& img, const BoundingBox& box);

/// Tightest box around all nonzero mask pixels. Throws InvalidArgument on an empty mask.
BoundingBox bbox_from_mask(const GrayImage& mask);

struct BarcodeConfig {
  int global_side = 128;
  int global_angles = 64;
  int roi_side = 64;
  int roi_angles = 32;
  double beta = 1.5;
  int stick_length = 5;
  /// Half-extent of the click box as a fraction of the image dimensions.
  double delta = 0.25;
  int top_m = 5;
  /// Barcodes from the enhanced (hyperbolized + sticks-filtered) image.
  bool enhance = true;
  /// Scale each Hamming term by the other barcode's length before summing,
  /// so global and ROI distances count equally. Off: plain sum.
  bool normalize_terms = false;

  PreprocessOptions preprocess_options() const { return {enhance, beta, stick_length}; }

  /// Throws InvalidArgument naming the first offending field.
  void validate() const;

  bool operator==(const BarcodeConfig&) const = default;
};

struct CaseRecord {
  std::string case_id;
  std::string image_path;
  int width = 0;
  int height = 0;
  BoundingBox bbox;
  RadonBarcode global;
  RadonBarcode roi;

  bool operator==(const CaseRecord&) const = default;
};

struct IndexDatabase {
  BarcodeConfig config;
  std::vector<CaseRecord> cases;

  const CaseRecord* find(std::string_view case_id) const;

  /// Checks unique ids, bbox bounds and barcode shapes against config.
  void validate() const;

  bool operator==(const IndexDatabase&) const = default;
};

/// Global barcode of the whole (already preprocessed) image and ROI barcode of
/// the box crop.
struct BarcodePair {
  RadonBarcode global;
  RadonBarcode roi;
};
BarcodePair describe(const GrayImage& preprocessed, const BoundingBox& roi, const BarcodeConfig& cfg);

/// Preprocesses img and tags it with its global and ground-truth ROI barcodes.
CaseRecord index_case(std::string case_id, const GrayImage& img, const BoundingBox& gt, const BarcodeConfig& cfg,
                      std::string image_path = {});
/// Ground truth as a binary mask; reduced with bbox_from_mask.
CaseRecord index_case(std::string case_id, const GrayImage& img, const GrayImage& gt_mask,
                      const BarcodeConfig& cfg, std::string image_path = {});

inline constexpr int kIndexFormatVersion = 1;

nlohmann::ordered_json to_json(const BoundingBox& box);
BoundingBox bbox_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const BarcodeConfig& cfg);
BarcodeConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const IndexDatabase& db);
IndexDatabase index_from_json(const nlohmann::json& j);

void save_index(const IndexDatabase& db, const std::filesystem::path& path);
/// Throws IoError if unreadable and FormatError on version, shape or id problems.
IndexDatabase load_index(const std::filesystem::path& path);

}  // namespace radon_roi
