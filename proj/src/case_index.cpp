#include "radon_roi/case_index.hpp"

#include <fstream>
#include <set>

namespace radon_roi {

using nlohmann::json;
using nlohmann::ordered_json;

GrayImage crop(const GrayImage& img, const BoundingBox& box) {
  return crop(img, box.x_s, box.y_s, box.x_e, box.y_e);
}

BoundingBox bbox_from_mask(const GrayImage& mask) {
  BoundingBox box{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) == 0) continue;
      box.x_s = std::min(box.x_s, x);
      box.y_s = std::min(box.y_s, y);
      box.x_e = std::max(box.x_e, x);
      box.y_e = std::max(box.y_e, y);
    }
  }
  if (box.x_e < 0) throw InvalidArgument("ground-truth mask has no nonzero pixel");
  return box;
}

void BarcodeConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("invalid barcode config: ") + what);
  };
  require(global_side >= 2, "global_side must be >= 2");
  require(global_angles >= 1, "global_angles must be >= 1");
  require(roi_side >= 2, "roi_side must be >= 2");
  require(roi_angles >= 1, "roi_angles must be >= 1");
  require(beta > 0.0, "beta must be > 0");
  require(stick_length >= 3 && stick_length % 2 == 1, "stick_length must be odd and >= 3");
  require(delta > 0.0 && delta <= 0.5, "delta must lie in (0, 0.5]");
  require(top_m >= 1, "top_m must be >= 1");
}

const CaseRecord* IndexDatabase::find(std::string_view case_id) const {
  for (const auto& c : cases) {
    if (c.case_id == case_id) return &c;
  }
  return nullptr;
}

void IndexDatabase::validate() const {
  config.validate();
  std::set<std::string_view> seen;
  for (const auto& c : cases) {
    if (!seen.insert(c.case_id).second) throw FormatError("duplicate case_id: " + c.case_id);
    if (c.width < 1 || c.height < 1 || !c.bbox.valid_for(c.width, c.height)) {
      throw FormatError("case " + c.case_id + ": bbox outside image dimensions");
    }
    if (c.global.num_angles() != config.global_angles || c.global.bins() != config.global_side) {
      throw FormatError("case " + c.case_id + ": global barcode shape does not match config");
    }
    if (c.roi.num_angles() != config.roi_angles || c.roi.bins() != config.roi_side) {
      throw FormatError("case " + c.case_id + ": ROI barcode shape does not match config");
    }
  }
}

BarcodePair describe(const GrayImage& preprocessed, const BoundingBox& roi, const BarcodeConfig& cfg) {
  if (!roi.valid_for(preprocessed.width(), preprocessed.height())) {
    throw InvalidArgument("ROI box outside image");
  }
  return {generate_barcode(preprocessed, cfg.global_side, cfg.global_angles),
          generate_barcode(crop(preprocessed, roi), cfg.roi_side, cfg.roi_angles)};
}

CaseRecord index_case(std::string case_id, const GrayImage& img, const BoundingBox& gt, const BarcodeConfig& cfg,
                      std::string image_path) {
  cfg.validate();
  if (!gt.valid_for(img.width(), img.height())) {
    throw InvalidArgument("case " + case_id + ": ground-truth box outside image");
  }
  auto codes = describe(preprocess(img, cfg.preprocess_options()), gt, cfg);
  return {std::move(case_id), std::move(image_path), img.width(), img.height(), gt, std::move(codes.global),
          std::move(codes.roi)};
}

CaseRecord index_case(std::string case_id, const GrayImage& img, const GrayImage& gt_mask,
                      const BarcodeConfig& cfg, std::string image_path) {
  if (gt_mask.width() != img.width() || gt_mask.height() != img.height()) {
    throw InvalidArgument("case " + case_id + ": mask dimensions differ from image");
  }
  return index_case(std::move(case_id), img, bbox_from_mask(gt_mask), cfg, std::move(image_path));
}

ordered_json to_json(const BoundingBox& box) {
  return {{"x_s", box.x_s}, {"y_s", box.y_s}, {"x_e", box.x_e}, {"y_e", box.y_e}};
}

BoundingBox bbox_from_json(const json& j) {
  if (j.is_array()) {
    if (j.size() != 4) throw FormatError("bbox array must have 4 entries");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  }
  return {j.at("x_s").get<int>(), j.at("y_s").get<int>(), j.at("x_e").get<int>(), j.at("y_e").get<int>()};
}

ordered_json to_json(const BarcodeConfig& cfg) {
  return {{"global_side", cfg.global_side},
          {"global_angles", cfg.global_angles},
          {"roi_side", cfg.roi_side},
          {"roi_angles", cfg.roi_angles},
          {"beta", cfg.beta},
          {"stick_length", cfg.stick_length},
          {"delta", cfg.delta},
          {"top_m", cfg.top_m},
          {"enhance", cfg.enhance},
          {"normalize_terms", cfg.normalize_terms}};
}

BarcodeConfig config_from_json(const json& j) {
  BarcodeConfig cfg;
  cfg.global_side = j.at("global_side").get<int>();
  cfg.global_angles = j.at("global_angles").get<int>();
  cfg.roi_side = j.at("roi_side").get<int>();
  cfg.roi_angles = j.at("roi_angles").get<int>();
  cfg.beta = j.at("beta").get<double>();
  cfg.stick_length = j.at("stick_length").get<int>();
  cfg.delta = j.at("delta").get<double>();
  cfg.top_m = j.at("top_m").get<int>();
  cfg.enhance = j.value("enhance", true);
  cfg.normalize_terms = j.value("normalize_terms", false);
  return cfg;
}

ordered_json to_json(const IndexDatabase& db) {
  ordered_json cases = ordered_json::array();
  for (const auto& c : db.cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"image_path", c.image_path},
                     {"width", c.width},
                     {"height", c.height},
                     {"bbox", to_json(c.bbox)},
                     {"global_barcode", c.global.to_string()},
                     {"roi_barcode", c.roi.to_string()}});
  }
  return {{"format_version", kIndexFormatVersion}, {"config", to_json(db.config)}, {"cases", std::move(cases)}};
}

IndexDatabase index_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw FormatError("index file has no format_version");
  }
  const int version = j.at("format_version").get<int>();
  if (version != kIndexFormatVersion) {
    throw FormatError("unsupported index format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kIndexFormatVersion) + ")");
  }
  IndexDatabase db;
  try {
    db.config = config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed index config: ") + e.what());
  }
  for (const auto& jc : j.at("cases")) {
    CaseRecord c;
    c.case_id = jc.at("case_id").get<std::string>();
    try {
      c.image_path = jc.value("image_path", "");
      c.width = jc.at("width").get<int>();
      c.height = jc.at("height").get<int>();
      c.bbox = bbox_from_json(jc.at("bbox"));
      c.global = RadonBarcode::from_string(jc.at("global_barcode").get<std::string>(), db.config.global_angles,
                                           db.config.global_side);
      c.roi = RadonBarcode::from_string(jc.at("roi_barcode").get<std::string>(), db.config.roi_angles,
                                        db.config.roi_side);
    } catch (const json::exception& e) {
      throw FormatError("case " + c.case_id + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("case " + c.case_id + ": " + e.what());
    }
    db.cases.push_back(std::move(c));
  }
  db.validate();
  return db;
}

void save_index(const IndexDatabase& db, const std::filesystem::path& path) {
  db.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write index file: " + path.string());
  out << to_json(db).dump(1) << '\n';
  if (!out) throw IoError("short write: " + path.string());
}

IndexDatabase load_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("index file is not valid JSON: " + std::string(e.what()));
  }
  try {
    return index_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed index file: ") + e.what());
  }
}

}  // namespace radon_roi
