#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "radon_roi/case_index.hpp"

using namespace radon_roi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "radon_roi_test_index";
  fs::create_directories(dir);
  return dir / name;
}

BarcodeConfig small_config() {
  BarcodeConfig cfg;
  cfg.global_side = 32;
  cfg.global_angles = 8;
  cfg.roi_side = 16;
  cfg.roi_angles = 4;
  return cfg;
}

}  // namespace

TEST_CASE("bbox_from_mask examples") {
  SUBCASE("single pixel") {
    GrayImage mask(12, 12, 0);
    mask.at(3, 7) = 1;
    CHECK(bbox_from_mask(mask) == BoundingBox{3, 7, 3, 7});
  }
  SUBCASE("full frame") { CHECK(bbox_from_mask(GrayImage(10, 10, 255)) == BoundingBox{0, 0, 9, 9}); }
  SUBCASE("two pixels") {
    GrayImage mask(10, 10, 0);
    mask.at(2, 5) = 255;
    mask.at(8, 1) = 255;
    CHECK(bbox_from_mask(mask) == BoundingBox{2, 1, 8, 5});
  }
  SUBCASE("empty mask") { CHECK_THROWS_AS(bbox_from_mask(GrayImage(5, 5, 0)), InvalidArgument); }
}

TEST_CASE("bbox_from_mask is the min/max of nonzero coordinates") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    GrayImage mask(20, 15, 0);
    int xs = 99, ys = 99, xe = -1, ye = -1;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      const int x = static_cast<int>(rng() % 20);
      const int y = static_cast<int>(rng() % 15);
      mask.at(x, y) = 1;
      xs = std::min(xs, x), ys = std::min(ys, y), xe = std::max(xe, x), ye = std::max(ye, y);
    }
    CHECK(bbox_from_mask(mask) == BoundingBox{xs, ys, xe, ye});
  }
}

TEST_CASE("BarcodeConfig defaults and validation") {
  const BarcodeConfig cfg;
  CHECK(cfg.global_side == 128);
  CHECK(cfg.global_angles == 64);
  CHECK(cfg.roi_side == 64);
  CHECK(cfg.roi_angles == 32);
  CHECK(cfg.delta == 0.25);
  CHECK(cfg.top_m == 5);
  CHECK(cfg.beta == 1.5);
  CHECK(cfg.stick_length == 5);
  CHECK_NOTHROW(cfg.validate());
  BarcodeConfig bad = cfg;
  bad.delta = 0.6;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.top_m = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = cfg;
  bad.stick_length = 6;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("index_case with the default configuration") {
  std::mt19937_64 rng(21);
  const GrayImage img = oracle::random_gray(rng, 150, 110);
  const BoundingBox gt{30, 20, 90, 70};
  const CaseRecord rec = index_case("a", img, gt, BarcodeConfig{});
  CHECK(rec.global.size() == 8192);
  CHECK(rec.roi.size() == 2048);
  CHECK(rec.width == 150);
  CHECK(rec.height == 110);
  CHECK(rec.bbox == gt);

  SUBCASE("deterministic up to the id") {
    CaseRecord again = index_case("b", img, gt, BarcodeConfig{});
    again.case_id = "a";
    CHECK(again == rec);
  }
  SUBCASE("mask ground truth equals its bounding box") {
    GrayImage mask(150, 110, 0);
    for (int y = 20; y <= 70; ++y) {
      for (int x = 30; x <= 90; ++x) {
        const double u = (x - 60) / 30.0, v = (y - 45) / 25.0;
        if (u * u + v * v <= 1.0) mask.at(x, y) = 255;
      }
    }
    const CaseRecord from_mask = index_case("m", img, mask, BarcodeConfig{});
    const CaseRecord from_box = index_case("m", img, bbox_from_mask(mask), BarcodeConfig{});
    CHECK(from_mask == from_box);
  }
}

TEST_CASE("index_case builds barcodes from the preprocessed image and crop") {
  std::mt19937_64 rng(22);
  const GrayImage img = oracle::random_gray(rng, 48, 40);
  const BarcodeConfig cfg = small_config();
  const BoundingBox gt{5, 6, 5, 30};  // one pixel wide, resized up
  const CaseRecord rec = index_case("thin", img, gt, cfg);
  const GrayImage prepared = sticks_filter(hyperbolize(img, cfg.beta), cfg.stick_length);
  CHECK(rec.global == generate_barcode(prepared, cfg.global_side, cfg.global_angles));
  CHECK(rec.roi == generate_barcode(crop(prepared, gt), cfg.roi_side, cfg.roi_angles));
  CHECK_THROWS_AS(index_case("bad", img, BoundingBox{0, 0, 48, 10}, cfg), InvalidArgument);
}

TEST_CASE("index persistence") {
  std::mt19937_64 rng(23);
  const BarcodeConfig cfg = small_config();

  SUBCASE("empty database") {
    const IndexDatabase db{cfg, {}};
    save_index(db, scratch("empty.json"));
    const IndexDatabase loaded = load_index(scratch("empty.json"));
    CHECK(loaded.cases.empty());
    CHECK(loaded.config == cfg);
  }

  SUBCASE("three cases round-trip exactly") {
    IndexDatabase db{cfg, {}};
    for (int i = 0; i < 3; ++i) {
      const GrayImage img = oracle::random_gray(rng, 40 + i, 36);
      db.cases.push_back(index_case("case" + std::to_string(i), img, BoundingBox{i, 2, 20 + i, 30}, cfg,
                                    "/data/img" + std::to_string(i) + ".png"));
    }
    save_index(db, scratch("three.json"));
    CHECK(load_index(scratch("three.json")) == db);
  }

  SUBCASE("corrupted barcode length names the case") {
    IndexDatabase db{cfg, {}};
    db.cases.push_back(index_case("good", oracle::random_gray(rng, 40, 40), BoundingBox{0, 0, 9, 9}, cfg));
    db.cases.push_back(index_case("broken", oracle::random_gray(rng, 40, 40), BoundingBox{0, 0, 9, 9}, cfg));
    auto j = to_json(db);
    auto text = j["cases"][1]["roi_barcode"].get<std::string>();
    j["cases"][1]["roi_barcode"] = text.substr(1);
    std::ofstream(scratch("corrupt.json")) << j.dump();
    try {
      load_index(scratch("corrupt.json"));
      FAIL("expected a FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("broken") != std::string::npos);
    }
  }

  SUBCASE("version mismatch, duplicate ids, bad bbox") {
    IndexDatabase db{cfg, {}};
    db.cases.push_back(index_case("x", oracle::random_gray(rng, 40, 40), BoundingBox{0, 0, 9, 9}, cfg));
    auto j = to_json(db);
    auto versioned = j;
    versioned["format_version"] = 99;
    std::ofstream(scratch("v99.json")) << versioned.dump();
    CHECK_THROWS_AS(load_index(scratch("v99.json")), FormatError);

    auto dup = j;
    dup["cases"].push_back(j["cases"][0]);
    std::ofstream(scratch("dup.json")) << dup.dump();
    CHECK_THROWS_WITH_AS(load_index(scratch("dup.json")), doctest::Contains("duplicate"), FormatError);

    auto bad_box = j;
    bad_box["cases"][0]["bbox"]["x_e"] = 40;
    std::ofstream(scratch("badbox.json")) << bad_box.dump();
    CHECK_THROWS_AS(load_index(scratch("badbox.json")), FormatError);

    std::ofstream(scratch("notjson.json")) << "{ nope";
    CHECK_THROWS_AS(load_index(scratch("notjson.json")), FormatError);
    CHECK_THROWS_AS(load_index(scratch("missing.json")), IoError);
  }
}
