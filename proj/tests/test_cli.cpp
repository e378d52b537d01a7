#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "radon_roi/eval.hpp"

using namespace radon_roi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "radon_roi_test_cli";

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args) {
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + RADON_ROI_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kSmall = " --global-side 32 --global-angles 8 --roi-side 16 --roi-angles 8";

fs::path fresh(const std::string& name) {
  const fs::path dir = kWork / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Three random cases whose gt equals the default click box at the box centre.
fs::path self_query_manifest(const fs::path& dir) {
  std::mt19937_64 rng(60);
  std::ofstream manifest(dir / "manifest.jsonl");
  for (int i = 0; i < 3; ++i) {
    const GrayImage img = oracle::random_gray(rng, 80, 60);
    save_png(img, dir / ("img" + std::to_string(i) + ".png"));
    const BoundingBox box = query_bbox_from_click({40, 30}, 80, 60, 0.25);
    manifest << json{{"case_id", "img" + std::to_string(i)}, {"image", "img" + std::to_string(i) + ".png"},
                     {"bbox", {box.x_s, box.y_s, box.x_e, box.y_e}}}
                    .dump()
             << '\n';
  }
  return dir / "manifest.jsonl";
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  fs::create_directories(kWork);
  CHECK(run("").code == 1);
  CHECK(run("bogus").code == 1);
  CHECK(run("index --out x.json").code == 1);
  CHECK(run("--help").code == 0);
  const fs::path dir = fresh("usage");
  const fs::path manifest = self_query_manifest(dir);
  CHECK(run("index --manifest " + q(manifest) + " --out " + q(dir / "i.json") + " --stick-length 4").code == 1);
  CHECK(run("index --manifest " + q(manifest) + " --out " + q(dir / "i.json") + " --delta 0.9").code == 1);
  CHECK(run("eval --synth 1 0 3").code == 1);
}

TEST_CASE("index then query") {
  const fs::path dir = fresh("iq");
  const fs::path manifest = self_query_manifest(dir);
  const std::string manifest_before = slurp(manifest);
  const fs::path index = dir / "index.json";

  const Run indexed = run("index --manifest " + q(manifest) + " --out " + q(index) + kSmall);
  REQUIRE(indexed.code == 0);
  CHECK(indexed.out.find("indexed 3 cases") != std::string::npos);
  CHECK(slurp(manifest) == manifest_before);
  const IndexDatabase db = load_index(index);
  CHECK(db.cases.size() == 3);
  CHECK(db.config.global_side == 32);

  SUBCASE("identical image gives first match at distance 0") {
    const Run r = run("query --index " + q(index) + " --image " + q(dir / "img1.png") + " --click 40,30 --overlay " +
                      q(dir / "overlay.png"));
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.contains("estimated_bbox"));
    CHECK(j["matches"].size() == 3);
    CHECK(j["matches"][0]["case_id"] == "img1");
    CHECK(j["matches"][0]["d_total"] == 0);
    CHECK(load_grayscale(dir / "overlay.png").width() == 80);
    const Run again = run("query --index " + q(index) + " --image " + q(dir / "img1.png") + " --click 40,30");
    CHECK(again.out == r.out);
  }
  SUBCASE("--m alone is not a config mismatch") {
    const Run r = run("query --index " + q(index) + " --image " + q(dir / "img0.png") + " --click 10,10 --m 2");
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["matches"].size() == 2);
  }
  SUBCASE("distinct failures") {
    const Run outside = run("query --index " + q(index) + " --image " + q(dir / "img0.png") + " --click 80,10");
    CHECK(outside.code == 2);
    CHECK(outside.err.find("[0,79]x[0,59]") != std::string::npos);

    const Run missing = run("query --index " + q(dir / "nope.json") + " --image " + q(dir / "img0.png") + " --click 1,1");
    CHECK(missing.code == 2);
    CHECK(missing.err.find("nope.json") != std::string::npos);

    const Run mismatch = run("query --index " + q(index) + " --image " + q(dir / "img0.png") + " --click 1,1" + " --global-side 64");
    CHECK(mismatch.code == 2);
    CHECK(mismatch.err.find("config mismatch") != std::string::npos);

    CHECK(run("query --index " + q(index) + " --image " + q(dir / "img0.png") + " --click \"1;1\"").code == 1);
  }
}

TEST_CASE("index from a directory with a bad case") {
  const fs::path dir = fresh("dir");
  std::mt19937_64 rng(61);
  GrayImage mask(30, 30, 0);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 20; ++x) mask.at(x, y) = 255;
  for (const char* id : {"a", "b", "c"}) {
    save_png(oracle::random_gray(rng, 30, 30), dir / (std::string(id) + ".png"));
    save_png(mask, dir / (std::string(id) + "_mask.png"));
  }
  save_png(oracle::random_gray(rng, 30, 30), dir / "d.png");
  save_png(GrayImage(30, 30, 0), dir / "d_mask.png");

  const Run r = run("index --dir " + q(dir) + " --out " + q(dir / "index.json") + kSmall);
  CHECK(r.code == 2);
  CHECK(r.err.find("d:") != std::string::npos);
  CHECK(load_index(dir / "index.json").cases.size() == 3);

  const fs::path empty = fresh("empty");
  const Run e = run("index --dir " + q(empty) + " --out " + q(empty / "index.json"));
  CHECK(e.code == 2);
  CHECK_FALSE(fs::exists(empty / "index.json"));
}

TEST_CASE("synth and eval") {
  const fs::path dir = fresh("eval");

  SUBCASE("fixed seed gives byte-identical reports") {
    const std::string args = "eval --synth 7 2 4 --width 64 --height 64" + kSmall;
    const Run a = run(args + " --csv " + q(dir / "a.csv") + " --json " + q(dir / "a.json"));
    const Run b = run(args + " --csv " + q(dir / "b.csv") + " --json " + q(dir / "b.json"));
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.json") == a.out);
    CHECK(json::parse(a.out)["case_count"] == 8);
  }
  SUBCASE("33-case manifest gives 33 rows") {
    const Run s = run("synth --seed 5 -k 3 -n 11 --width 64 --height 64 --out " + q(dir / "data"));
    REQUIRE(s.code == 0);
    const Run r = run("eval --manifest " + q(dir / "data" / "manifest.jsonl") + kSmall + " --csv " + q(dir / "r.csv") +
                      " --overlay-dir " + q(dir / "ov"));
    REQUIRE(r.code == 0);
    const std::string csv = slurp(dir / "r.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 34);
    CHECK(json::parse(r.out)["cases"].size() == 33);
    CHECK(fs::exists(dir / "ov" / "synth_00.png"));
  }
  SUBCASE("single-case dataset is an error") {
    const fs::path one = dir / "one";
    fs::create_directories(one);
    std::mt19937_64 rng(62);
    save_png(oracle::random_gray(rng, 20, 20), one / "x.png");
    std::ofstream(one / "manifest.jsonl") << R"({"case_id":"x","image":"x.png","bbox":[1,1,5,5]})" << '\n';
    const Run r = run("eval --manifest " + q(one / "manifest.jsonl") + " --csv \"\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("too small") != std::string::npos);
  }
}
