#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "radon_roi/eval.hpp"
#include "radon_roi/service.hpp"

using namespace radon_roi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t n = (std::uint32_t{bytes[i]} << 16) | (i + 1 < bytes.size() ? bytes[i + 1] << 8 : 0) |
                            (i + 2 < bytes.size() ? bytes[i + 2] : 0);
    out += table[(n >> 18) & 63];
    out += table[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? table[(n >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? table[n & 63] : '=';
  }
  return out;
}

BarcodeConfig fast_config() {
  BarcodeConfig cfg;
  cfg.global_side = 32;
  cfg.global_angles = 8;
  cfg.roi_side = 16;
  cfg.roi_angles = 8;
  cfg.top_m = 3;
  return cfg;
}

struct Fixture {
  fs::path dir;
  LabeledDataset ds;
  IndexDatabase db;
  fs::path index_path;

  Fixture() {
    dir = fs::temp_directory_path() / "radon_roi_test_service";
    fs::remove_all(dir);
    SynthOptions opts;
    opts.clusters = 2;
    opts.per_cluster = 3;
    opts.width = 64;
    opts.height = 64;
    ds = generate_synthetic_dataset(opts);
    write_dataset(ds, dir);
    db.config = fast_config();
    for (const auto& c : ds.cases) {
      // Relative paths resolve against the index file's directory.
      db.cases.push_back(index_case(c.case_id, c.image, c.gt, db.config, c.case_id + ".png"));
    }
    index_path = dir / "index.json";
    save_index(db, index_path);
  }
};

}  // namespace

TEST_CASE("base64_decode") {
  CHECK(base64_decode("aGVsbG8=") == "hello");
  CHECK(base64_decode("aGVsbG8") == "hello");
  CHECK(base64_decode("") == "");
  const std::vector<std::uint8_t> bytes{0, 255, 17, 128, 3};
  CHECK(base64_decode(base64_encode(bytes)) == std::string(bytes.begin(), bytes.end()));
  CHECK_THROWS_AS(base64_decode("ab*d"), FormatError);
}

TEST_CASE("service handlers") {
  Fixture fx;
  Service service({fx.index_path, {}, "*"});

  SUBCASE("no index yet") {
    CHECK(service.list_cases().status == 503);
    CHECK(service.run_query(R"({"case_id":"synth_0","click":{"x":1,"y":1}})").status == 503);
  }

  service.reload();
  REQUIRE(service.snapshot());
  CHECK(*service.snapshot() == fx.db);

  SUBCASE("case list") {
    const Reply r = service.list_cases();
    CHECK(r.status == 200);
    const json j = json::parse(r.body);
    REQUIRE(j.size() == 6);
    CHECK(j[0]["case_id"] == "synth_0");
    CHECK(j[0]["dims"]["width"] == 64);
    CHECK(j[0]["bbox"]["x_s"] == fx.ds.cases[0].gt.x_s);
  }
  SUBCASE("case image") {
    const Reply r = service.case_image("synth_2");
    CHECK(r.status == 200);
    CHECK(r.content_type == "image/png");
    CHECK(decode_grayscale(std::vector<std::uint8_t>(r.body.begin(), r.body.end())) == fx.ds.cases[2].image);
    CHECK(service.case_image("nobody").status == 404);
  }
  SUBCASE("query by case id leaves that case out") {
    const Click click = simulate_click(fx.ds.cases[1].gt);
    const std::string body = json{{"case_id", "synth_1"}, {"click", {{"x", click.x}, {"y", click.y}}}}.dump();
    const Reply r = service.run_query(body);
    REQUIRE(r.status == 200);
    const QueryResult expected = query(fx.db, fx.ds.cases[1].image, click, {.exclude_id = "synth_1"});
    CHECK(r.body == to_json(expected).dump());
    const json j = json::parse(r.body);
    CHECK(j["matches"].size() == 3);
    for (const auto& m : j["matches"]) CHECK(m["case_id"] != "synth_1");
  }
  SUBCASE("query with an uploaded image and m") {
    const GrayImage& img = fx.ds.cases[4].image;
    const std::string body =
        json{{"image_base64", base64_encode(encode_png(img))}, {"click", {{"x", 30}, {"y", 20}}}, {"m", 6}}.dump();
    const Reply r = service.run_query(body);
    REQUIRE(r.status == 200);
    CHECK(r.body == to_json(query(fx.db, img, {30, 20}, {.top_m = 6})).dump());
    const json j = json::parse(r.body);
    CHECK(j["matches"][0]["case_id"] == "synth_4");
  }
  SUBCASE("m=1 with an exact duplicate returns the duplicate's box") {
    IndexDatabase dup = fx.db;
    CaseRecord copy = dup.cases[2];
    copy.case_id = "copy_of_2";
    dup.cases.push_back(copy);
    service.set_index(dup);
    const Click click = simulate_click(fx.ds.cases[2].gt);
    const std::string body =
        json{{"case_id", "synth_2"}, {"click", {{"x", click.x}, {"y", click.y}}}, {"m", 1}}.dump();
    const Reply r = service.run_query(body);
    REQUIRE(r.status == 200);
    const json j = json::parse(r.body);
    CHECK(j["matches"][0]["case_id"] == "copy_of_2");
    const BoundingBox& gt = fx.ds.cases[2].gt;
    CHECK(j["estimated_bbox"] == json{{"x_s", gt.x_s}, {"y_s", gt.y_s}, {"x_e", gt.x_e}, {"y_e", gt.y_e}});
  }
  SUBCASE("empty index lists no cases") {
    service.set_index(IndexDatabase{fast_config(), {}});
    const Reply r = service.list_cases();
    CHECK(r.status == 200);
    CHECK(r.body == "[]");
  }
  SUBCASE("identical requests give identical bodies") {
    const std::string body = R"({"case_id":"synth_3","click":{"x":20,"y":30}})";
    CHECK(service.run_query(body).body == service.run_query(body).body);
  }
  SUBCASE("bad requests") {
    CHECK(service.run_query(R"({"case_id":"synth_0","click":{"x":-1,"y":-1}})").status == 400);
    CHECK(service.run_query("{").status == 400);
    CHECK(service.run_query("[]").status == 400);
    CHECK(service.run_query(R"({"case_id":"synth_0"})").status == 400);
    CHECK(service.run_query(R"({"case_id":"synth_0","click":{"x":"a","y":1}})").status == 400);
    CHECK(service.run_query(R"({"case_id":"synth_0","click":{"x":64,"y":1}})").status == 400);
    CHECK(service.run_query(R"({"case_id":"synth_0","click":{"x":1,"y":1},"m":0})").status == 400);
    CHECK(service.run_query(R"({"case_id":"ghost","click":{"x":1,"y":1}})").status == 404);
    CHECK(service.run_query(R"({"image_base64":"bm90IGFuIGltYWdl","click":{"x":1,"y":1}})").status == 400);
    CHECK(service.run_query(R"({"click":{"x":1,"y":1}})").status == 400);
  }
  SUBCASE("reload swaps snapshots; a failed reload keeps the old one") {
    const auto before = service.snapshot();
    IndexDatabase smaller = fx.db;
    smaller.cases.resize(2);
    save_index(smaller, fx.index_path);
    const Reply ok = service.reload_reply();
    CHECK(ok.status == 200);
    CHECK(json::parse(ok.body)["cases"] == 2);
    CHECK(before->cases.size() == 6);  // in-flight holders keep their snapshot

    std::ofstream(fx.index_path) << "garbage";
    CHECK(service.reload_reply().status == 500);
    CHECK(service.snapshot()->cases.size() == 2);
  }
}

TEST_CASE("service over a real socket") {
  Fixture fx;
  const fs::path www = fx.dir / "www";
  fs::create_directories(www);
  std::ofstream(www / "index.html") << "<html>viewer</html>";
  Service service({fx.index_path, www, "http://viewer.example"});
  service.reload();
  httplib::Server server;
  service.register_routes(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const auto cases = client.Get("/api/cases");
  REQUIRE(cases);
  CHECK(cases->status == 200);
  CHECK(cases->get_header_value("Access-Control-Allow-Origin") == "http://viewer.example");
  CHECK(json::parse(cases->body).size() == 6);

  const auto image = client.Get("/api/image/synth_3");
  REQUIRE(image);
  CHECK(image->status == 200);
  CHECK(image->get_header_value("Content-Type") == "image/png");

  const auto page = client.Get("/index.html");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body == "<html>viewer</html>");

  const auto missing = client.Get("/api/image/nope");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  const auto preflight = client.Options("/api/query");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);

  const Click click = simulate_click(fx.ds.cases[0].gt);
  const std::string body = json{{"case_id", "synth_0"}, {"click", {{"x", click.x}, {"y", click.y}}}}.dump();
  const auto first = client.Post("/api/query", body, "application/json");
  REQUIRE(first);
  CHECK(first->status == 200);

  SUBCASE("concurrent queries while reloading") {
    std::vector<std::thread> workers;
    std::atomic<int> good{0};
    for (int t = 0; t < 4; ++t) {
      workers.emplace_back([&] {
        httplib::Client c("127.0.0.1", port);
        for (int i = 0; i < 5; ++i) {
          const auto res = c.Post("/api/query", body, "application/json");
          if (res && res->status == 200 && res->body == first->body) ++good;
        }
      });
    }
    for (int i = 0; i < 5; ++i) {
      const auto res = client.Post("/api/reload", "", "application/json");
      REQUIRE(res);
      CHECK(res->status == 200);
    }
    for (auto& w : workers) w.join();
    CHECK(good == 20);
  }

  server.stop();
  listener.join();
}
