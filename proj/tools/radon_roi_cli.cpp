// radon-roi: index, query and evaluate barcode-guided ROI estimation.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "httplib.h"

#include "radon_roi/case_index.hpp"
#include "radon_roi/eval.hpp"
#include "radon_roi/roi_search.hpp"
#include "radon_roi/service.hpp"

namespace fs = std::filesystem;
using namespace radon_roi;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  BarcodeConfig cfg;
  bool raw = false;
  CLI::App* app = nullptr;

  void attach(CLI::App* sub) {
    app = sub;
    app->add_option("--global-side", cfg.global_side, "Global barcode resize side (pixels)");
    app->add_option("--global-angles", cfg.global_angles, "Global barcode projection count");
    app->add_option("--roi-side", cfg.roi_side, "ROI barcode resize side (pixels)");
    app->add_option("--roi-angles", cfg.roi_angles, "ROI barcode projection count");
    app->add_option("--beta", cfg.beta, "Hyperbolization fuzzifier");
    app->add_option("--stick-length", cfg.stick_length, "Sticks filter length (odd)");
    app->add_option("--delta", cfg.delta, "Click box half-extent as a fraction of image dims");
    app->add_option("--m", cfg.top_m, "Number of retrieved cases (M)");
    app->add_flag("--raw", raw, "Build barcodes from the unenhanced image");
    app->add_flag("--normalize-terms", cfg.normalize_terms, "Weight global and ROI distances equally");
  }

  bool given(const std::string& name) const { return app->get_option(name)->count() > 0; }

  BarcodeConfig resolve() {
    cfg.enhance = !raw;
    try {
      cfg.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }

  /// `base` with every explicitly given barcode flag (all but --m) applied.
  BarcodeConfig overlay(BarcodeConfig base) const {
    if (given("--global-side")) base.global_side = cfg.global_side;
    if (given("--global-angles")) base.global_angles = cfg.global_angles;
    if (given("--roi-side")) base.roi_side = cfg.roi_side;
    if (given("--roi-angles")) base.roi_angles = cfg.roi_angles;
    if (given("--beta")) base.beta = cfg.beta;
    if (given("--stick-length")) base.stick_length = cfg.stick_length;
    if (given("--delta")) base.delta = cfg.delta;
    if (given("--raw")) base.enhance = !raw;
    if (given("--normalize-terms")) base.normalize_terms = cfg.normalize_terms;
    return base;
  }
};

Click parse_click(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used_x = 0, used_y = 0;
    const int x = std::stoi(text.substr(0, comma), &used_x);
    const std::string rest = text.substr(comma + 1);
    const int y = std::stoi(rest, &used_y);
    if (used_x != comma || used_y != rest.size()) throw std::invalid_argument("trailing text");
    return {x, y};
  } catch (const std::exception&) {
    throw UsageError("--click expects x,y integers, got '" + text + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void report_skipped(const std::vector<std::string>& errors) {
  for (const auto& e : errors) std::cerr << "skipped " << e << '\n';
}

DatasetLoad load_dataset(const std::string& manifest, const std::string& dir) {
  if (!manifest.empty()) return load_manifest(manifest);
  return load_image_dir(dir);
}

// --- subcommands -------------------------------------------------------------

struct IndexArgs {
  std::string manifest, dir, out;
  ConfigFlags config;
};

int cmd_index(IndexArgs& a) {
  const BarcodeConfig cfg = a.config.resolve();
  DatasetLoad load = load_dataset(a.manifest, a.dir);
  report_skipped(load.errors);
  IndexDatabase db{cfg, {}};
  for (const auto& c : load.dataset.cases) {
    try {
      db.cases.push_back(index_case(c.case_id, c.image, c.gt, cfg, c.image_path));
    } catch (const Error& e) {
      std::cerr << "skipped " << c.case_id << ": " << e.what() << '\n';
    }
  }
  if (db.cases.empty()) {
    std::cerr << "error: no valid cases to index\n";
    return kExitData;
  }
  save_index(db, a.out);
  std::cout << "indexed " << db.cases.size() << " cases -> " << a.out << '\n';
  return load.errors.empty() && db.cases.size() == load.dataset.size() ? 0 : kExitData;
}

struct QueryArgs {
  std::string index, image, click, overlay;
  ConfigFlags config;
};

int cmd_query(QueryArgs& a) {
  const Click click = parse_click(a.click);
  const BarcodeConfig flags = a.config.resolve();
  IndexDatabase db = load_index(a.index);
  if (db.cases.empty()) throw FormatError("index " + a.index + " has no cases");
  QueryOptions options;
  if (a.config.given("--m")) options.top_m = flags.top_m;
  if (!(a.config.overlay(db.config) == db.config)) {
    throw FormatError("config mismatch: barcode flags differ from the configuration stored in " + a.index);
  }
  const GrayImage image = load_grayscale(a.image);
  if (click.x < 0 || click.y < 0 || click.x >= image.width() || click.y >= image.height()) {
    throw InvalidArgument("click (" + std::to_string(click.x) + "," + std::to_string(click.y) +
                          ") outside image bounds [0," + std::to_string(image.width() - 1) + "]x[0," +
                          std::to_string(image.height() - 1) + "]");
  }
  const QueryResult result = query(db, image, click, options);
  std::cout << to_json(result).dump(2) << '\n';
  if (!a.overlay.empty()) {
    save_png(render_overlay(image, std::nullopt, result.estimated_bbox, result.query_bbox), a.overlay);
  }
  return 0;
}

struct SynthArgs {
  SynthOptions options;
  std::string out;
};

int cmd_synth(SynthArgs& a) {
  const LabeledDataset ds = generate_synthetic_dataset(a.options);
  const fs::path manifest = write_dataset(ds, a.out);
  std::cout << "wrote " << ds.size() << " cases -> " << manifest.string() << '\n';
  return 0;
}

struct EvalArgs {
  std::vector<std::uint64_t> synth;
  int width = 128, height = 128;
  std::string manifest, dir, csv = "eval_report.csv", json_out, overlay_dir;
  EvalOptions eval;
  ConfigFlags config;
};

int cmd_eval(EvalArgs& a) {
  const BarcodeConfig cfg = a.config.resolve();
  LabeledDataset ds;
  if (!a.synth.empty()) {
    SynthOptions o;
    o.seed = a.synth[0];
    o.clusters = static_cast<int>(a.synth[1]);
    o.per_cluster = static_cast<int>(a.synth[2]);
    o.width = a.width;
    o.height = a.height;
    try {
      ds = generate_synthetic_dataset(o);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  } else {
    DatasetLoad load = load_dataset(a.manifest, a.dir);
    report_skipped(load.errors);
    ds = std::move(load.dataset);
  }
  if (ds.size() < 2) {
    std::cerr << "error: dataset too small for leave-one-out (" << ds.size() << " case(s), need >= 2)\n";
    return kExitData;
  }
  const EvalReport report = leave_one_out(ds, cfg, a.eval);
  const std::string text = to_json(report).dump(2) + "\n";
  std::cout << text;
  if (!a.json_out.empty()) write_text(a.json_out, text);
  if (!a.csv.empty()) write_text(a.csv, to_csv(report));
  if (!a.overlay_dir.empty()) {
    fs::create_directories(a.overlay_dir);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& c = report.cases[i];
      save_png(render_overlay(ds.cases[i].image, c.gt, c.estimated),
               fs::path(a.overlay_dir) / (c.case_id + ".png"));
    }
  }
  return 0;
}

struct ServeArgs {
  std::string index, static_dir, host = "0.0.0.0", cors = "*";
  int port = 8080;
};

int cmd_serve(ServeArgs& a) {
  Service service({a.index, a.static_dir, a.cors});
  service.reload();
  httplib::Server server;
  service.register_routes(server);
  std::cerr << "serving " << service.snapshot()->cases.size() << " cases on http://" << a.host << ':' << a.port
            << '\n';
  if (!server.listen(a.host, a.port)) {
    std::cerr << "error: cannot listen on " << a.host << ':' << a.port << '\n';
    return kExitData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radon barcode ROI estimation: index cases, query by click, leave-one-out evaluation"};
  app.require_subcommand(1);

  IndexArgs index_args;
  auto* index = app.add_subcommand("index", "Index images with ground truth into an index file");
  auto* src = index->add_option_group("input");
  src->add_option("--manifest", index_args.manifest, "JSON-lines manifest {case_id, image, mask|bbox}")
      ->check(CLI::ExistingFile);
  src->add_option("--dir", index_args.dir, "Directory of <id>.png + <id>_mask.png")->check(CLI::ExistingDirectory);
  src->require_option(1);
  index->add_option("--out,-o", index_args.out, "Index file to write")->required();
  index_args.config.attach(index);

  QueryArgs query_args;
  auto* query = app.add_subcommand("query", "Estimate a tumour box for a new image from a centre click");
  query->add_option("--index", query_args.index, "Index file")->required();
  query->add_option("--image", query_args.image, "Query image (PNG or PGM)")->required();
  query->add_option("--click", query_args.click, "Tumour centre as x,y (column,row)")->required();
  query->add_option("--overlay", query_args.overlay, "Write an overlay PNG of the estimate");
  query_args.config.attach(query);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset");
  synth->add_option("--seed", synth_args.options.seed, "Random seed");
  synth->add_option("--clusters,-k", synth_args.options.clusters, "Number of lesion clusters");
  synth->add_option("--per-cluster,-n", synth_args.options.per_cluster, "Cases per cluster");
  synth->add_option("--width", synth_args.options.width, "Image width");
  synth->add_option("--height", synth_args.options.height, "Image height");
  synth->add_option("--out,-o", synth_args.out, "Output directory")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Leave-one-out evaluation");
  auto* data = eval->add_option_group("dataset");
  data->add_option("--synth", eval_args.synth, "Synthetic dataset: seed K n")->expected(3);
  data->add_option("--manifest", eval_args.manifest, "JSON-lines manifest")->check(CLI::ExistingFile);
  data->add_option("--dir", eval_args.dir, "Directory of <id>.png + <id>_mask.png")->check(CLI::ExistingDirectory);
  data->require_option(1);
  eval->add_option("--width", eval_args.width, "Synthetic image width");
  eval->add_option("--height", eval_args.height, "Synthetic image height");
  eval->add_option("--csv", eval_args.csv, "Per-case CSV output (empty to skip)");
  eval->add_option("--json", eval_args.json_out, "Also write the report JSON here");
  eval->add_option("--overlay-dir", eval_args.overlay_dir, "Write per-case overlay PNGs");
  eval->add_option("--click-jitter", eval_args.eval.click_jitter, "Max click offset in pixels (0 = off)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--jitter-seed", eval_args.eval.jitter_seed, "Seed for click jitter");
  eval_args.config.attach(eval);

  ServeArgs serve_args;
  if (const char* port = std::getenv("RADON_ROI_PORT")) serve_args.port = std::atoi(port);
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--index", serve_args.index, "Index file")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", serve_args.port, "Port (default $RADON_ROI_PORT or 8080)");
  serve->add_option("--host", serve_args.host, "Bind address");
  serve->add_option("--static-dir", serve_args.static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--cors-origin", serve_args.cors, "Access-Control-Allow-Origin value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*index) return cmd_index(index_args);
    if (*query) return cmd_query(query_args);
    if (*synth) return cmd_synth(synth_args);
    if (*eval) return cmd_eval(eval_args);
    if (*serve) return cmd_serve(serve_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
