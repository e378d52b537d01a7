#include "radon_roi/service.hpp"

#include "httplib.h"

#include "radon_roi/roi_search.hpp"

namespace radon_roi {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Reply error_reply(int status, const std::string& message) {
  return {status, "application/json", ordered_json{{"error", message}}.dump()};
}

Reply json_reply(const ordered_json& j) { return {200, "application/json", j.dump()}; }

}  // namespace

std::string base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string out;
  out.reserve(text.size() * 3 / 4);
  unsigned buffer = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=' || c == '\n' || c == '\r' || c == ' ') continue;
    const int v = value(c);
    if (v < 0) throw FormatError("invalid base64 character");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return out;
}

Service::Service(ServiceOptions options) : options_(std::move(options)) {}

void Service::reload() {
  if (options_.index_path.empty()) throw InvalidArgument("service has no index path to reload from");
  auto fresh = std::make_shared<const IndexDatabase>(load_index(options_.index_path));
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(fresh);
}

void Service::set_index(IndexDatabase db) {
  db.validate();
  auto fresh = std::make_shared<const IndexDatabase>(std::move(db));
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(fresh);
}

std::shared_ptr<const IndexDatabase> Service::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

std::filesystem::path Service::image_file(const CaseRecord& record) const {
  std::filesystem::path p(record.image_path);
  if (p.is_relative() && !options_.index_path.empty()) p = options_.index_path.parent_path() / p;
  return p;
}

Reply Service::list_cases() const {
  const auto db = snapshot();
  if (!db) return error_reply(503, "no index loaded");
  ordered_json cases = ordered_json::array();
  for (const auto& c : db->cases) {
    cases.push_back({{"case_id", c.case_id},
                     {"dims", {{"width", c.width}, {"height", c.height}}},
                     {"bbox", to_json(c.bbox)}});
  }
  return json_reply(cases);
}

Reply Service::case_image(const std::string& case_id) const {
  const auto db = snapshot();
  if (!db) return error_reply(503, "no index loaded");
  const CaseRecord* record = db->find(case_id);
  if (!record) return error_reply(404, "unknown case_id: " + case_id);
  try {
    const auto png = encode_png(load_grayscale(image_file(*record)));
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const Error& e) {
    return error_reply(500, e.what());
  }
}

Reply Service::run_query(const std::string& body) const {
  const auto db = snapshot();
  if (!db) return error_reply(503, "no index loaded");

  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return error_reply(400, "request body is not valid JSON");
  }
  if (!request.is_object()) return error_reply(400, "request body must be a JSON object");

  Click click;
  QueryOptions options;
  try {
    const auto& c = request.at("click");
    click = {c.at("x").get<int>(), c.at("y").get<int>()};
    if (request.contains("m")) {
      options.top_m = request.at("m").get<int>();
      if (*options.top_m < 1) return error_reply(400, "m must be >= 1");
    }
  } catch (const json::exception&) {
    return error_reply(400, "request needs click {x, y} as integers (and optional integer m)");
  }

  GrayImage image;
  if (request.contains("case_id") && request["case_id"].is_string()) {
    const auto id = request["case_id"].get<std::string>();
    const CaseRecord* record = db->find(id);
    if (!record) return error_reply(404, "unknown case_id: " + id);
    try {
      image = load_grayscale(image_file(*record));
    } catch (const Error& e) {
      return error_reply(500, e.what());
    }
    options.exclude_id = id;
    if (db->cases.size() < 2) return error_reply(400, "index has no other case to compare against");
  } else if (request.contains("image_base64") && request["image_base64"].is_string()) {
    try {
      const std::string bytes = base64_decode(request["image_base64"].get<std::string>());
      image = decode_grayscale({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()});
    } catch (const Error& e) {
      return error_reply(400, std::string("bad uploaded image: ") + e.what());
    }
  } else {
    return error_reply(400, "request needs case_id or image_base64");
  }

  if (click.x < 0 || click.y < 0 || click.x >= image.width() || click.y >= image.height()) {
    return error_reply(400, "click (" + std::to_string(click.x) + "," + std::to_string(click.y) +
                                ") outside image bounds [0," + std::to_string(image.width() - 1) + "]x[0," +
                                std::to_string(image.height() - 1) + "]");
  }
  if (db->cases.empty()) return error_reply(400, "index is empty");
  try {
    return json_reply(to_json(query(*db, image, click, options)));
  } catch (const InvalidArgument& e) {
    return error_reply(400, e.what());
  }
}

Reply Service::reload_reply() {
  try {
    reload();
  } catch (const Error& e) {
    return error_reply(500, e.what());
  }
  return json_reply({{"cases", snapshot()->cases.size()}});
}

void Service::register_routes(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& reply) {
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  server.Get("/api/cases", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, list_cases());
  });
  server.Get(R"(/api/image/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, case_image(req.matches[1]));
  });
  server.Post("/api/query", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, run_query(req.body));
  });
  server.Post("/api/reload", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, reload_reply());
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  const std::string origin = options_.cors_origin;
  server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  if (!options_.static_dir.empty()) {
    if (!server.set_mount_point("/", options_.static_dir.string())) {
      throw IoError("static directory not found: " + options_.static_dir.string());
    }
  }
}

}  // namespace radon_roi
