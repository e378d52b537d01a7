#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "radon_roi/case_index.hpp"

namespace httplib {
class Server;
}

namespace radon_roi {

struct ServiceOptions {
  /// Index loaded by reload(); empty means the index is supplied via set_index().
  std::filesystem::path index_path;
  /// Served at "/" when non-empty.
  std::filesystem::path static_dir;
  std::string cors_origin = "*";
};

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/**
 * HTTP facade over an immutable index snapshot.
 *
 *   GET  /api/cases        -> [{case_id, dims:{width,height}, bbox}]
 *   GET  /api/image/{id}   -> image/png
 *   POST /api/query        -> QueryResult JSON
 *   POST /api/reload       -> {"cases": N}
 *
 * Each request works on the snapshot current when it started; reload swaps in
 * a fully built replacement.
 */
class Service {
 public:
  explicit Service(ServiceOptions options);

  /// Loads options.index_path and swaps it in. On failure the old snapshot stays.
  void reload();
  void set_index(IndexDatabase db);
  std::shared_ptr<const IndexDatabase> snapshot() const;

  Reply list_cases() const;
  Reply case_image(const std::string& case_id) const;
  /**
   * Body: {"case_id": id | "image_base64": PNG/PGM bytes, "click": {"x", "y"}, "m"?}.
   * A query by case_id ranks against the index without that case.
   */
  Reply run_query(const std::string& body) const;
  Reply reload_reply();

  void register_routes(httplib::Server& server);

 private:
  std::filesystem::path image_file(const CaseRecord& record) const;

  ServiceOptions options_;
  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const IndexDatabase> snapshot_;
};

std::string base64_decode(std::string_view text);

}  // namespace radon_roi
