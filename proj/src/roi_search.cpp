#include "radon_roi/roi_search.hpp"

#include <algorithm>
#include <cmath>

namespace radon_roi {

BoundingBox query_bbox_from_click(Click click, int width, int height, double delta) {
  if (click.x < 0 || click.y < 0 || click.x >= width || click.y >= height) {
    throw InvalidArgument("click (" + std::to_string(click.x) + "," + std::to_string(click.y) +
                          ") outside image bounds [0," + std::to_string(width - 1) + "]x[0," +
                          std::to_string(height - 1) + "]");
  }
  if (!(delta > 0.0 && delta <= 0.5)) throw InvalidArgument("delta must lie in (0, 0.5]");
  const double hx = delta * width;
  const double hy = delta * height;
  return {std::max(0, static_cast<int>(std::round(click.x - hx))),
          std::max(0, static_cast<int>(std::round(click.y - hy))),
          std::min(width - 1, static_cast<int>(std::round(click.x + hx))),
          std::min(height - 1, static_cast<int>(std::round(click.y + hy)))};
}

std::vector<RankedCase> rank_cases(const IndexDatabase& db, const RadonBarcode& query_global,
                                   const RadonBarcode& query_roi, std::optional<std::string_view> exclude_id) {
  const auto& cfg = db.config;
  if (query_global.num_angles() != cfg.global_angles || query_global.bins() != cfg.global_side ||
      query_roi.num_angles() != cfg.roi_angles || query_roi.bins() != cfg.roi_side) {
    throw InvalidArgument("query barcode shape does not match the index config");
  }
  const long global_weight = cfg.normalize_terms ? static_cast<long>(query_roi.size()) : 1;
  const long roi_weight = cfg.normalize_terms ? static_cast<long>(query_global.size()) : 1;

  std::vector<RankedCase> ranked;
  ranked.reserve(db.cases.size());
  for (std::size_t i = 0; i < db.cases.size(); ++i) {
    const auto& c = db.cases[i];
    if (exclude_id && c.case_id == *exclude_id) continue;
    RankedCase r;
    r.index = i;
    r.case_id = c.case_id;
    r.d_global = static_cast<long>(hamming(c.global, query_global));
    r.d_roi = static_cast<long>(hamming(c.roi, query_roi));
    r.d_total = global_weight * r.d_global + roi_weight * r.d_roi;
    ranked.push_back(std::move(r));
  }
  if (ranked.empty()) throw InvalidArgument("index has no case to rank");
  std::ranges::sort(ranked, [](const RankedCase& a, const RankedCase& b) {
    return a.d_total != b.d_total ? a.d_total < b.d_total : a.case_id < b.case_id;
  });
  return ranked;
}

std::vector<double> compute_weights(std::span<const long> distances) {
  if (distances.empty()) throw InvalidArgument("no distances to weight");
  const auto [lo, hi] = std::ranges::minmax_element(distances);
  if (*lo < 0) throw InvalidArgument("distances must be nonnegative");
  std::vector<double> w(distances.size(), 1.0);
  if (*hi == 0 || *lo == *hi) return w;
  const double max_d = static_cast<double>(*hi);
  for (std::size_t i = 0; i < distances.size(); ++i) w[i] = 1.0 - static_cast<double>(distances[i]) / max_d;
  return w;
}

NormalizedBox normalize(const BoundingBox& box, int width, int height) {
  const double sx = width > 1 ? 1.0 / (width - 1) : 0.0;
  const double sy = height > 1 ? 1.0 / (height - 1) : 0.0;
  return {box.x_s * sx, box.y_s * sy, box.x_e * sx, box.y_e * sy};
}

NormalizedBox weighted_mean(std::span<const WeightedBox> boxes) {
  if (boxes.empty()) throw InvalidArgument("no boxes to estimate from");
  NormalizedBox acc;
  double total = 0.0;
  for (const auto& b : boxes) {
    if (b.weight < 0.0) throw InvalidArgument("negative box weight");
    const NormalizedBox n = normalize(b.box, b.width, b.height);
    acc.x_s += n.x_s * b.weight;
    acc.y_s += n.y_s * b.weight;
    acc.x_e += n.x_e * b.weight;
    acc.y_e += n.y_e * b.weight;
    total += b.weight;
  }
  if (!(total > 0.0)) throw InvalidArgument("box weights sum to zero");
  return {acc.x_s / total, acc.y_s / total, acc.x_e / total, acc.y_e / total};
}

BoundingBox estimate_bbox(std::span<const WeightedBox> boxes, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("query dimensions must be positive");
  const NormalizedBox n = weighted_mean(boxes);
  auto map = [](double v, int extent) {
    return std::clamp(static_cast<int>(std::round(v * (extent - 1))), 0, extent - 1);
  };
  int xs = map(n.x_s, width);
  int ys = map(n.y_s, height);
  int xe = map(n.x_e, width);
  int ye = map(n.y_e, height);
  if (xs > xe) std::swap(xs, xe);
  if (ys > ye) std::swap(ys, ye);
  return {xs, ys, xe, ye};
}

double dice(const BoundingBox& a, const BoundingBox& b) {
  const long iw = std::min(a.x_e, b.x_e) - std::max(a.x_s, b.x_s) + 1;
  const long ih = std::min(a.y_e, b.y_e) - std::max(a.y_s, b.y_s) + 1;
  const long inter = (iw > 0 && ih > 0) ? iw * ih : 0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a.area() + b.area());
}

QueryResult query_preprocessed(const IndexDatabase& db, const GrayImage& preprocessed, Click click,
                               const QueryOptions& options) {
  const auto& cfg = db.config;
  const int m = options.top_m.value_or(cfg.top_m);
  if (m < 1) throw InvalidArgument("M must be >= 1");

  QueryResult result;
  result.query_bbox = query_bbox_from_click(click, preprocessed.width(), preprocessed.height(), cfg.delta);
  const BarcodePair codes = describe(preprocessed, result.query_bbox, cfg);

  std::optional<std::string_view> exclude;
  if (options.exclude_id) exclude = *options.exclude_id;
  auto ranked = rank_cases(db, codes.global, codes.roi, exclude);
  ranked.resize(std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(m)));

  std::vector<long> distances;
  distances.reserve(ranked.size());
  for (const auto& r : ranked) distances.push_back(r.d_total);
  const auto weights = compute_weights(distances);

  std::vector<WeightedBox> boxes;
  boxes.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = db.cases[ranked[i].index];
    boxes.push_back({c.bbox, c.width, c.height, weights[i]});
    result.matches.push_back({ranked[i].case_id, ranked[i].d_total, weights[i]});
  }
  result.estimated_bbox = estimate_bbox(boxes, preprocessed.width(), preprocessed.height());
  return result;
}

QueryResult query(const IndexDatabase& db, const GrayImage& img, Click click, const QueryOptions& options) {
  return query_preprocessed(db, preprocess(img, db.config.preprocess_options()), click, options);
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

nlohmann::ordered_json to_json(const QueryResult& result) {
  nlohmann::ordered_json matches = nlohmann::ordered_json::array();
  for (const auto& m : result.matches) {
    matches.push_back({{"case_id", m.case_id}, {"d_total", m.d_total}, {"weight", round6(m.weight)}});
  }
  return {{"estimated_bbox", to_json(result.estimated_bbox)},
          {"query_bbox", to_json(result.query_bbox)},
          {"matches", std::move(matches)}};
}

}  // namespace radon_roi
