#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "radon_roi/case_index.hpp"

namespace radon_roi {

/// A user click in image coordinates (x = column, y = row).
struct Click {
  int x = 0;
  int y = 0;
  bool operator==(const Click&) const = default;
};

/**
 * Box of half-extent (delta * C, delta * R) centred on the click, clamped to
 * the image. Throws InvalidArgument if the click is outside [0, C-1] x [0, R-1].
 */
BoundingBox query_bbox_from_click(Click click, int width, int height, double delta);

struct RankedCase {
  std::size_t index = 0;  ///< position in IndexDatabase::cases
  std::string case_id;
  long d_global = 0;
  long d_roi = 0;
  long d_total = 0;
};

/**
 * Every case (minus `exclude_id`, if given) ranked ascending by
 * d_total = hamming(global) + hamming(roi), ties broken by case_id. With
 * config.normalize_terms each term is scaled by the other barcode's length.
 */
std::vector<RankedCase> rank_cases(const IndexDatabase& db, const RadonBarcode& query_global,
                                   const RadonBarcode& query_roi, std::optional<std::string_view> exclude_id = {});

/**
 * w(i) = 1 - v(i) / max_j v(j). When every distance is equal (including the
 * all-zero and single-match cases) the formula has no usable weights, so every
 * match gets weight 1.
 */
std::vector<double> compute_weights(std::span<const long> distances);

struct WeightedBox {
  BoundingBox box;
  int width = 0;   ///< dimensions of the image the box belongs to
  int height = 0;
  double weight = 0.0;
};

/// Box corners as fractions of (C-1, R-1).
struct NormalizedBox {
  double x_s = 0, y_s = 0, x_e = 0, y_e = 0;
};

NormalizedBox normalize(const BoundingBox& box, int width, int height);

/// Weighted mean of normalized corners. Throws on empty input or zero weight sum.
NormalizedBox weighted_mean(std::span<const WeightedBox> boxes);

/// weighted_mean() mapped into a width x height frame: rounded, clamped, ordered.
BoundingBox estimate_bbox(std::span<const WeightedBox> boxes, int width, int height);

/// 2 |a n b| / (|a| + |b|) over inclusive pixel counts.
double dice(const BoundingBox& a, const BoundingBox& b);

struct Match {
  std::string case_id;
  long d_total = 0;
  double weight = 0.0;
};

struct QueryResult {
  BoundingBox estimated_bbox;
  BoundingBox query_bbox;
  std::vector<Match> matches;  ///< top-M, ascending by d_total
};

struct QueryOptions {
  /// Overrides config.top_m when set.
  std::optional<int> top_m;
  /// Case left out of the ranking (self-exclusion).
  std::optional<std::string> exclude_id;
};

/// Full query on a raw image: preprocess, click box, barcodes, rank, weight, estimate.
QueryResult query(const IndexDatabase& db, const GrayImage& img, Click click, const QueryOptions& options = {});

/// Same, for an image already passed through preprocess() with db.config.
QueryResult query_preprocessed(const IndexDatabase& db, const GrayImage& preprocessed, Click click,
                               const QueryOptions& options = {});

nlohmann::ordered_json to_json(const QueryResult& result);

/// Rounds to 6 decimals so serialized reals are stable.
double round6(double v);

}  // namespace radon_roi
