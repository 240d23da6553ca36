#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cathreg/geometry.hpp"

namespace cathreg {

/// Matched index pair: `centerline` indexes the first DTW input, `em` the second.
struct IndexPair {
  std::size_t centerline = 0;
  std::size_t em = 0;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Monotone, boundary-anchored alignment between two sequences.
struct WarpPath {
  std::vector<IndexPair> pairs;
  std::vector<double> pair_costs;  ///< Euclidean distance of each matched pair
  double total_cost = 0.0;

  std::size_t size() const noexcept { return pairs.size(); }
};

/// Empty string when `warp` is a valid alignment of sequences of length
/// `n` (first index) and `m` (second index); otherwise the first violation.
std::string check_warp_path(const WarpPath& warp, std::size_t n, std::size_t m);

/// Dependent (multivariate) DTW with local cost |a[i] - b[j]|.
///
/// Steps (1,1), (1,0), (0,1) with unit weights, anchored at (0,0) and
/// (n-1,m-1). The backtrack prefers the diagonal, then the step that advanced
/// the second index, then the first. With `band_radius`, only cells with
/// |i * (m-1)/(n-1) - j| <= band_radius are admissible; throws InfeasibleBand
/// if no path survives.
WarpPath dtw_align(const Path3& a, const Path3& b, std::optional<std::size_t> band_radius = std::nullopt);

struct Correspondence {
  Point3 centerline_point;
  Point3 em_point;
  std::size_t centerline_index = 0;
  std::size_t em_index = 0;
  double pair_cost = 0.0;
  int segment = 0;  ///< 0, 1 or 2
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

/// Lowest-cost pairs from each third of the warp path.
///
/// The pairs are split into three contiguous runs by pair count (remainder
/// to the earlier runs). Each run contributes its `per_segment` cheapest
/// pairs, ties going to the smaller centerline index and then the smaller EM
/// index; a run shorter than `per_segment` contributes everything and adds a
/// ShortSegment warning. Points are read from the given un-normalized paths.
CorrespondenceSet select_correspondences(const WarpPath& warp, const Path3& centerline, const Path3& em,
                                         std::size_t per_segment);

}  // namespace cathreg
