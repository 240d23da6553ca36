#include "cathreg/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cathreg/error.hpp"

namespace cathreg {

std::string check_warp_path(const WarpPath& warp, std::size_t n, std::size_t m) {
  if (warp.pairs.empty()) return "warp path is empty";
  if (warp.pair_costs.size() != warp.pairs.size()) return "pair_costs length differs from pairs length";
  if (warp.pairs.front() != IndexPair{0, 0}) return "warp path does not start at (0,0)";
  if (n == 0 || m == 0 || warp.pairs.back() != IndexPair{n - 1, m - 1}) return "warp path does not end at (n-1,m-1)";
  double sum = 0.0;
  for (std::size_t k = 0; k < warp.pairs.size(); ++k) {
    const auto& p = warp.pairs[k];
    if (p.centerline >= n || p.em >= m) return "index out of range at pair " + std::to_string(k);
    if (!(warp.pair_costs[k] >= 0.0)) return "negative or NaN pair cost at pair " + std::to_string(k);
    sum += warp.pair_costs[k];
    if (k == 0) continue;
    const auto& q = warp.pairs[k - 1];
    if (p.centerline < q.centerline || p.em < q.em) return "non-monotone step at pair " + std::to_string(k);
    const auto di = p.centerline - q.centerline;
    const auto dj = p.em - q.em;
    if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return "illegal step at pair " + std::to_string(k);
  }
  if (std::abs(sum - warp.total_cost) > 1e-9 * std::max(1.0, std::abs(sum))) {
    return "total_cost differs from the sum of pair costs";
  }
  return {};
}

WarpPath dtw_align(const Path3& a, const Path3& b, std::optional<std::size_t> band_radius) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  auto admissible = [&](std::size_t i, std::size_t j) {
    if (!band_radius) return true;
    const double center = n > 1 ? static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(n - 1) : 0.0;
    return std::abs(center - static_cast<double>(j)) <= static_cast<double>(*band_radius);
  };
  auto local = [&](std::size_t i, std::size_t j) { return (a[i] - b[j]).norm(); };

  std::vector<double> acc(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!admissible(i, j)) continue;
      if (i == 0 && j == 0) {
        at(0, 0) = local(0, 0);
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = std::min(best, at(i - 1, j - 1));
      if (j > 0) best = std::min(best, at(i, j - 1));
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (best < inf) at(i, j) = local(i, j) + best;
    }
  }

  if (!(at(n - 1, m - 1) < inf)) {
    throw Error(ErrorKind::InfeasibleBand, "no monotone path fits inside a band of radius " +
                                               std::to_string(band_radius.value_or(0)) + " for lengths " +
                                               std::to_string(n) + " and " + std::to_string(m));
  }

  WarpPath warp;
  warp.total_cost = at(n - 1, m - 1);
  std::size_t i = n - 1;
  std::size_t j = m - 1;
  while (true) {
    warp.pairs.push_back({i, j});
    warp.pair_costs.push_back(local(i, j));
    if (i == 0 && j == 0) break;
    // Tie order: diagonal, then the step that advanced j, then the one that advanced i.
    std::size_t ni = i;
    std::size_t nj = j;
    double best = inf;
    if (i > 0 && j > 0 && at(i - 1, j - 1) < best) {
      best = at(i - 1, j - 1);
      ni = i - 1;
      nj = j - 1;
    }
    if (j > 0 && at(i, j - 1) < best) {
      best = at(i, j - 1);
      ni = i;
      nj = j - 1;
    }
    if (i > 0 && at(i - 1, j) < best) {
      best = at(i - 1, j);
      ni = i - 1;
      nj = j;
    }
    i = ni;
    j = nj;
  }
  std::reverse(warp.pairs.begin(), warp.pairs.end());
  std::reverse(warp.pair_costs.begin(), warp.pair_costs.end());
  return warp;
}

CorrespondenceSet select_correspondences(const WarpPath& warp, const Path3& centerline, const Path3& em,
                                         std::size_t per_segment) {
  if (per_segment < 1) {
    throw Error(ErrorKind::InvalidArgument, "per_segment must be at least 1");
  }
  if (warp.pairs.size() < 3) {
    throw Error(ErrorKind::DegenerateInput, "warp path needs at least 3 pairs to form three segments");
  }
  if (const auto problem = check_warp_path(warp, centerline.size(), em.size()); !problem.empty()) {
    throw Error(ErrorKind::InvalidArgument, "warp path does not fit the given paths: " + problem);
  }

  CorrespondenceSet out;
  const std::size_t total = warp.pairs.size();
  const std::size_t base = total / 3;
  const std::size_t remainder = total % 3;
  std::size_t begin = 0;
  for (int segment = 0; segment < 3; ++segment) {
    const std::size_t length = base + (static_cast<std::size_t>(segment) < remainder ? 1 : 0);
    std::vector<std::size_t> order(length);
    std::iota(order.begin(), order.end(), begin);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      const auto& px = warp.pairs[x];
      const auto& py = warp.pairs[y];
      if (warp.pair_costs[x] != warp.pair_costs[y]) return warp.pair_costs[x] < warp.pair_costs[y];
      if (px.centerline != py.centerline) return px.centerline < py.centerline;
      return px.em < py.em;
    });
    if (length < per_segment) {
      out.warnings.push_back("ShortSegment: segment " + std::to_string(segment) + " holds " + std::to_string(length) +
                             " pairs, fewer than the requested " + std::to_string(per_segment));
    }
    order.resize(std::min(length, per_segment));
    // Report in warp-path order.
    std::sort(order.begin(), order.end());
    for (const auto k : order) {
      const auto& p = warp.pairs[k];
      out.pairs.push_back({centerline[p.centerline], em[p.em], p.centerline, p.em, warp.pair_costs[k], segment});
    }
    begin += length;
  }
  return out;
}

}  // namespace cathreg
