#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

using namespace cathreg;
using namespace cathreg::test;

namespace {

Path3 line_path(std::initializer_list<double> xs) {
  std::vector<Point3> pts;
  for (const double x : xs) pts.emplace_back(x, 0.0, 0.0);
  return Path3(pts, Frame::Preop);
}

WarpPath diagonal_warp(std::size_t n, std::vector<double> costs = {}) {
  WarpPath w;
  if (costs.empty()) costs.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    w.pairs.push_back({k, k});
    w.pair_costs.push_back(costs[k]);
    w.total_cost += costs[k];
  }
  return w;
}

Path3 indexed_path(std::size_t n) {
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(static_cast<double>(i), 0.5 * static_cast<double>(i * i), 1.0);
  return Path3(pts, Frame::Preop);
}

}  // namespace

TEST_SUITE("dtw_align") {
  TEST_CASE("identical signals align on the diagonal at zero cost") {
    std::mt19937_64 rng(20);
    const Path3 a = random_path(rng, 8);
    const WarpPath w = dtw_align(a, a);
    REQUIRE(w.size() == 8);
    for (std::size_t k = 0; k < 8; ++k) CHECK(w.pairs[k] == IndexPair{k, k});
    CHECK(w.total_cost == 0.0);
  }

  TEST_CASE("three against two prefers the diagonal") {
    const WarpPath w = dtw_align(line_path({0, 1, 2}), line_path({0, 2}));
    CHECK(w.total_cost == 1.0);
    REQUIRE(w.size() == 3);
    CHECK(w.pairs[0] == IndexPair{0, 0});
    CHECK(w.pairs[1] == IndexPair{1, 0});
    CHECK(w.pairs[2] == IndexPair{2, 1});
    const double oracle = enumerate_min_alignment_cost(line_path({0, 1, 2}).points(), line_path({0, 2}).points());
    CHECK(w.total_cost == oracle);
  }

  TEST_CASE("single-point second signal") {
    std::mt19937_64 rng(21);
    const Path3 a = random_path(rng, 7);
    const Path3 b = random_path(rng, 1);
    const WarpPath w = dtw_align(a, b);
    REQUIRE(w.size() == 7);
    double sum = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(w.pairs[i] == IndexPair{i, 0});
      sum += dist(a[i], b[0]);
    }
    CHECK(w.total_cost == doctest::Approx(sum).epsilon(1e-14));
  }

  TEST_CASE("matches exhaustive enumeration exactly") {
    std::mt19937_64 rng(22);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    for (int trial = 0; trial < 300; ++trial) {
      const Path3 a = random_path(rng, len(rng));
      const Path3 b = random_path(rng, len(rng));
      const WarpPath w = dtw_align(a, b);
      CHECK(w.total_cost == enumerate_min_alignment_cost(a.points(), b.points()));
      CHECK(check_warp_path(w, a.size(), b.size()) == "");
    }
  }

  TEST_CASE("banded alignment is optimal within the band") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::size_t> len(2, 6), radius(0, 3);
    int feasible = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const Path3 a = random_path(rng, len(rng));
      const Path3 b = random_path(rng, len(rng));
      const std::size_t r = radius(rng);
      const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
      auto inside = [&](std::size_t i, std::size_t j) {
        return std::abs(static_cast<double>(i) * (m - 1.0) / (n - 1.0) - static_cast<double>(j)) <=
               static_cast<double>(r);
      };
      const double oracle = enumerate_min_alignment_cost(a.points(), b.points(), inside);
      if (std::isinf(oracle)) {
        CHECK_THROWS_AS(dtw_align(a, b, r), Error);
        continue;
      }
      ++feasible;
      const WarpPath w = dtw_align(a, b, r);
      CHECK(w.total_cost == oracle);
      CHECK(check_warp_path(w, a.size(), b.size()) == "");
      for (const auto& p : w.pairs) CHECK(inside(p.centerline, p.em));
    }
    CHECK(feasible > 100);
  }

  TEST_CASE("a wide band changes nothing") {
    std::mt19937_64 rng(24);
    const Path3 a = random_path(rng, 30);
    const Path3 b = random_path(rng, 45);
    const WarpPath free = dtw_align(a, b);
    const WarpPath banded = dtw_align(a, b, 100);
    CHECK(free.pairs == banded.pairs);
    CHECK(free.total_cost == banded.total_cost);
  }

  TEST_CASE("infeasible band") {
    const Path3 a = line_path({0, 1, 2, 3, 4, 5, 6, 7});
    const Path3 b = line_path({0, 7});
    try {
      dtw_align(a, b, 0);
      FAIL("expected InfeasibleBand");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InfeasibleBand);
    }
  }

  TEST_CASE("symmetry and isometry invariance") {
    std::mt19937_64 rng(25);
    std::uniform_int_distribution<std::size_t> len(1, 40);
    for (int trial = 0; trial < 100; ++trial) {
      const Path3 a = random_path(rng, len(rng));
      const Path3 b = random_path(rng, len(rng));
      const WarpPath ab = dtw_align(a, b);
      const WarpPath ba = dtw_align(b, a);
      CHECK(ab.total_cost == doctest::Approx(ba.total_cost).epsilon(1e-12));
      const RigidTransform g = random_transform(rng);
      const WarpPath moved = dtw_align(apply_transform(g, a, Frame::Em), apply_transform(g, b, Frame::Em));
      CHECK(std::abs(moved.total_cost - ab.total_cost) <= 1e-9);
      CHECK(ab.total_cost >= 0.0);
      CHECK(check_warp_path(ab, a.size(), b.size()) == "");
      CHECK(check_warp_path(ba, b.size(), a.size()) == "");
    }
  }

  TEST_CASE("zero cost only when matched points coincide") {
    std::mt19937_64 rng(26);
    const Path3 a = random_path(rng, 10);
    std::vector<Point3> stretched;
    for (const auto& p : a.points()) {
      stretched.push_back(p);
      stretched.push_back(p);
    }
    const WarpPath w = dtw_align(a, Path3(stretched, Frame::Em));
    CHECK(w.total_cost == 0.0);
    const Path3 c = random_path(rng, 10);
    CHECK(dtw_align(a, c).total_cost > 0.0);
  }

  TEST_CASE("check_warp_path reports violations") {
    WarpPath w = diagonal_warp(4);
    CHECK(check_warp_path(w, 4, 4) == "");
    CHECK(check_warp_path(w, 5, 4) != "");
    w.pairs[2] = {1, 1};
    CHECK(check_warp_path(w, 4, 4) != "");
    WarpPath jump = diagonal_warp(3);
    jump.pairs[1] = {2, 1};
    CHECK(check_warp_path(jump, 3, 3) != "");
    WarpPath wrong_sum = diagonal_warp(3, {1, 1, 1});
    wrong_sum.total_cost = 4.0;
    CHECK(check_warp_path(wrong_sum, 3, 3) != "");
  }
}

TEST_SUITE("select_correspondences") {
  TEST_CASE("zero-cost diagonal of 30 pairs") {
    const Path3 cl = indexed_path(30);
    const CorrespondenceSet s = select_correspondences(diagonal_warp(30), cl, cl, 10);
    REQUIRE(s.size() == 30);
    for (std::size_t k = 0; k < 30; ++k) {
      CHECK(s.pairs[k].centerline_index == k);
      CHECK(s.pairs[k].segment == static_cast<int>(k / 10));
    }
    CHECK(s.warnings.empty());
  }

  TEST_CASE("crafted costs select the cheapest pair of each third") {
    const std::vector<double> costs{5, 1, 3, 2, 9, 4, 8, 7, 6};
    const Path3 cl = indexed_path(9);
    const CorrespondenceSet s = select_correspondences(diagonal_warp(9, costs), cl, cl, 1);
    REQUIRE(s.size() == 3);
    // Oracle: sort each contiguous third by cost.
    for (int seg = 0; seg < 3; ++seg) {
      std::vector<std::pair<double, std::size_t>> third;
      for (std::size_t k = 3 * static_cast<std::size_t>(seg); k < 3 * static_cast<std::size_t>(seg) + 3; ++k) third.emplace_back(costs[k], k);
      std::sort(third.begin(), third.end());
      CHECK(s.pairs[seg].centerline_index == third.front().second);
      CHECK(s.pairs[seg].pair_cost == third.front().first);
      CHECK(s.pairs[seg].segment == seg);
    }
    CHECK(s.pairs[0].pair_cost == 1.0);
    CHECK(s.pairs[1].pair_cost == 2.0);
    CHECK(s.pairs[2].pair_cost == 6.0);
  }

  TEST_CASE("points come from the given paths") {
    const Path3 cl = indexed_path(9);
    std::vector<Point3> em_pts;
    for (std::size_t i = 0; i < 9; ++i) em_pts.push_back(cl[i] + Point3(100, 0, 0));
    const Path3 em(em_pts, Frame::Em);
    const CorrespondenceSet s = select_correspondences(diagonal_warp(9), cl, em, 2);
    for (const auto& c : s.pairs) {
      CHECK(c.centerline_point == cl[c.centerline_index]);
      CHECK(c.em_point == em[c.em_index]);
    }
  }

  TEST_CASE("errors and short segments") {
    const Path3 cl = indexed_path(4);
    CHECK_THROWS_AS(select_correspondences(diagonal_warp(2), cl, cl, 1), Error);
    try {
      select_correspondences(diagonal_warp(2), cl, cl, 1);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateInput);
    }
    const CorrespondenceSet s = select_correspondences(diagonal_warp(4), cl, cl, 2);
    CHECK(s.size() == 4);
    REQUIRE_FALSE(s.warnings.empty());
    CHECK(s.warnings.front().rfind("ShortSegment", 0) == 0);
  }

  TEST_CASE("size, membership and uniqueness on real alignments") {
    std::mt19937_64 rng(27);
    std::uniform_int_distribution<std::size_t> len(2, 60), per(1, 15);
    for (int trial = 0; trial < 100; ++trial) {
      const Path3 a = random_path(rng, len(rng));
      const Path3 b = random_path(rng, len(rng), Frame::Em);
      const WarpPath w = dtw_align(a, b);
      if (w.size() < 3) continue;
      const std::size_t k = per(rng);
      const CorrespondenceSet s = select_correspondences(w, a, b, k);
      const std::size_t u = w.size();
      const std::size_t sizes[3] = {u / 3 + (u % 3 > 0), u / 3 + (u % 3 > 1), u / 3};
      CHECK(s.size() == std::min(k, sizes[0]) + std::min(k, sizes[1]) + std::min(k, sizes[2]));
      std::set<std::pair<std::size_t, std::size_t>> seen;
      for (const auto& c : s.pairs) {
        CHECK(seen.insert({c.centerline_index, c.em_index}).second);
        const auto it = std::find(w.pairs.begin(), w.pairs.end(), IndexPair{c.centerline_index, c.em_index});
        REQUIRE(it != w.pairs.end());
        CHECK(w.pair_costs[static_cast<std::size_t>(it - w.pairs.begin())] == c.pair_cost);
      }
    }
  }
}
