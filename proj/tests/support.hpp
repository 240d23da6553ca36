#pragma once

// Independent reference implementations and random inputs for the tests.

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cathreg/cathreg.hpp"

namespace cathreg::test {

inline Point3 random_point(std::mt19937_64& rng, double lo = -10.0, double hi = 10.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Point3 p;
  for (int k = 0; k < 3; ++k) p[k] = u(rng);
  return p;
}

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double lo = -10.0, double hi = 10.0) {
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_point(rng, lo, hi));
  return out;
}

inline Path3 random_path(std::mt19937_64& rng, std::size_t n, Frame frame = Frame::Preop) {
  return Path3(random_points(rng, n), frame);
}

// Rotation from a normalized Gaussian quaternion (uniform on SO(3)).
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  double q[4];
  for (double& v : q) v = g(rng);
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_translation = 100.0) {
  return {random_rotation(rng), random_point(rng, -max_translation, max_translation)};
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline double dist(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x(), dy = a.y() - b.y(), dz = a.z() - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Minimum cost over every monotone boundary-anchored alignment, each summed
// from (0,0) forward. `admissible` filters cells (band constraint).
inline double enumerate_min_alignment_cost(std::span<const Point3> a, std::span<const Point3> b,
                                           const std::function<bool(std::size_t, std::size_t)>& admissible = {}) {
  const std::size_t n = a.size(), m = b.size();
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    if (admissible && !admissible(i, j)) return;
    acc = acc + dist(a[i], b[j]);
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

// Horn's closed-form absolute orientation via the 4x4 quaternion matrix.
inline RigidTransform horn_fit(std::span<const Point3> src, std::span<const Point3> dst) {
  Point3 cs = Point3::Zero(), cd = Point3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) s += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::Matrix4d n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(n);
  const Eigen::Vector4d q = es.eigenvectors().col(3);
  RigidTransform t;
  t.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
  t.translation = cd - t.rotation * cs;
  return t;
}

// Point at index parameter u in [0, n-1] on the piecewise-linear curve.
inline Point3 polyline_at_index(std::span<const Point3> pts, double u) {
  const auto last = pts.size() - 1;
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::floor(u)), last - 1);
  const double f = u - static_cast<double>(k);
  return pts[k] * (1.0 - f) + pts[k + 1] * f;
}

inline double translation_error(const RigidTransform& estimate, const RigidTransform& truth) {
  return (estimate.translation - truth.translation).norm();
}

inline double rotation_error_deg(const RigidTransform& estimate, const RigidTransform& truth) {
  return rotation_angle_deg(estimate.rotation * truth.rotation.transpose());
}

}  // namespace cathreg::test
