#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace cathreg {

/// 3D position in millimeters.
using Point3 = Eigen::Vector3d;

/// Coordinate space a path is expressed in.
enum class Frame { Preop, Em, Intraop };

std::string_view to_string(Frame frame) noexcept;
/// Throws ParseError on anything other than "preop", "em", "intraop" (case-insensitive).
Frame frame_from_string(std::string_view text);

/// Ordered 3D polyline, optionally timestamped, tagged with its frame.
///
/// Construction validates: at least one point, every coordinate finite,
/// timestamps (when given) of matching length and strictly increasing.
class Path3 {
 public:
  Path3(std::vector<Point3> points, Frame frame, std::optional<std::vector<double>> timestamps = std::nullopt);

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Point3> points() const noexcept { return points_; }
  const std::optional<std::vector<double>>& timestamps() const noexcept { return timestamps_; }
  bool has_timestamps() const noexcept { return timestamps_.has_value(); }
  Frame frame() const noexcept { return frame_; }

  Path3 with_frame(Frame frame) const;

  friend bool operator==(const Path3&, const Path3&) = default;

 private:
  std::vector<Point3> points_;
  std::optional<std::vector<double>> timestamps_;
  Frame frame_;
};

/// Proper rigid motion p -> R p + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  /// Orthonormal with det = +1, both within `tol`.
  bool is_proper(double tol = 1e-9) const;

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;
};

/// `outer` after `inner`: p -> outer(inner(p)).
RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);
RigidTransform invert_transform(const RigidTransform& transform);
Path3 apply_transform(const RigidTransform& transform, const Path3& path, Frame out_frame);

/// Rotation angle of R in degrees, in [0, 180].
double rotation_angle_deg(const Eigen::Matrix3d& rotation);

/// Proper rotation of `angle_rad` about `axis` (need not be unit length).
Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle_rad);

/// Per-axis map recorded by normalize_minmax: original = scale * normalized + offset.
struct AxisAffine {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();

  Point3 to_original(const Point3& normalized) const;
};

enum class ResampleMode {
  IndexUniform,  ///< uniform in the cumulative point-index parameter
  ArcLength,     ///< uniform in polyline arc length
};

/// Resample onto exactly `count` points along the piecewise-linear curve.
/// Endpoints are preserved exactly; timestamps are dropped.
Path3 resample_uniform(const Path3& path, std::size_t count, ResampleMode mode = ResampleMode::IndexUniform);

/// Independent min-max map of each axis onto [-1, 1]. A zero-extent axis maps
/// to 0 and records scale 0.
std::pair<Path3, AxisAffine> normalize_minmax(const Path3& path);

/// Least-squares proper rigid transform taking `src` onto `dst` (equal weights).
///
/// Centroids are removed and the 3x3 cross-covariance is decomposed by SVD;
/// a negative determinant flips the weakest singular direction so the result
/// is never a reflection.
RigidTransform rigid_fit_corresponded(std::span<const Point3> src, std::span<const Point3> dst);

/// Root mean square of |T(src_i) - dst_i|.
double rms_residual(const RigidTransform& transform, std::span<const Point3> src, std::span<const Point3> dst);

double polyline_length(std::span<const Point3> points);
double point_segment_distance(const Point3& p, const Point3& a, const Point3& b);
/// Distance from `p` to the nearest point of the polyline (exhaustive).
double point_polyline_distance(const Point3& p, std::span<const Point3> polyline);

}  // namespace cathreg
