#include "cathreg/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "cathreg/error.hpp"

namespace cathreg {

std::string_view to_string(Frame frame) noexcept {
  switch (frame) {
    case Frame::Preop: return "preop";
    case Frame::Em: return "em";
    case Frame::Intraop: return "intraop";
  }
  return "preop";
}

Frame frame_from_string(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "preop") return Frame::Preop;
  if (lower == "em") return Frame::Em;
  if (lower == "intraop") return Frame::Intraop;
  throw Error(ErrorKind::ParseError, "unknown frame '" + std::string(text) + "'");
}

Path3::Path3(std::vector<Point3> points, Frame frame, std::optional<std::vector<double>> timestamps)
    : points_(std::move(points)), timestamps_(std::move(timestamps)), frame_(frame) {
  if (points_.empty()) {
    throw Error(ErrorKind::DegenerateInput, "path must contain at least one point");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "non-finite coordinate at point " + std::to_string(i));
    }
  }
  if (timestamps_) {
    const auto& ts = *timestamps_;
    if (ts.size() != points_.size()) {
      throw Error(ErrorKind::InvalidArgument, "timestamp count does not match point count");
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (!std::isfinite(ts[i])) {
        throw Error(ErrorKind::InvalidArgument, "non-finite timestamp at sample " + std::to_string(i));
      }
      if (i > 0 && !(ts[i] > ts[i - 1])) {
        throw Error(ErrorKind::InvalidArgument, "timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
      }
    }
  }
}

Path3 Path3::with_frame(Frame frame) const {
  Path3 copy = *this;
  copy.frame_ = frame;
  return copy;
}

bool RigidTransform::is_proper(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  return {outer.rotation * inner.rotation, outer.rotation * inner.translation + outer.translation};
}

RigidTransform invert_transform(const RigidTransform& transform) {
  const Eigen::Matrix3d rt = transform.rotation.transpose();
  return {rt, -(rt * transform.translation)};
}

Path3 apply_transform(const RigidTransform& transform, const Path3& path, Frame out_frame) {
  std::vector<Point3> out;
  out.reserve(path.size());
  for (const auto& p : path.points()) out.push_back(transform.apply(p));
  return Path3(std::move(out), out_frame, path.timestamps());
}

double rotation_angle_deg(const Eigen::Matrix3d& rotation) {
  const double c = std::clamp((rotation.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Eigen::Matrix3d axis_angle_rotation(const Eigen::Vector3d& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

Point3 AxisAffine::to_original(const Point3& normalized) const {
  return scale.cwiseProduct(normalized) + offset;
}

namespace {

Point3 lerp(const Point3& a, const Point3& b, double frac) { return a + frac * (b - a); }

}  // namespace

Path3 resample_uniform(const Path3& path, std::size_t count, ResampleMode mode) {
  if (path.size() < 2) {
    throw Error(ErrorKind::DegenerateInput, "resampling needs at least 2 input points");
  }
  if (count < 2) {
    throw Error(ErrorKind::InvalidArgument, "resample count must be at least 2");
  }
  const auto pts = path.points();
  const std::size_t n = pts.size();
  std::vector<Point3> out;
  out.reserve(count);

  if (mode == ResampleMode::IndexUniform) {
    const double last = static_cast<double>(n - 1);
    for (std::size_t k = 0; k < count; ++k) {
      const double u = static_cast<double>(k) * last / static_cast<double>(count - 1);
      const auto i = static_cast<std::size_t>(std::floor(u));
      if (i >= n - 1) {
        out.push_back(pts[n - 1]);
      } else {
        out.push_back(lerp(pts[i], pts[i + 1], u - static_cast<double>(i)));
      }
    }
    return Path3(std::move(out), path.frame());
  }

  std::vector<double> cumulative(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = cumulative.back();
  for (std::size_t k = 0; k < count; ++k) {
    if (k == count - 1 || total == 0.0) {
      out.push_back(k == count - 1 ? pts[n - 1] : pts[0]);
      continue;
    }
    const double s = static_cast<double>(k) * total / static_cast<double>(count - 1);
    // First vertex strictly beyond s; the segment ends there.
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
    std::size_t lo = hi - 1;
    const double seg = cumulative[hi] - cumulative[lo];
    const double frac = seg > 0.0 ? (s - cumulative[lo]) / seg : 0.0;
    out.push_back(lerp(pts[lo], pts[hi], std::clamp(frac, 0.0, 1.0)));
  }
  return Path3(std::move(out), path.frame());
}

std::pair<Path3, AxisAffine> normalize_minmax(const Path3& path) {
  const auto pts = path.points();
  Eigen::Vector3d lo = pts[0];
  Eigen::Vector3d hi = pts[0];
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  AxisAffine affine;
  for (int axis = 0; axis < 3; ++axis) {
    const double extent = hi[axis] - lo[axis];
    if (extent > 0.0) {
      affine.scale[axis] = extent / 2.0;
      affine.offset[axis] = lo[axis] + extent / 2.0;
    } else {
      affine.scale[axis] = 0.0;
      affine.offset[axis] = lo[axis];
    }
  }

  std::vector<Point3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    Point3 q;
    for (int axis = 0; axis < 3; ++axis) {
      if (affine.scale[axis] == 0.0) {
        q[axis] = 0.0;
      } else if (p[axis] == lo[axis]) {
        q[axis] = -1.0;
      } else if (p[axis] == hi[axis]) {
        q[axis] = 1.0;
      } else {
        q[axis] = std::clamp((p[axis] - affine.offset[axis]) / affine.scale[axis], -1.0, 1.0);
      }
    }
    out.push_back(q);
  }
  return {Path3(std::move(out), path.frame()), affine};
}

RigidTransform rigid_fit_corresponded(std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorKind::InvalidArgument, "rigid fit needs equally sized point lists (" + std::to_string(src.size()) +
                                                " vs " + std::to_string(dst.size()) + ")");
  }
  if (src.size() < 3) {
    throw Error(ErrorKind::DegenerateInput, "rigid fit needs at least 3 correspondences");
  }

  const double count = static_cast<double>(src.size());
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= count;
  dst_mean /= count;

  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d a = src[i] - src_mean;
    const Eigen::Vector3d b = dst[i] - dst_mean;
    scatter += a * a.transpose();
    cross += a * b.transpose();
  }

  // Singular values of the centered source matrix are the square roots of
  // the scatter eigenvalues (ascending).
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (!(ev[2] > 0.0) || ev[1] / ev[2] < 1e-8) {
    throw Error(ErrorKind::DegenerateGeometry, "source points are collinear; rotation about their line is unobservable");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d correction = Eigen::Matrix3d::Identity();
  if ((v * u.transpose()).determinant() < 0.0) correction(2, 2) = -1.0;

  RigidTransform out;
  out.rotation = v * correction * u.transpose();
  out.translation = dst_mean - out.rotation * src_mean;
  return out;
}

double rms_residual(const RigidTransform& transform, std::span<const Point3> src, std::span<const Point3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorKind::InvalidArgument, "residual needs equally sized point lists");
  }
  if (src.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (transform.apply(src[i]) - dst[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

double polyline_length(std::span<const Point3> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

double point_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(const Point3& p, std::span<const Point3> polyline) {
  if (polyline.empty()) {
    throw Error(ErrorKind::DegenerateInput, "empty polyline");
  }
  if (polyline.size() == 1) return (p - polyline[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    best = std::min(best, point_segment_distance(p, polyline[i - 1], polyline[i]));
  }
  return best;
}

}  // namespace cathreg
