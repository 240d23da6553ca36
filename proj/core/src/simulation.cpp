#include "cathreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "cathreg/error.hpp"
#include "json_codec.hpp"

namespace cathreg {

const Branch& PhantomModel::branch(int id) const {
  for (const auto& b : branches) {
    if (b.id == id) return b;
  }
  throw Error(ErrorKind::InvalidArgument, "phantom has no branch " + std::to_string(id));
}

namespace {

constexpr double kStepMm = 1.0;
constexpr double kRouteBudgetMm = 205.0;
constexpr double kDeg = std::numbers::pi / 180.0;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Eigen::Vector3d random_unit(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  while (true) {
    Eigen::Vector3d v;
    for (int axis = 0; axis < 3; ++axis) v[axis] = normal(rng);
    const double len = v.norm();
    if (len > 1e-12) return v / len;
  }
}

Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& t) {
  const Eigen::Vector3d helper = std::abs(t.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  return t.cross(helper).normalized();
}

struct Arc {
  double length_mm;   // integral number of steps
  double curvature;   // 1/mm, 0 for straight
  double bend_angle;  // rotation of the bending plane about the tangent, rad
};

/// Samples a chain of circular arcs every kStepMm of arc length. The first
/// sample is `start`.
std::vector<Point3> sample_arc_chain(const Point3& start, const Eigen::Vector3d& direction,
                                     const std::vector<Arc>& arcs) {
  std::vector<Point3> out{start};
  Point3 p = start;
  Eigen::Vector3d tangent = direction.normalized();
  Eigen::Vector3d normal = any_perpendicular(tangent);
  for (const auto& arc : arcs) {
    const Eigen::Vector3d bend =
        std::cos(arc.bend_angle) * normal + std::sin(arc.bend_angle) * tangent.cross(normal);
    const auto steps = static_cast<int>(std::lround(arc.length_mm / kStepMm));
    for (int k = 1; k <= steps; ++k) {
      const double s = k * kStepMm;
      Point3 q;
      if (arc.curvature > 0.0) {
        const double a = arc.curvature * s;
        q = p + (std::sin(a) / arc.curvature) * tangent + ((1.0 - std::cos(a)) / arc.curvature) * bend;
      } else {
        q = p + s * tangent;
      }
      out.push_back(q);
    }
    const double a = arc.curvature * steps * kStepMm;
    p = out.back();
    const Eigen::Vector3d new_tangent = (std::cos(a) * tangent + std::sin(a) * bend).normalized();
    Eigen::Vector3d new_normal = normal - normal.dot(new_tangent) * new_tangent;
    normal = new_normal.norm() > 1e-9 ? new_normal.normalized() : any_perpendicular(new_tangent);
    tangent = new_tangent;
  }
  return out;
}

Eigen::Vector3d tangent_at(std::span<const Point3> pts, std::size_t i) {
  const std::size_t a = i == 0 ? 0 : i - 1;
  const std::size_t b = std::min(i + 1, pts.size() - 1);
  return (pts[b] - pts[a]).normalized();
}

std::vector<double> taper(std::size_t count, double from, double to) {
  std::vector<double> radii(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double u = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
    radii[k] = std::clamp(from + (to - from) * u, kMinVesselRadiusMm, kMaxVesselRadiusMm);
  }
  return radii;
}

double route_length_to(const std::vector<Branch>& branches, int id, std::size_t junction) {
  const Branch& b = branches[static_cast<std::size_t>(id)];
  double len = polyline_length(b.centerline.points().first(junction + 1));
  if (b.parent) len += route_length_to(branches, b.parent->id, b.parent->junction_index);
  return len;
}

std::vector<Arc> random_arcs(Rng& rng, double length_mm, double min_curvature, double max_curvature) {
  std::vector<Arc> arcs;
  double remaining = std::floor(length_mm);
  while (remaining > 0.0) {
    double len = std::floor(uniform(rng, 18.0, 40.0));
    if (remaining - len < 12.0) len = remaining;
    arcs.push_back({len, uniform(rng, min_curvature, max_curvature), uniform(rng, 0.0, 2.0 * std::numbers::pi)});
    remaining -= len;
  }
  return arcs;
}

PhantomModel generate_attempt(int n_branches, Rng& rng) {
  std::vector<Branch> branches;

  // Trunk: gentle arcs around one tight bend (radius 20 mm over ~70 degrees).
  {
    std::vector<Arc> arcs = random_arcs(rng, std::floor(uniform(rng, 40.0, 60.0)), 1.0 / 150.0, 1.0 / 50.0);
    arcs.push_back({25.0, 1.0 / 20.0, uniform(rng, 0.0, 2.0 * std::numbers::pi)});
    for (const auto& a : random_arcs(rng, std::floor(uniform(rng, 25.0, 45.0)), 1.0 / 150.0, 1.0 / 50.0)) {
      arcs.push_back(a);
    }
    auto pts = sample_arc_chain(Point3::Zero(), Eigen::Vector3d::UnitX(), arcs);
    auto radii = taper(pts.size(), kMaxVesselRadiusMm, uniform(rng, 5.5, 6.5));
    branches.push_back({0, Path3(std::move(pts), Frame::Preop), std::move(radii), std::nullopt});
  }

  for (int id = 1; id < n_branches; ++id) {
    // Parent: the trunk for the first two children, otherwise any branch
    // whose route leaves room for a child of reasonable length.
    std::vector<int> candidates;
    for (const auto& b : branches) {
      const std::size_t lo = b.centerline.size() * 35 / 100;
      if (b.centerline.size() >= 30 && route_length_to(branches, b.id, lo) + 40.0 <= kRouteBudgetMm) {
        candidates.push_back(b.id);
      }
    }
    const int parent_id = (id <= 2 || candidates.empty())
                              ? 0
                              : candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    const Branch& parent = branches[static_cast<std::size_t>(parent_id)];
    const std::size_t n_parent = parent.centerline.size();
    std::size_t junction = std::uniform_int_distribution<std::size_t>(n_parent * 35 / 100, n_parent * 85 / 100)(rng);
    double prefix = route_length_to(branches, parent_id, junction);
    while (prefix + 40.0 > kRouteBudgetMm && junction > 1) {
      --junction;
      prefix = route_length_to(branches, parent_id, junction);
    }
    const double length = std::floor(std::min(uniform(rng, 60.0, 110.0), kRouteBudgetMm - prefix));

    const Eigen::Vector3d parent_tangent = tangent_at(parent.centerline.points(), junction);
    const Eigen::Vector3d axis = axis_angle_rotation(parent_tangent, uniform(rng, 0.0, 2.0 * std::numbers::pi)) *
                                 any_perpendicular(parent_tangent);
    const Eigen::Vector3d direction =
        axis_angle_rotation(axis, uniform(rng, 25.0, 55.0) * kDeg) * parent_tangent;

    auto pts = sample_arc_chain(parent.centerline[junction], direction,
                                random_arcs(rng, length, 1.0 / 140.0, 1.0 / 35.0));
    const double start_radius = std::max(kMinVesselRadiusMm + 0.5, parent.radii[junction] * uniform(rng, 0.65, 0.85));
    auto radii = taper(pts.size(), start_radius, std::max(kMinVesselRadiusMm, start_radius - uniform(rng, 0.5, 2.0)));
    branches.push_back({id, Path3(std::move(pts), Frame::Preop), std::move(radii), BranchParent{parent_id, junction}});
  }

  // Stenosis: a Gaussian narrowing on one branch.
  {
    Branch& target = branches[std::uniform_int_distribution<std::size_t>(0, branches.size() - 1)(rng)];
    const double center = uniform(rng, 0.3, 0.7) * static_cast<double>(target.radii.size() - 1);
    const double depth = uniform(rng, 0.35, 0.55);
    for (std::size_t k = 0; k < target.radii.size(); ++k) {
      const double d = (static_cast<double>(k) - center) / 5.0;
      target.radii[k] = std::max(kMinVesselRadiusMm, target.radii[k] * (1.0 - depth * std::exp(-d * d)));
    }
  }

  return PhantomModel{std::move(branches), 0};
}

double bounding_extent(const PhantomModel& phantom) {
  Eigen::Vector3d lo = phantom.branches[0].centerline[0];
  Eigen::Vector3d hi = lo;
  for (const auto& b : phantom.branches) {
    for (const auto& p : b.centerline.points()) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  return (hi - lo).maxCoeff();
}

}  // namespace

PhantomModel generate_phantom(int n_branches, std::uint64_t seed) {
  if (n_branches < 1 || n_branches > 12) {
    throw Error(ErrorKind::InvalidArgument, "n_branches must be in [1, 12], got " + std::to_string(n_branches));
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < 256; ++attempt) {
    PhantomModel phantom = generate_attempt(n_branches, rng);
    if (bounding_extent(phantom) <= kMaxBranchLengthMm) {
      validate_phantom(phantom);
      return phantom;
    }
  }
  throw Error(ErrorKind::DegenerateGeometry, "could not fit a phantom inside the 220 mm region");
}

Branch phantom_route(const PhantomModel& phantom, int id) {
  std::vector<const Branch*> chain;
  for (const Branch* b = &phantom.branch(id);; b = &phantom.branch(b->parent->id)) {
    chain.push_back(b);
    if (!b->parent) break;
  }
  std::reverse(chain.begin(), chain.end());

  std::vector<Point3> pts;
  std::vector<double> radii;
  for (std::size_t level = 0; level < chain.size(); ++level) {
    const Branch& b = *chain[level];
    const std::size_t first = level == 0 ? 0 : 1;
    const std::size_t last = level + 1 < chain.size() ? chain[level + 1]->parent->junction_index : b.centerline.size() - 1;
    for (std::size_t k = first; k <= last; ++k) {
      pts.push_back(b.centerline[k]);
      radii.push_back(b.radii[k]);
    }
  }
  return Branch{id, Path3(std::move(pts), Frame::Preop), std::move(radii), std::nullopt};
}

void validate_phantom(const PhantomModel& phantom) {
  auto bad = [](const std::string& why) { throw Error(ErrorKind::InvalidArgument, "invalid phantom: " + why); };
  if (phantom.branches.empty()) bad("no branches");
  if (phantom.branches[0].parent) bad("branch 0 must be the trunk");
  if (phantom.inlet_index >= phantom.branches[0].centerline.size()) bad("inlet index out of range");
  for (std::size_t k = 0; k < phantom.branches.size(); ++k) {
    const Branch& b = phantom.branches[k];
    const std::string tag = "branch " + std::to_string(b.id) + ": ";
    for (std::size_t q = 0; q < k; ++q) {
      if (phantom.branches[q].id == b.id) bad(tag + "duplicate id");
    }
    if (b.centerline.size() < 10) bad(tag + "fewer than 10 centerline points");
    if (b.radii.size() != b.centerline.size()) bad(tag + "radii count differs from point count");
    for (const double r : b.radii) {
      if (!(r >= kMinVesselRadiusMm && r <= kMaxVesselRadiusMm)) bad(tag + "radius outside [2.5, 7.5] mm");
    }
    if (polyline_length(b.centerline.points()) > kMaxBranchLengthMm) bad(tag + "arc length exceeds 220 mm");
    if (k > 0) {
      if (!b.parent) bad(tag + "only branch 0 may lack a parent");
      bool parent_seen = false;
      for (std::size_t q = 0; q < k; ++q) parent_seen |= phantom.branches[q].id == b.parent->id;
      if (!parent_seen) bad(tag + "parent must precede the branch");
      const Branch& parent = phantom.branch(b.parent->id);
      if (b.parent->junction_index >= parent.centerline.size()) bad(tag + "junction index out of range");
      if ((b.centerline[0] - parent.centerline[b.parent->junction_index]).norm() > 1e-9) {
        bad(tag + "first point is not at the parent junction");
      }
    }
  }
}

std::string format_phantom_json(const PhantomModel& phantom) {
  using detail::Json;
  Json branches = Json::array();
  for (const auto& b : phantom.branches) {
    Json centerline = Json::array();
    for (const auto& p : b.centerline.points()) centerline.push_back(detail::point_json(p));
    branches.push_back(Json{{"id", b.id},
                            {"parent", b.parent ? Json(b.parent->id) : Json(nullptr)},
                            {"junction_index", b.parent ? Json(b.parent->junction_index) : Json(nullptr)},
                            {"radii_mm", b.radii},
                            {"centerline", centerline}});
  }
  return Json{{"inlet_index", phantom.inlet_index}, {"branches", branches}}.dump(1) + "\n";
}

PhantomModel parse_phantom_json(std::string_view text) {
  using detail::Json;
  PhantomModel phantom;
  try {
    const Json doc = Json::parse(text);
    phantom.inlet_index = doc.value("inlet_index", std::size_t{0});
    for (const auto& jb : doc.at("branches")) {
      std::vector<Point3> pts;
      for (const auto& jp : jb.at("centerline")) {
        if (!jp.is_array() || jp.size() != 3) throw Error(ErrorKind::ParseError, "centerline points must be [x,y,z]");
        pts.emplace_back(jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>());
      }
      std::optional<BranchParent> parent;
      if (jb.contains("parent") && !jb["parent"].is_null()) {
        parent = BranchParent{jb["parent"].get<int>(), jb.at("junction_index").get<std::size_t>()};
      }
      phantom.branches.push_back(Branch{jb.at("id").get<int>(), Path3(std::move(pts), Frame::Preop),
                                        jb.at("radii_mm").get<std::vector<double>>(), parent});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("phantom JSON: ") + e.what());
  }
  validate_phantom(phantom);
  return phantom;
}

void validate_acquisition(const AcquisitionConfig& cfg) {
  auto bad = [](const std::string& why) { throw Error(ErrorKind::InvalidArgument, "acquisition config: " + why); };
  if (cfg.pull_speed && !(*cfg.pull_speed > 0.0 && std::isfinite(*cfg.pull_speed))) bad("pull_speed must be > 0");
  if (!(cfg.sample_rate > 0.0 && std::isfinite(cfg.sample_rate))) bad("sample_rate must be > 0");
  if (!(cfg.noise_sigma >= 0.0 && std::isfinite(cfg.noise_sigma))) bad("noise_sigma must be >= 0");
  if (!(cfg.dropout_prob >= 0.0 && cfg.dropout_prob < 1.0)) bad("dropout_prob must be in [0, 1)");
  if (!(cfg.backward_jitter_prob >= 0.0 && cfg.backward_jitter_prob < 1.0)) bad("backward_jitter_prob must be in [0, 1)");
}

Point3 point_at_arc_length(std::span<const Point3> polyline, double s) {
  if (polyline.empty()) throw Error(ErrorKind::DegenerateInput, "empty polyline");
  if (s <= 0.0 || polyline.size() == 1) return polyline.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const double seg = (polyline[i] - polyline[i - 1]).norm();
    if (walked + seg >= s && seg > 0.0) {
      return polyline[i - 1] + ((s - walked) / seg) * (polyline[i] - polyline[i - 1]);
    }
    walked += seg;
  }
  return polyline.back();
}

SimulatedAcquisition simulate_em_path(const Branch& branch, const AcquisitionConfig& cfg,
                                      const RigidTransform& gt_transform) {
  validate_acquisition(cfg);
  if (branch.centerline.size() < 2) {
    throw Error(ErrorKind::DegenerateInput, "branch centerline needs at least 2 points");
  }
  Rng rng(cfg.seed);
  const double speed = cfg.pull_speed ? *cfg.pull_speed : uniform(rng, 10.0, 20.0);
  const double step = speed / cfg.sample_rate;
  const auto pts = branch.centerline.points();

  std::vector<double> cumulative(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double length = cumulative.back();
  auto locate = [&](double s) -> Point3 {
    if (s <= 0.0) return pts.front();
    if (s >= length) return pts.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    const auto hi = static_cast<std::size_t>(it - cumulative.begin());
    const auto lo = hi - 1;
    const double seg = cumulative[hi] - cumulative[lo];
    return seg > 0.0 ? Point3(pts[lo] + ((s - cumulative[lo]) / seg) * (pts[hi] - pts[lo])) : Point3(pts[lo]);
  };

  // Arc-length schedule, including any backward excursions.
  const auto forward = static_cast<std::size_t>(std::floor(length / step + 1e-9)) + 1;
  std::vector<double> schedule;
  schedule.reserve(forward);
  std::uniform_int_distribution<int> excursion(2, 5);
  for (std::size_t k = 0; k < forward; ++k) {
    const double s = static_cast<double>(k) * step;
    schedule.push_back(s);
    if (cfg.backward_jitter_prob > 0.0 && k + 1 < forward && uniform(rng, 0.0, 1.0) < cfg.backward_jitter_prob) {
      const int back = excursion(rng);
      for (int r = 1; r <= back; ++r) schedule.push_back(std::max(0.0, s - r * step));
      for (int r = back - 1; r >= 1; --r) schedule.push_back(std::max(0.0, s - r * step));
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Point3> samples;
  std::vector<double> times;
  samples.reserve(schedule.size());
  times.reserve(schedule.size());
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    Point3 p = locate(schedule[k]);
    if (cfg.noise_sigma > 0.0) {
      const double nx = noise(rng);
      const double ny = noise(rng);
      const double nz = noise(rng);
      p += cfg.noise_sigma * Eigen::Vector3d(nx, ny, nz);
    }
    const bool dropped = cfg.dropout_prob > 0.0 && uniform(rng, 0.0, 1.0) < cfg.dropout_prob;
    const bool boundary = k == 0 || k + 1 == schedule.size();
    if (dropped && !boundary) continue;
    samples.push_back(gt_transform.apply(p));
    times.push_back(static_cast<double>(k) / cfg.sample_rate);
  }

  return {Path3(std::move(samples), Frame::Em, std::move(times)), gt_transform, speed};
}

RigidTransform sample_rigid_transform(std::uint64_t seed, double max_rotation_deg, double max_translation_mm,
                                      double min_translation_mm) {
  if (!(max_rotation_deg >= 0.0) || !(min_translation_mm >= 0.0) || !(max_translation_mm >= min_translation_mm)) {
    throw Error(ErrorKind::InvalidArgument, "transform sampler needs 0 <= min_translation <= max_translation and max_rotation >= 0");
  }
  Rng rng(seed);
  const Eigen::Vector3d axis = random_unit(rng);
  const double angle = uniform(rng, 0.0, 1.0) * max_rotation_deg * kDeg;
  const Eigen::Vector3d direction = random_unit(rng);
  const double magnitude = min_translation_mm + uniform(rng, 0.0, 1.0) * (max_translation_mm - min_translation_mm);
  return {axis_angle_rotation(axis, angle), magnitude * direction};
}

}  // namespace cathreg
