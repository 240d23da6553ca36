#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cathreg/geometry.hpp"

namespace cathreg {

inline constexpr double kMinVesselRadiusMm = 2.5;
inline constexpr double kMaxVesselRadiusMm = 7.5;
inline constexpr double kMaxBranchLengthMm = 220.0;

struct BranchParent {
  int id = 0;
  std::size_t junction_index = 0;  ///< vertex of the parent centerline the branch leaves from

  friend bool operator==(const BranchParent&, const BranchParent&) = default;
};

struct Branch {
  int id = 0;
  Path3 centerline;            ///< frame Preop
  std::vector<double> radii;   ///< mm, one per centerline point
  std::optional<BranchParent> parent;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// Branching vessel tree. Branch 0 is the trunk and starts at the inlet.
struct PhantomModel {
  std::vector<Branch> branches;
  std::size_t inlet_index = 0;

  friend bool operator==(const PhantomModel&, const PhantomModel&) = default;

  const Branch& branch(int id) const;
};

/// Deterministic in (n_branches, seed). Branches are chains of circular arcs
/// sampled at 1 mm arc-length steps, with a tapering radius profile, one
/// stenosis-like radius dip and one tight bend per phantom.
PhantomModel generate_phantom(int n_branches, std::uint64_t seed);

/// Inlet-to-outlet route ending at branch `id`: ancestor centerlines up to
/// their junctions followed by the branch itself. The route keeps the
/// branch's id and has no parent.
Branch phantom_route(const PhantomModel& phantom, int id);

/// Throws InvalidArgument describing the first violated phantom invariant.
void validate_phantom(const PhantomModel& phantom);

std::string format_phantom_json(const PhantomModel& phantom);
PhantomModel parse_phantom_json(std::string_view text);

struct AcquisitionConfig {
  std::optional<double> pull_speed;  ///< mm/s; drawn uniformly from [10, 20] when unset
  double sample_rate = 40.0;         ///< Hz
  double noise_sigma = 0.5;          ///< mm, isotropic Gaussian
  double dropout_prob = 0.0;
  double backward_jitter_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Throws InvalidArgument when a field is out of range.
void validate_acquisition(const AcquisitionConfig& cfg);

struct SimulatedAcquisition {
  Path3 em_path;               ///< frame Em
  RigidTransform ground_truth; ///< preop -> EM placement that was applied
  double pull_speed = 0.0;     ///< mm/s actually used
};

/// Pull-back of a sensor along `branch` from inlet to outlet.
///
/// Samples every pull_speed / sample_rate mm of arc length, perturbs with
/// Gaussian noise, optionally drops samples or inserts short backward
/// excursions, then maps every sample through `gt_transform`. Timestamps are
/// k / sample_rate. Deterministic in `cfg.seed`.
SimulatedAcquisition simulate_em_path(const Branch& branch, const AcquisitionConfig& cfg,
                                      const RigidTransform& gt_transform);

/// Point at arc length `s` along the polyline, clamped to its ends.
Point3 point_at_arc_length(std::span<const Point3> polyline, double s);

/// Random rigid transform: axis uniform on the sphere, angle uniform in
/// [0, max_rotation_deg], translation direction uniform and magnitude uniform
/// in [min_translation_mm, max_translation_mm].
RigidTransform sample_rigid_transform(std::uint64_t seed, double max_rotation_deg, double max_translation_mm,
                                      double min_translation_mm = 0.0);

}  // namespace cathreg
