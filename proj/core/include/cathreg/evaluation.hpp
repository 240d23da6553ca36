#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cathreg/geometry.hpp"
#include "cathreg/registration.hpp"
#include "cathreg/simulation.hpp"

namespace cathreg {

struct ErrorSummary {
  double mean_mm = 0.0;
  double std_mm = 0.0;
  double min_mm = 0.0;
  double max_mm = 0.0;
  std::size_t n_points = 0;
};

/// Mean over points of `registered` of the distance to the closest point of
/// `gt_registered`, plus std/min/max of those per-point minima. Directional:
/// swapping the arguments generally changes the result.
ErrorSummary mean_registration_error(const Path3& registered, const Path3& gt_registered);

/// Per-point minima behind mean_registration_error.
std::vector<double> closest_point_distances(std::span<const Point3> registered, std::span<const Point3> gt_registered);

enum class ExperimentMethod { Dtw, IcpFromDtw, IcpFromIdentity };

std::string_view to_string(ExperimentMethod method) noexcept;
/// Accepts "dtw", "icp-from-dtw", "icp-from-identity".
ExperimentMethod experiment_method_from_string(std::string_view text);

/// How per-branch and overall std/min/max are formed.
enum class Aggregation {
  PerRun,    ///< over per-run mean errors
  PerPoint,  ///< over pooled per-point errors
};

struct TransformSampler {
  double max_rotation_deg = 30.0;
  double max_translation_mm = 100.0;
  double min_translation_mm = 0.0;
};

struct ExperimentProtocol {
  int runs_per_branch = 5;
  AcquisitionConfig acquisition;  ///< seed is overridden per cell
  TransformSampler gt_transform_sampler;
  std::vector<ExperimentMethod> methods{ExperimentMethod::Dtw, ExperimentMethod::IcpFromDtw};
  DtwRegistrationConfig dtw;
  IcpConfig icp;
  std::vector<Aggregation> aggregations{Aggregation::PerRun};
  unsigned threads = 1;  ///< 0 = hardware concurrency; output does not depend on it
};

void validate_protocol(const ExperimentProtocol& protocol);

/// Sub-seed for one (branch, run) cell: master_seed + branch * 1000 + run.
std::uint64_t cell_seed(std::uint64_t master_seed, int branch, int run);

/// The simulated pull-back the harness registers for one (branch, run) cell.
/// The ground-truth transform and the acquisition noise draw from separate
/// streams derived from cell_seed.
SimulatedAcquisition simulate_cell(const Branch& route, const ExperimentProtocol& protocol, std::uint64_t master_seed,
                                   int run);

struct ExperimentCell {
  int branch = 0;
  int run = 0;
  ExperimentMethod method = ExperimentMethod::Dtw;
  std::uint64_t seed = 0;
  bool converged = false;           ///< method returned without NonConvergence or other failure
  std::optional<ErrorSummary> error;  ///< absent when the method produced no transform
  std::vector<double> point_errors;   ///< per-point minima (kept for pooled aggregation)
  RigidTransform ground_truth;        ///< preop -> EM
  std::optional<RigidTransform> transform;  ///< estimated EM -> preop
  double fit_rmse = 0.0;
  std::size_t iterations = 0;
  std::size_t em_points = 0;
  double pull_speed = 0.0;
  std::vector<std::string> warnings;
  std::string failure;  ///< error text when the method failed
};

struct ExperimentReport {
  std::uint64_t master_seed = 0;
  ExperimentProtocol protocol;
  std::vector<int> branch_ids;
  std::vector<ExperimentCell> cells;  ///< ordered by branch, run, method
  /// Keyed by aggregation, then method, then branch id.
  std::map<Aggregation, std::map<ExperimentMethod, std::map<int, ErrorSummary>>> per_branch;
  /// Keyed by aggregation, then method.
  std::map<Aggregation, std::map<ExperimentMethod, ErrorSummary>> overall;
};

/// Runs every requested method on runs_per_branch simulated pull-backs of
/// every branch route and scores each against the exact ground truth.
/// Method failures are recorded per cell. Deterministic in `master_seed`.
ExperimentReport run_experiment(const PhantomModel& phantom, const ExperimentProtocol& protocol,
                                std::uint64_t master_seed);

/// Aggregate over converged cells: mean is point-weighted, std/min/max per `mode`.
std::optional<ErrorSummary> aggregate_cells(const std::vector<const ExperimentCell*>& cells, Aggregation mode);

}  // namespace cathreg
