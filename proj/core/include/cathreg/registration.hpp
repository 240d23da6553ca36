#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cathreg/dtw.hpp"
#include "cathreg/error.hpp"
#include "cathreg/geometry.hpp"

namespace cathreg {

enum class Method { Dtw, Icp, Landmark };

std::string_view to_string(Method method) noexcept;

/// Resample the shorter signal to the longer signal's point count.
struct MatchLonger {};
/// Resample both signals to a fixed point count.
struct FixedCount {
  std::size_t count = 0;
};
using ResampleTarget = std::variant<MatchLonger, FixedCount>;

struct DtwRegistrationConfig {
  std::size_t per_segment = 10;
  std::optional<std::size_t> band_radius;
  ResampleTarget resample_target = MatchLonger{};
  ResampleMode resample_mode = ResampleMode::IndexUniform;
};

struct IcpConfig {
  std::size_t max_iterations = 50;
  double rel_tolerance = 1e-6;
  /// mm; EM points with no centerline vertex this close are left unmatched.
  /// Far-apart signals therefore fail to match instead of sliding into a
  /// spurious fit.
  std::optional<double> max_nn_distance = 50.0;
  double divergence_threshold = 250.0;    ///< mm
};

struct RegistrationResult {
  RigidTransform transform;            ///< maps the EM frame onto the centerline frame
  CorrespondenceSet correspondences;   ///< DTW: selected pairs; ICP: final matches; landmarks: empty
  double fit_rmse = 0.0;               ///< mm
  Method method = Method::Dtw;
  std::vector<std::string> warnings;
  std::size_t iterations = 0;          ///< ICP only
  std::vector<double> rmse_history;    ///< ICP only: matched RMSE entering each iteration, then the final value
  bool converged = true;
  WarpPath warp;                       ///< DTW only: the full alignment of the resampled signals
};

/// Raised by register_icp; carries the last estimate for diagnostics.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& message, RegistrationResult result);
  const RegistrationResult& result() const noexcept { return result_; }

 private:
  RegistrationResult result_;
};

/// EM path -> centerline registration through DTW correspondences.
///
/// Stages: resample, normalize, align, select, fit. Errors are relabelled
/// with the failing stage name.
RegistrationResult register_dtw(const Path3& em_path, const Path3& centerline, const DtwRegistrationConfig& cfg = {});

/// Point-to-point ICP of the EM path onto the centerline, starting at `init`.
RegistrationResult register_icp(const Path3& em_path, const Path3& centerline, const RigidTransform& init,
                                const IcpConfig& cfg = {});

/// Rigid fit over order-matched landmark pairs (EM landmarks onto preop landmarks).
RegistrationResult register_landmarks(std::span<const Point3> preop_landmarks, std::span<const Point3> em_landmarks);

/// JSON document for a registration result (transform object plus
/// fit_rmse_mm, method, iterations, warnings, correspondences).
std::string format_registration_json(const RegistrationResult& result);

}  // namespace cathreg
