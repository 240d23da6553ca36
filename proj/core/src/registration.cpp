#include "cathreg/registration.hpp"

#include <cmath>
#include <limits>

#include "json_codec.hpp"

namespace cathreg {

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Dtw: return "dtw";
    case Method::Icp: return "icp";
    case Method::Landmark: return "landmarks";
  }
  return "dtw";
}

NonConvergenceError::NonConvergenceError(const std::string& message, RegistrationResult result)
    : Error(ErrorKind::NonConvergence, message, "icp"), result_(std::move(result)) {}

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

double correspondence_rmse(const RigidTransform& t, const CorrespondenceSet& set) {
  if (set.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : set.pairs) sum += (t.apply(c.em_point) - c.centerline_point).squaredNorm();
  return std::sqrt(sum / static_cast<double>(set.size()));
}

}  // namespace

RegistrationResult register_dtw(const Path3& em_path, const Path3& centerline, const DtwRegistrationConfig& cfg) {
  if (em_path.size() < 4 || centerline.size() < 4) {
    throw Error(ErrorKind::DegenerateInput, "both paths need at least 4 points", "input");
  }
  if (cfg.per_segment < 1) {
    throw Error(ErrorKind::InvalidArgument, "per_segment must be at least 1", "input");
  }

  // The centerline is matched to the EM count when the EM path is longer and
  // vice versa; FixedCount resamples both.
  auto [cl_work, em_work] = run_stage("resample", [&] {
    std::size_t cl_count = centerline.size();
    std::size_t em_count = em_path.size();
    if (const auto* fixed = std::get_if<FixedCount>(&cfg.resample_target)) {
      cl_count = em_count = fixed->count;
    } else {
      cl_count = em_count = std::max(cl_count, em_count);
    }
    Path3 cl = cl_count == centerline.size() ? centerline : resample_uniform(centerline, cl_count, cfg.resample_mode);
    Path3 em = em_count == em_path.size() ? em_path : resample_uniform(em_path, em_count, cfg.resample_mode);
    return std::pair{std::move(cl), std::move(em)};
  });

  auto [cl_norm, em_norm] = run_stage("normalize", [&] {
    return std::pair{normalize_minmax(cl_work).first, normalize_minmax(em_work).first};
  });

  WarpPath warp = run_stage("align", [&] { return dtw_align(cl_norm, em_norm, cfg.band_radius); });

  CorrespondenceSet selected =
      run_stage("select", [&] { return select_correspondences(warp, cl_work, em_work, cfg.per_segment); });

  RegistrationResult result;
  result.method = Method::Dtw;
  result.transform = run_stage("fit", [&] {
    std::vector<Point3> src;
    std::vector<Point3> dst;
    src.reserve(selected.size());
    dst.reserve(selected.size());
    for (const auto& c : selected.pairs) {
      src.push_back(c.em_point);
      dst.push_back(c.centerline_point);
    }
    return rigid_fit_corresponded(src, dst);
  });
  result.fit_rmse = correspondence_rmse(result.transform, selected);
  result.warnings = selected.warnings;
  result.correspondences = std::move(selected);
  result.warp = std::move(warp);
  return result;
}

RegistrationResult register_icp(const Path3& em_path, const Path3& centerline, const RigidTransform& init,
                                const IcpConfig& cfg) {
  if (em_path.size() < 3 || centerline.size() < 3) {
    throw Error(ErrorKind::DegenerateInput, "ICP needs at least 3 points on each path", "icp");
  }
  if (cfg.max_iterations < 1 || !(cfg.rel_tolerance > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "ICP needs max_iterations >= 1 and rel_tolerance > 0", "icp");
  }

  const auto em = em_path.points();
  const auto cl = centerline.points();
  const double cutoff2 = cfg.max_nn_distance ? (*cfg.max_nn_distance) * (*cfg.max_nn_distance)
                                             : std::numeric_limits<double>::infinity();

  RegistrationResult result;
  result.method = Method::Icp;
  result.transform = init;

  // Nearest centerline vertex for every EM point under the current estimate.
  auto match = [&](const RigidTransform& t) {
    CorrespondenceSet set;
    for (std::size_t j = 0; j < em.size(); ++j) {
      const Point3 moved = t.apply(em[j]);
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < cl.size(); ++i) {
        const double d2 = (cl[i] - moved).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_i = i;
        }
      }
      if (best <= cutoff2) set.pairs.push_back({cl[best_i], em[j], best_i, j, std::sqrt(best), 0});
    }
    return set;
  };
  auto fail = [&](const std::string& why) {
    result.converged = false;
    throw NonConvergenceError(why, result);
  };

  CorrespondenceSet matches = match(result.transform);
  double rmse = correspondence_rmse(result.transform, matches);
  bool converged = false;
  while (true) {
    if (matches.size() < 3) {
      result.correspondences = std::move(matches);
      fail("only " + std::to_string(result.correspondences.size()) + " EM points have a centerline match");
    }
    result.rmse_history.push_back(rmse);
    if (result.iterations > 0) {
      const double prev = result.rmse_history[result.rmse_history.size() - 2];
      if (prev <= 0.0 || (prev - rmse) / prev < cfg.rel_tolerance) {
        converged = true;
        break;
      }
    }
    if (result.iterations == cfg.max_iterations) break;

    std::vector<Point3> src;
    std::vector<Point3> dst;
    src.reserve(matches.size());
    dst.reserve(matches.size());
    for (const auto& c : matches.pairs) {
      src.push_back(c.em_point);
      dst.push_back(c.centerline_point);
    }
    try {
      result.transform = rigid_fit_corresponded(src, dst);
    } catch (const Error& e) {
      throw e.with_stage("icp");
    }
    ++result.iterations;
    matches = match(result.transform);
    rmse = correspondence_rmse(result.transform, matches);
  }

  result.fit_rmse = rmse;
  result.correspondences = std::move(matches);
  if (!converged) {
    result.warnings.push_back("MaxIterations: relative tolerance not reached after " +
                              std::to_string(cfg.max_iterations) + " iterations");
  }
  if (!(rmse <= cfg.divergence_threshold)) {
    fail("final RMSE " + std::to_string(rmse) + " mm exceeds the divergence threshold of " +
         std::to_string(cfg.divergence_threshold) + " mm");
  }
  return result;
}

RegistrationResult register_landmarks(std::span<const Point3> preop_landmarks, std::span<const Point3> em_landmarks) {
  if (preop_landmarks.size() != em_landmarks.size()) {
    throw Error(ErrorKind::InvalidArgument, "landmark lists differ in length", "landmarks");
  }
  if (preop_landmarks.size() < 3) {
    throw Error(ErrorKind::DegenerateInput, "at least 3 landmark pairs are required", "landmarks");
  }
  RegistrationResult result;
  result.method = Method::Landmark;
  try {
    result.transform = rigid_fit_corresponded(em_landmarks, preop_landmarks);
  } catch (const Error& e) {
    throw e.with_stage("landmarks");
  }
  result.fit_rmse = rms_residual(result.transform, em_landmarks, preop_landmarks);
  return result;
}

std::string format_registration_json(const RegistrationResult& result) {
  using detail::Json;
  Json corr = Json::array();
  for (const auto& c : result.correspondences.pairs) {
    corr.push_back(Json{{"centerline_index", c.centerline_index},
                        {"em_index", c.em_index},
                        {"centerline_point", detail::point_json(c.centerline_point)},
                        {"em_point", detail::point_json(c.em_point)},
                        {"pair_cost", c.pair_cost},
                        {"segment", c.segment}});
  }
  Json doc{{"method", std::string(to_string(result.method))},
           {"transform", detail::transform_json(result.transform, Frame::Em, Frame::Intraop)},
           {"fit_rmse_mm", detail::number_or_null(result.fit_rmse)},
           {"iterations", result.iterations},
           {"converged", result.converged},
           {"warnings", result.warnings},
           {"correspondences", corr}};
  if (!result.rmse_history.empty()) doc["rmse_history_mm"] = result.rmse_history;
  return doc.dump(2) + "\n";
}

}  // namespace cathreg
