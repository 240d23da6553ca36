#include "cathreg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "cathreg/error.hpp"

namespace cathreg {

std::vector<double> closest_point_distances(std::span<const Point3> registered, std::span<const Point3> gt_registered) {
  if (registered.empty() || gt_registered.empty()) {
    throw Error(ErrorKind::DegenerateInput, "registration error needs non-empty paths");
  }
  std::vector<double> out;
  out.reserve(registered.size());
  for (const auto& p : registered) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : gt_registered) best = std::min(best, (p - q).squaredNorm());
    out.push_back(std::sqrt(best));
  }
  return out;
}

namespace {

ErrorSummary summarize(std::span<const double> values) {
  ErrorSummary s;
  s.n_points = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  s.min_mm = std::numeric_limits<double>::infinity();
  s.max_mm = -std::numeric_limits<double>::infinity();
  for (const double v : values) {
    sum += v;
    s.min_mm = std::min(s.min_mm, v);
    s.max_mm = std::max(s.max_mm, v);
  }
  s.mean_mm = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) var += (v - s.mean_mm) * (v - s.mean_mm);
  s.std_mm = std::sqrt(var / static_cast<double>(values.size()));
  // Rounding can push the mean a hair outside [min, max] for constant data.
  s.mean_mm = std::clamp(s.mean_mm, s.min_mm, s.max_mm);
  return s;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

ErrorSummary mean_registration_error(const Path3& registered, const Path3& gt_registered) {
  const auto d = closest_point_distances(registered.points(), gt_registered.points());
  return summarize(d);
}

std::string_view to_string(ExperimentMethod method) noexcept {
  switch (method) {
    case ExperimentMethod::Dtw: return "dtw";
    case ExperimentMethod::IcpFromDtw: return "icp-from-dtw";
    case ExperimentMethod::IcpFromIdentity: return "icp-from-identity";
  }
  return "dtw";
}

ExperimentMethod experiment_method_from_string(std::string_view text) {
  if (text == "dtw") return ExperimentMethod::Dtw;
  if (text == "icp-from-dtw") return ExperimentMethod::IcpFromDtw;
  if (text == "icp-from-identity") return ExperimentMethod::IcpFromIdentity;
  throw Error(ErrorKind::ParseError, "unknown method '" + std::string(text) + "'");
}

void validate_protocol(const ExperimentProtocol& protocol) {
  if (protocol.runs_per_branch < 1) {
    throw Error(ErrorKind::InvalidArgument, "runs_per_branch must be at least 1");
  }
  validate_acquisition(protocol.acquisition);
  const auto& s = protocol.gt_transform_sampler;
  if (!(s.max_rotation_deg >= 0.0 && s.max_rotation_deg <= 180.0)) {
    throw Error(ErrorKind::InvalidArgument, "max_rotation_deg must be in [0, 180]");
  }
  if (!(s.min_translation_mm >= 0.0 && s.max_translation_mm >= s.min_translation_mm && std::isfinite(s.max_translation_mm))) {
    throw Error(ErrorKind::InvalidArgument, "translation bounds must satisfy 0 <= min <= max");
  }
  if (protocol.dtw.per_segment < 1) {
    throw Error(ErrorKind::InvalidArgument, "per_segment must be at least 1");
  }
  if (protocol.icp.max_iterations < 1 || !(protocol.icp.rel_tolerance > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "ICP needs max_iterations >= 1 and rel_tolerance > 0");
  }
}

std::uint64_t cell_seed(std::uint64_t master_seed, int branch, int run) {
  return master_seed + static_cast<std::uint64_t>(branch) * 1000u + static_cast<std::uint64_t>(run);
}

std::optional<ErrorSummary> aggregate_cells(const std::vector<const ExperimentCell*>& cells, Aggregation mode) {
  std::vector<double> run_means;
  std::vector<double> pooled;
  double weighted = 0.0;
  std::size_t points = 0;
  for (const auto* c : cells) {
    if (!c->converged || !c->error) continue;
    run_means.push_back(c->error->mean_mm);
    weighted += c->error->mean_mm * static_cast<double>(c->error->n_points);
    points += c->error->n_points;
    if (mode == Aggregation::PerPoint) pooled.insert(pooled.end(), c->point_errors.begin(), c->point_errors.end());
  }
  if (run_means.empty()) return std::nullopt;
  ErrorSummary s = summarize(mode == Aggregation::PerRun ? std::span<const double>(run_means) : std::span<const double>(pooled));
  s.n_points = points;
  s.mean_mm = std::clamp(weighted / static_cast<double>(points), s.min_mm, s.max_mm);
  return s;
}

SimulatedAcquisition simulate_cell(const Branch& route, const ExperimentProtocol& protocol, std::uint64_t master_seed,
                                   int run) {
  const std::uint64_t seed = cell_seed(master_seed, route.id, run);
  const auto& sampler = protocol.gt_transform_sampler;
  const RigidTransform gt = sample_rigid_transform(splitmix64(seed ^ 0x67745F7472616E73ULL), sampler.max_rotation_deg,
                                                   sampler.max_translation_mm, sampler.min_translation_mm);
  AcquisitionConfig acq = protocol.acquisition;
  acq.seed = splitmix64(seed);
  return simulate_em_path(route, acq, gt);
}

namespace {

struct CellOutcome {
  std::vector<ExperimentCell> cells;  // one per requested method, in protocol order
};

void score(ExperimentCell& cell, const RigidTransform& estimate, const Path3& em, const Path3& gt_registered) {
  cell.transform = estimate;
  const Path3 registered = apply_transform(estimate, em, Frame::Intraop);
  cell.point_errors = closest_point_distances(registered.points(), gt_registered.points());
  cell.error = summarize(cell.point_errors);
}

CellOutcome run_cell(const Branch& route, const ExperimentProtocol& protocol, std::uint64_t master_seed, int run) {
  const std::uint64_t seed = cell_seed(master_seed, route.id, run);
  const SimulatedAcquisition sim = simulate_cell(route, protocol, master_seed, run);
  const RigidTransform& gt = sim.ground_truth;
  const Path3 gt_registered = apply_transform(invert_transform(gt), sim.em_path, Frame::Intraop);

  auto blank = [&](ExperimentMethod m) {
    ExperimentCell c;
    c.branch = route.id;
    c.run = run;
    c.method = m;
    c.seed = seed;
    c.ground_truth = gt;
    c.em_points = sim.em_path.size();
    c.pull_speed = sim.pull_speed;
    return c;
  };

  std::optional<RegistrationResult> dtw;
  std::string dtw_failure;
  const bool need_dtw = std::find_if(protocol.methods.begin(), protocol.methods.end(), [](ExperimentMethod m) {
                          return m != ExperimentMethod::IcpFromIdentity;
                        }) != protocol.methods.end();
  if (need_dtw) {
    try {
      dtw = register_dtw(sim.em_path, route.centerline, protocol.dtw);
    } catch (const Error& e) {
      dtw_failure = e.what();
    }
  }

  CellOutcome out;
  for (const auto method : protocol.methods) {
    ExperimentCell cell = blank(method);
    if (method == ExperimentMethod::Dtw) {
      if (dtw) {
        cell.converged = true;
        cell.fit_rmse = dtw->fit_rmse;
        cell.warnings = dtw->warnings;
        score(cell, dtw->transform, sim.em_path, gt_registered);
      } else {
        cell.failure = dtw_failure;
      }
      out.cells.push_back(std::move(cell));
      continue;
    }

    if (method == ExperimentMethod::IcpFromDtw && !dtw) {
      cell.failure = "no DTW initialization: " + dtw_failure;
      out.cells.push_back(std::move(cell));
      continue;
    }
    const RigidTransform init = method == ExperimentMethod::IcpFromDtw ? dtw->transform : RigidTransform::identity();
    try {
      const RegistrationResult icp = register_icp(sim.em_path, route.centerline, init, protocol.icp);
      cell.converged = true;
      cell.fit_rmse = icp.fit_rmse;
      cell.iterations = icp.iterations;
      cell.warnings = icp.warnings;
      score(cell, icp.transform, sim.em_path, gt_registered);
    } catch (const NonConvergenceError& e) {
      cell.failure = e.what();
      cell.fit_rmse = e.result().fit_rmse;
      cell.iterations = e.result().iterations;
      score(cell, e.result().transform, sim.em_path, gt_registered);
    } catch (const Error& e) {
      cell.failure = e.what();
    }
    out.cells.push_back(std::move(cell));
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const PhantomModel& phantom, const ExperimentProtocol& protocol,
                                std::uint64_t master_seed) {
  validate_protocol(protocol);
  validate_phantom(phantom);

  ExperimentReport report;
  report.master_seed = master_seed;
  report.protocol = protocol;

  std::vector<Branch> routes;
  for (const auto& b : phantom.branches) {
    report.branch_ids.push_back(b.id);
    routes.push_back(phantom_route(phantom, b.id));
  }

  const std::size_t runs = static_cast<std::size_t>(protocol.runs_per_branch);
  const std::size_t jobs = routes.size() * runs;
  std::vector<CellOutcome> outcomes(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs; k = next++) {
      try {
        outcomes[k] = run_cell(routes[k / runs], protocol, master_seed, static_cast<int>(k % runs));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned threads = protocol.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : protocol.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (auto& o : outcomes) {
    for (auto& c : o.cells) report.cells.push_back(std::move(c));
  }

  for (const auto mode : protocol.aggregations) {
    for (const auto method : protocol.methods) {
      std::vector<const ExperimentCell*> all;
      for (const int id : report.branch_ids) {
        std::vector<const ExperimentCell*> branch_cells;
        for (const auto& c : report.cells) {
          if (c.method == method && c.branch == id) branch_cells.push_back(&c);
        }
        all.insert(all.end(), branch_cells.begin(), branch_cells.end());
        if (auto s = aggregate_cells(branch_cells, mode)) report.per_branch[mode][method][id] = *s;
      }
      if (auto s = aggregate_cells(all, mode)) report.overall[mode][method] = *s;
    }
  }
  return report;
}

}  // namespace cathreg
