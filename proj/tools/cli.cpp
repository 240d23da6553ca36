#include "cli.hpp"

#include <spdlog/logger.h>
#include <spdlog/sinks/ostream_sink.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cathreg/cathreg.hpp"

namespace cathreg::cli {
namespace {

namespace fs = std::filesystem;

// Raised for flag values that only the core types can reject.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AcquisitionFlags {
  double noise = 0.5;
  std::optional<double> pull_speed;
  double sample_rate = 40.0;
  double dropout = 0.0;
  double jitter = 0.0;
  double max_rotation = 30.0;
  double max_translation = 100.0;
  double min_translation = 0.0;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--noise", noise, "Gaussian noise sigma in mm")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd.add_option("--pull-speed", pull_speed, "Pull-back speed in mm/s (default: random in [10, 20])")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--sample-rate", sample_rate, "EM sample rate in Hz")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--dropout", dropout, "Per-sample dropout probability")->check(CLI::Range(0.0, 0.99))->capture_default_str();
    cmd.add_option("--jitter", jitter, "Per-sample probability of a backward excursion")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd.add_option("--max-rotation", max_rotation, "Largest ground-truth rotation in degrees")
        ->check(CLI::Range(0.0, 180.0))
        ->capture_default_str();
    cmd.add_option("--max-translation", max_translation, "Largest ground-truth translation in mm")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd.add_option("--min-translation", min_translation, "Smallest ground-truth translation in mm")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
  }

  void apply(ExperimentProtocol& p) const {
    p.acquisition.noise_sigma = noise;
    p.acquisition.pull_speed = pull_speed;
    p.acquisition.sample_rate = sample_rate;
    p.acquisition.dropout_prob = dropout;
    p.acquisition.backward_jitter_prob = jitter;
    p.gt_transform_sampler.max_rotation_deg = max_rotation;
    p.gt_transform_sampler.max_translation_mm = max_translation;
    p.gt_transform_sampler.min_translation_mm = min_translation;
  }
};

struct DtwFlags {
  std::size_t per_segment = 10;
  std::optional<std::size_t> band_radius;
  std::optional<std::size_t> resample_count;
  bool arc_length = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--per-segment", per_segment, "Correspondences kept per warp-path segment")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}))
        ->capture_default_str();
    cmd.add_option("--band-radius", band_radius, "Sakoe-Chiba band radius in samples (default: unconstrained)");
    cmd.add_option("--resample-count", resample_count, "Resample both signals to this many points")
        ->check(CLI::Range(std::size_t{4}, std::size_t{1000000}));
    cmd.add_flag("--arc-length", arc_length, "Resample by arc length instead of sample index");
  }

  DtwRegistrationConfig config() const {
    DtwRegistrationConfig c;
    c.per_segment = per_segment;
    c.band_radius = band_radius;
    if (resample_count) c.resample_target = FixedCount{*resample_count};
    c.resample_mode = arc_length ? ResampleMode::ArcLength : ResampleMode::IndexUniform;
    return c;
  }
};

struct IcpFlags {
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;
  double max_nn_distance = 50.0;
  double divergence_threshold = 250.0;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--max-iterations", max_iterations, "ICP iteration cap")
        ->check(CLI::Range(std::size_t{1}, std::size_t{1000000}))
        ->capture_default_str();
    cmd.add_option("--tolerance", tolerance, "ICP relative RMSE improvement to stop at")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--max-nn-distance", max_nn_distance, "ICP correspondence cutoff in mm (0 disables)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd.add_option("--divergence-threshold", divergence_threshold, "Final ICP RMSE in mm treated as divergence")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  IcpConfig config() const {
    IcpConfig c;
    c.max_iterations = max_iterations;
    c.rel_tolerance = tolerance;
    c.max_nn_distance = max_nn_distance > 0.0 ? std::optional<double>(max_nn_distance) : std::nullopt;
    c.divergence_threshold = divergence_threshold;
    return c;
  }
};

struct SimulateFlags {
  int branches = 6;
  std::uint64_t seed = 0;
  std::string out;
  AcquisitionFlags acq;
};

struct RegisterFlags {
  std::string method = "dtw";
  std::string em;
  std::string centerline;
  std::string init;
  std::string out = "registration.json";
  bool to_stdout = false;
  DtwFlags dtw;
  IcpFlags icp;
};

struct EvaluateFlags {
  std::string phantom;
  int branches = 6;
  std::optional<std::uint64_t> phantom_seed;
  int runs = 5;
  std::vector<std::string> methods{"dtw", "icp-from-dtw"};
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> formats{"csv", "json", "svg"};
  std::string aggregate = "per-run";
  unsigned threads = 0;
  bool to_stdout = false;
  AcquisitionFlags acq;
  DtwFlags dtw;
  IcpFlags icp;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_st>(err, true);
  auto logger = std::make_shared<spdlog::logger>("cathreg", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::info);
  return logger;
}

// Every option of the invoked subcommand with its final value, loadable
// again through --config. Unset optional values are left out.
std::string effective_config(const CLI::App& app) {
  const auto subs = app.get_subcommands();
  const std::string prefix = subs.empty() ? std::string() : subs.front()->get_name() + ".";
  std::istringstream in(app.config_to_str(true, false));
  std::string text;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line.ends_with("=\"\"")) continue;
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    const bool scoped = dot != std::string::npos && dot < eq;
    if (scoped && !line.starts_with(prefix)) continue;
    text += line + '\n';
  }
  return text;
}

void write_effective_config(const CLI::App& app, const fs::path& dir, spdlog::logger& log) {
  const fs::path file = dir / "effective_config.toml";
  write_text_file(file, effective_config(app));
  log.debug("wrote {}", file.string());
}

ExperimentProtocol simulation_protocol(const AcquisitionFlags& acq) {
  ExperimentProtocol p;
  acq.apply(p);
  if (p.gt_transform_sampler.min_translation_mm > p.gt_transform_sampler.max_translation_mm) {
    throw UsageError("--min-translation must not exceed --max-translation");
  }
  return p;
}

int cmd_simulate(const CLI::App& app, const SimulateFlags& f, std::ostream&, spdlog::logger& log) {
  const ExperimentProtocol protocol = simulation_protocol(f.acq);
  try {
    validate_acquisition(protocol.acquisition);
  } catch (const Error& e) {
    throw UsageError(e.detail());
  }

  const fs::path dir(f.out);
  const PhantomModel phantom = generate_phantom(f.branches, f.seed);
  write_text_file(dir / "phantom.json", format_phantom_json(phantom));
  for (const auto& b : phantom.branches) {
    const Branch route = phantom_route(phantom, b.id);
    const SimulatedAcquisition sim = simulate_cell(route, protocol, f.seed, 0);
    const std::string id = std::to_string(b.id);
    write_path_csv(dir / ("em_path_" + id + ".csv"), sim.em_path);
    write_transform_json(dir / ("gt_transform_" + id + ".json"), {sim.ground_truth, Frame::Preop, Frame::Em});
    write_path_csv(dir / "routes" / ("centerline_" + id + ".csv"), route.centerline);
    log.debug("branch {}: {} EM samples, pull speed {:.3f} mm/s", b.id, sim.em_path.size(), sim.pull_speed);
  }
  write_effective_config(app, dir, log);
  log.info("simulated {} branches into {}", phantom.branches.size(), dir.string());
  return kExitOk;
}

RigidTransform load_init(const std::string& file, spdlog::logger& log) {
  const FramedTransform t = read_transform_json(file);
  if (t.from == Frame::Preop && t.to == Frame::Em) {
    log.info("--init maps preop to em; using its inverse");
    return invert_transform(t.transform);
  }
  if (t.from != Frame::Em) {
    log.warn("--init maps {} to {}; using it as the EM-to-centerline estimate", to_string(t.from), to_string(t.to));
  }
  return t.transform;
}

void emit_registration(const RegistrationResult& result, const RegisterFlags& f, std::ostream& out) {
  const std::string json = format_registration_json(result);
  write_text_file(f.out, json);
  if (f.to_stdout) out << json;
}

int cmd_register(const CLI::App& app, const RegisterFlags& f, std::ostream& out, spdlog::logger& log) {
  const fs::path out_dir = fs::path(f.out).has_parent_path() ? fs::path(f.out).parent_path() : fs::path(".");
  if (f.method != "icp" && !f.init.empty()) log.warn("--init is only used by --method icp");

  const Path3 em = read_path_csv(f.em, Frame::Em);
  const Path3 centerline = read_path_csv(f.centerline, Frame::Preop);
  log.debug("EM path: {} points, centerline: {} points", em.size(), centerline.size());

  RegistrationResult result;
  if (f.method == "dtw") {
    result = register_dtw(em, centerline, f.dtw.config());
  } else if (f.method == "landmarks") {
    result = register_landmarks(centerline.points(), em.points());
  } else {
    const RigidTransform init = f.init.empty() ? RigidTransform::identity() : load_init(f.init, log);
    try {
      result = register_icp(em, centerline, init, f.icp.config());
    } catch (const NonConvergenceError& e) {
      emit_registration(e.result(), f, out);
      write_effective_config(app, out_dir, log);
      log.error("{}", e.what());
      return kExitNonConvergence;
    }
  }
  for (const auto& w : result.warnings) log.warn("{}", w);
  emit_registration(result, f, out);
  write_effective_config(app, out_dir, log);
  log.info("{} registration: fit RMSE {:.4f} mm, written to {}", to_string(result.method), result.fit_rmse, f.out);
  return kExitOk;
}

int cmd_evaluate(const CLI::App& app, const EvaluateFlags& f, std::ostream& out, spdlog::logger& log) {
  ExperimentProtocol protocol = simulation_protocol(f.acq);
  protocol.runs_per_branch = f.runs;
  protocol.methods.clear();
  for (const auto& m : f.methods) {
    const ExperimentMethod method = experiment_method_from_string(m);
    if (std::find(protocol.methods.begin(), protocol.methods.end(), method) == protocol.methods.end()) {
      protocol.methods.push_back(method);
    }
  }
  protocol.dtw = f.dtw.config();
  protocol.icp = f.icp.config();
  protocol.threads = f.threads;
  if (f.aggregate == "per-run") {
    protocol.aggregations = {Aggregation::PerRun};
  } else if (f.aggregate == "per-point") {
    protocol.aggregations = {Aggregation::PerPoint};
  } else {
    protocol.aggregations = {Aggregation::PerRun, Aggregation::PerPoint};
  }
  std::vector<ReportFormat> formats;
  for (const auto& name : f.formats) {
    const ReportFormat fmt = report_format_from_string(name);
    if (std::find(formats.begin(), formats.end(), fmt) == formats.end()) formats.push_back(fmt);
  }
  try {
    validate_protocol(protocol);
  } catch (const Error& e) {
    throw UsageError(e.detail());
  }

  const fs::path dir(f.out);
  PhantomModel phantom;
  if (!f.phantom.empty()) {
    phantom = parse_phantom_json(read_text_file(f.phantom));
  } else {
    phantom = generate_phantom(f.branches, f.phantom_seed.value_or(f.seed));
    write_text_file(dir / "phantom.json", format_phantom_json(phantom));
  }

  const ExperimentReport report = run_experiment(phantom, protocol, f.seed);
  for (const auto& p : emit_report(report, formats, dir)) log.debug("wrote {}", p.string());
  write_effective_config(app, dir, log);

  std::size_t failed = 0;
  for (const auto& c : report.cells) {
    if (!c.converged) {
      ++failed;
      log.debug("branch {} run {} {}: {}", c.branch, c.run, to_string(c.method), c.failure);
    }
  }
  if (!report.overall.empty()) {
    for (const auto& [method, s] : report.overall.begin()->second) {
      log.info("{}: overall mean {:.3f} mm (std {:.3f}, n={})", to_string(method), s.mean_mm, s.std_mm, s.n_points);
    }
  }
  if (failed > 0) log.warn("{} of {} cells did not converge", failed, report.cells.size());
  if (f.to_stdout) out << format_report_csv(report);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NonConvergence: return kExitNonConvergence;
    default: return kExitIo;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);

  CLI::App app{"Register tracked catheter paths to vessel centerlines", "cathreg"};
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  bool verbose = false;
  app.add_flag("-q,--quiet", quiet, "Log errors only");
  app.add_flag("-v,--verbose", verbose, "Log debug detail");

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a phantom and simulated EM pull-backs");
  simulate->add_option("--branches", sim.branches, "Number of phantom branches")->check(CLI::Range(1, 12))->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  sim.acq.add_to(*simulate);

  RegisterFlags reg;
  auto* registration = app.add_subcommand("register", "Register an EM path onto a centerline");
  registration->add_option("--method", reg.method, "Registration method")
      ->check(CLI::IsMember({"dtw", "icp", "landmarks"}))
      ->capture_default_str();
  registration->add_option("--em", reg.em, "EM path CSV (landmarks: EM landmark CSV)")->required();
  registration->add_option("--centerline", reg.centerline, "Centerline CSV (landmarks: preop landmark CSV)")->required();
  registration->add_option("--init", reg.init, "Initial transform JSON for ICP");
  registration->add_option("--out", reg.out, "Result JSON file")->capture_default_str();
  registration->add_flag("--stdout", reg.to_stdout, "Also print the result JSON to standard output");
  reg.dtw.add_to(*registration);
  reg.icp.add_to(*registration);

  EvaluateFlags ev;
  auto* evaluate = app.add_subcommand("evaluate", "Run the simulated registration experiment");
  evaluate->add_option("--phantom", ev.phantom, "Phantom JSON (default: generate one)");
  evaluate->add_option("--branches", ev.branches, "Branches of a generated phantom")->check(CLI::Range(1, 12))->capture_default_str();
  evaluate->add_option("--phantom-seed", ev.phantom_seed, "Seed of a generated phantom (default: --seed)");
  evaluate->add_option("--runs", ev.runs, "Runs per branch")->check(CLI::Range(1, 100000))->capture_default_str();
  evaluate->add_option("--methods", ev.methods, "Methods to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"dtw", "icp-from-dtw", "icp-from-identity"}))
      ->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Master seed")->capture_default_str();
  evaluate->add_option("--out", ev.out, "Output directory")->required();
  evaluate->add_option("--formats", ev.formats, "Report formats")
      ->delimiter(',')
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->capture_default_str();
  evaluate->add_option("--aggregate", ev.aggregate, "Spread statistics over per-run means or pooled points")
      ->check(CLI::IsMember({"per-run", "per-point", "both"}))
      ->capture_default_str();
  evaluate->add_option("--threads", ev.threads, "Worker threads (0: one per core)")->capture_default_str();
  evaluate->add_flag("--stdout", ev.to_stdout, "Also print the CSV report to standard output");
  ev.acq.add_to(*evaluate);
  ev.dtw.add_to(*evaluate);
  ev.icp.add_to(*evaluate);
  evaluate->get_option("--phantom")->excludes("--branches")->excludes("--phantom-seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::FileError& e) {
    err << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (verbose) log->set_level(spdlog::level::debug);
  if (quiet) log->set_level(spdlog::level::err);

  try {
    if (simulate->parsed()) return cmd_simulate(app, sim, out, *log);
    if (registration->parsed()) return cmd_register(app, reg, out, *log);
    return cmd_evaluate(app, ev, out, *log);
  } catch (const UsageError& e) {
    log->error("{}", e.what());
    err << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const Error& e) {
    log->error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    return kExitIo;
  }
}

}  // namespace cathreg::cli
