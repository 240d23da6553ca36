#include "cathreg/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "cathreg/error.hpp"
#include "cathreg/path_io.hpp"
#include "json_codec.hpp"

namespace cathreg {

ReportFormat report_format_from_string(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  if (text == "svg") return ReportFormat::Svg;
  throw Error(ErrorKind::ParseError, "unknown report format '" + std::string(text) + "'");
}

namespace {

std::string_view aggregation_name(Aggregation mode) { return mode == Aggregation::PerRun ? "per-run" : "per-point"; }

std::string summary_fields(const std::optional<ErrorSummary>& s) {
  if (!s) return ",,,,0";
  return format_number(s->mean_mm) + ',' + format_number(s->std_mm) + ',' + format_number(s->min_mm) + ',' +
         format_number(s->max_mm) + ',' + std::to_string(s->n_points);
}

bool all_converged(const ExperimentReport& report, ExperimentMethod method) {
  return std::all_of(report.cells.begin(), report.cells.end(),
                     [&](const ExperimentCell& c) { return c.method != method || c.converged; });
}

detail::Json summary_json(const ErrorSummary& s) {
  return detail::Json{{"mean_mm", s.mean_mm},
                      {"std_mm", s.std_mm},
                      {"min_mm", s.min_mm},
                      {"max_mm", s.max_mm},
                      {"n_points", s.n_points}};
}

std::string fixed(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", v);
  return buf.data();
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double magnitude = std::pow(10.0, std::floor(std::log10(v)));
  for (const double step : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (step * magnitude >= v) return step * magnitude;
  }
  return 10.0 * magnitude;
}

}  // namespace

std::string format_report_csv(const ExperimentReport& report) {
  std::string out = "branch,run,method,mean_mm,std_mm,min_mm,max_mm,n_points,converged\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.branch) + ',' + std::to_string(c.run) + ',' + std::string(to_string(c.method)) + ',' +
           summary_fields(c.error) + ',' + (c.converged ? "true" : "false") + '\n';
  }
  for (const auto mode : report.protocol.aggregations) {
    const auto agg = report.overall.find(mode);
    for (const auto method : report.protocol.methods) {
      std::optional<ErrorSummary> s;
      if (agg != report.overall.end()) {
        if (const auto it = agg->second.find(method); it != agg->second.end()) s = it->second;
      }
      out += std::string(mode == Aggregation::PerRun ? "overall" : "overall-per-point") + ",," +
             std::string(to_string(method)) + ',' + summary_fields(s) + ',' +
             (all_converged(report, method) ? "true" : "false") + '\n';
    }
  }
  return out;
}

std::string format_report_json(const ExperimentReport& report) {
  using detail::Json;
  const auto& p = report.protocol;

  Json methods = Json::array();
  for (const auto m : p.methods) methods.push_back(std::string(to_string(m)));
  Json aggregations = Json::array();
  for (const auto a : p.aggregations) aggregations.push_back(std::string(aggregation_name(a)));

  Json protocol{
      {"runs_per_branch", p.runs_per_branch},
      {"acquisition",
       {{"pull_speed_mm_s", p.acquisition.pull_speed ? Json(*p.acquisition.pull_speed) : Json("uniform[10,20]")},
        {"sample_rate_hz", p.acquisition.sample_rate},
        {"noise_sigma_mm", p.acquisition.noise_sigma},
        {"dropout_prob", p.acquisition.dropout_prob},
        {"backward_jitter_prob", p.acquisition.backward_jitter_prob}}},
      {"gt_transform_sampler",
       {{"max_rotation_deg", p.gt_transform_sampler.max_rotation_deg},
        {"max_translation_mm", p.gt_transform_sampler.max_translation_mm},
        {"min_translation_mm", p.gt_transform_sampler.min_translation_mm}}},
      {"dtw",
       {{"per_segment", p.dtw.per_segment},
        {"band_radius", p.dtw.band_radius ? Json(*p.dtw.band_radius) : Json(nullptr)}}},
      {"icp",
       {{"max_iterations", p.icp.max_iterations},
        {"rel_tolerance", p.icp.rel_tolerance},
        {"max_nn_distance_mm", p.icp.max_nn_distance ? Json(*p.icp.max_nn_distance) : Json(nullptr)},
        {"divergence_threshold_mm", p.icp.divergence_threshold}}},
      {"methods", methods},
      {"aggregations", aggregations}};

  Json cells = Json::array();
  for (const auto& c : report.cells) {
    Json cell{{"branch", c.branch},
              {"run", c.run},
              {"method", std::string(to_string(c.method))},
              {"seed", c.seed},
              {"converged", c.converged},
              {"error", c.error ? summary_json(*c.error) : Json(nullptr)},
              {"ground_truth", detail::transform_json(c.ground_truth, Frame::Preop, Frame::Em)},
              {"transform", c.transform ? detail::transform_json(*c.transform, Frame::Em, Frame::Intraop) : Json(nullptr)},
              {"fit_rmse_mm", detail::number_or_null(c.fit_rmse)},
              {"iterations", c.iterations},
              {"em_points", c.em_points},
              {"pull_speed_mm_s", c.pull_speed},
              {"warnings", c.warnings}};
    if (!c.failure.empty()) cell["failure"] = c.failure;
    cells.push_back(std::move(cell));
  }

  Json summaries = Json::object();
  for (const auto& [mode, by_method] : report.overall) {
    Json block = Json::object();
    for (const auto& [method, s] : by_method) {
      Json branches = Json::object();
      if (const auto pb = report.per_branch.find(mode); pb != report.per_branch.end()) {
        if (const auto pm = pb->second.find(method); pm != pb->second.end()) {
          for (const auto& [id, bs] : pm->second) branches[std::to_string(id)] = summary_json(bs);
        }
      }
      block[std::string(to_string(method))] = Json{{"overall", summary_json(s)}, {"branches", branches}};
    }
    summaries[std::string(aggregation_name(mode))] = block;
  }

  Json doc{{"master_seed", report.master_seed},
           {"branches", report.branch_ids},
           {"protocol", protocol},
           {"cells", cells},
           {"summaries", summaries}};
  return doc.dump(2) + "\n";
}

std::string format_report_svg(const ExperimentReport& report) {
  static constexpr std::array<const char*, 12> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                                          "#bcbd22", "#17becf", "#393b79", "#637939"};
  const Aggregation mode =
      report.protocol.aggregations.empty() ? Aggregation::PerRun : report.protocol.aggregations.front();
  const auto& methods = report.protocol.methods;
  const std::size_t bars = report.branch_ids.size() + 1;

  const double panel_w = 60.0 + 34.0 * static_cast<double>(bars);
  const double panel_h = 320.0;
  const double margin_top = 40.0;
  const double plot_h = 220.0;
  const double width = std::max(200.0, panel_w * static_cast<double>(std::max<std::size_t>(methods.size(), 1)));

  auto summary_for = [&](ExperimentMethod m, std::optional<int> branch) -> std::optional<ErrorSummary> {
    if (branch) {
      const auto a = report.per_branch.find(mode);
      if (a == report.per_branch.end()) return std::nullopt;
      const auto b = a->second.find(m);
      if (b == a->second.end()) return std::nullopt;
      const auto c = b->second.find(*branch);
      if (c == b->second.end()) return std::nullopt;
      return c->second;
    }
    const auto a = report.overall.find(mode);
    if (a == report.overall.end()) return std::nullopt;
    const auto b = a->second.find(m);
    if (b == a->second.end()) return std::nullopt;
    return b->second;
  };

  double y_max = 0.0;
  for (const auto m : methods) {
    for (const int id : report.branch_ids) {
      if (auto s = summary_for(m, id)) y_max = std::max({y_max, s->max_mm, s->mean_mm + s->std_mm});
    }
    if (auto s = summary_for(m, std::nullopt)) y_max = std::max({y_max, s->max_mm, s->mean_mm + s->std_mm});
  }
  y_max = nice_ceiling(y_max);

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width) + "\" height=\"" + fixed(panel_h) +
         "\" viewBox=\"0 0 " + fixed(width) + ' ' + fixed(panel_h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + fixed(width) + "\" height=\"" + fixed(panel_h) + "\" fill=\"white\"/>\n";

  for (std::size_t pm = 0; pm < methods.size(); ++pm) {
    const auto method = methods[pm];
    const double x0 = panel_w * static_cast<double>(pm);
    const double axis_x = x0 + 45.0;
    const double base_y = margin_top + plot_h;
    auto y_of = [&](double v) { return base_y - plot_h * std::clamp(v / y_max, 0.0, 1.0); };

    out += "<g class=\"panel\" data-method=\"" + xml_escape(to_string(method)) + "\">\n";
    out += "<text x=\"" + fixed(x0 + panel_w / 2.0) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" +
           xml_escape(to_string(method)) + " mean registration error (mm)</text>\n";
    out += "<line class=\"axis\" x1=\"" + fixed(axis_x) + "\" y1=\"" + fixed(margin_top) + "\" x2=\"" + fixed(axis_x) +
           "\" y2=\"" + fixed(base_y) + "\" stroke=\"black\"/>\n";
    out += "<line class=\"axis\" x1=\"" + fixed(axis_x) + "\" y1=\"" + fixed(base_y) + "\" x2=\"" +
           fixed(x0 + panel_w - 10.0) + "\" y2=\"" + fixed(base_y) + "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
      const double v = y_max * tick / 4.0;
      out += "<text x=\"" + fixed(axis_x - 4.0) + "\" y=\"" + fixed(y_of(v) + 4.0) + "\" text-anchor=\"end\">" +
             fixed(v) + "</text>\n";
    }

    for (std::size_t k = 0; k < bars; ++k) {
      const bool overall = k + 1 == bars;
      const std::optional<int> branch = overall ? std::nullopt : std::optional<int>(report.branch_ids[k]);
      const auto s = summary_for(method, branch);
      const double cx = axis_x + 22.0 + 34.0 * static_cast<double>(k);
      const double bar_w = 22.0;
      const std::string label = overall ? "All" : "B" + std::to_string(*branch);
      const char* colour = overall ? "#444444" : palette[k % palette.size()];
      const double mean = s ? s->mean_mm : 0.0;

      out += "<rect class=\"" + std::string(overall ? "bar-overall" : "bar") + "\" data-label=\"" + label +
             "\" x=\"" + fixed(cx - bar_w / 2.0) + "\" y=\"" + fixed(y_of(mean)) + "\" width=\"" + fixed(bar_w) +
             "\" height=\"" + fixed(base_y - y_of(mean)) + "\" fill=\"" + colour + "\" fill-opacity=\"0.75\"/>\n";
      if (s) {
        // Std-dev bar around the mean, min/max whiskers with caps.
        out += "<rect class=\"std\" x=\"" + fixed(cx - 3.0) + "\" y=\"" + fixed(y_of(s->mean_mm + s->std_mm)) +
               "\" width=\"6.00\" height=\"" + fixed(y_of(std::max(0.0, s->mean_mm - s->std_mm)) - y_of(s->mean_mm + s->std_mm)) +
               "\" fill=\"black\" fill-opacity=\"0.35\"/>\n";
        out += "<line class=\"whisker\" x1=\"" + fixed(cx) + "\" y1=\"" + fixed(y_of(s->min_mm)) + "\" x2=\"" + fixed(cx) +
               "\" y2=\"" + fixed(y_of(s->max_mm)) + "\" stroke=\"black\"/>\n";
        for (const double v : {s->min_mm, s->max_mm}) {
          out += "<line class=\"whisker-cap\" x1=\"" + fixed(cx - 5.0) + "\" y1=\"" + fixed(y_of(v)) + "\" x2=\"" +
                 fixed(cx + 5.0) + "\" y2=\"" + fixed(y_of(v)) + "\" stroke=\"black\"/>\n";
        }
      }
      out += "<text x=\"" + fixed(cx) + "\" y=\"" + fixed(base_y + 14.0) + "\" text-anchor=\"middle\">" + label +
             "</text>\n";
      if (s) {
        out += "<text x=\"" + fixed(cx) + "\" y=\"" + fixed(base_y + 28.0) + "\" text-anchor=\"middle\" font-size=\"9\">" +
               fixed(s->mean_mm) + "</text>\n";
      }
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<std::filesystem::path> emit_report(const ExperimentReport& report, const std::vector<ReportFormat>& formats,
                                               const std::filesystem::path& directory) {
  std::vector<std::filesystem::path> written;
  for (const auto format : formats) {
    std::filesystem::path file = directory;
    switch (format) {
      case ReportFormat::Csv:
        file /= "report.csv";
        write_text_file(file, format_report_csv(report));
        break;
      case ReportFormat::Json:
        file /= "report.json";
        write_text_file(file, format_report_json(report));
        break;
      case ReportFormat::Svg:
        file /= "report.svg";
        write_text_file(file, format_report_svg(report));
        break;
    }
    written.push_back(file);
  }
  return written;
}

}  // namespace cathreg
