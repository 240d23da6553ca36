#include "cathreg/path_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "cathreg/error.hpp"
#include "json_codec.hpp"

namespace cathreg {

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw Error(ErrorKind::InvalidArgument, "could not format number");
  }
  return std::string(buf.data(), end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_no) + ": '" + std::string(field) + "' is not a number");
  }
  return value;
}

}  // namespace

Path3 parse_path_csv(std::string_view text, Frame frame) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    const auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    lines.push_back(line);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }

  std::size_t idx = 0;
  while (idx < lines.size() && trim(lines[idx]).empty()) ++idx;
  if (idx == lines.size()) {
    throw Error(ErrorKind::ParseError, "missing CSV header");
  }
  const auto header = split_commas(trim(lines[idx]));
  bool has_t = false;
  if (header.size() == 4 && header[0] == "t" && header[1] == "x" && header[2] == "y" && header[3] == "z") {
    has_t = true;
  } else if (!(header.size() == 3 && header[0] == "x" && header[1] == "y" && header[2] == "z")) {
    throw Error(ErrorKind::ParseError, "expected header 't,x,y,z' or 'x,y,z'");
  }
  ++idx;

  std::vector<Point3> points;
  std::vector<double> times;
  std::size_t with_time = 0;
  for (; idx < lines.size(); ++idx) {
    const auto line = trim(lines[idx]);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    const std::size_t line_no = idx + 1;
    if (fields.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields");
    }
    const std::size_t off = has_t ? 1 : 0;
    if (has_t && !fields[0].empty()) {
      times.push_back(parse_double(fields[0], line_no));
      ++with_time;
    }
    points.emplace_back(parse_double(fields[off], line_no), parse_double(fields[off + 1], line_no),
                        parse_double(fields[off + 2], line_no));
  }
  if (points.empty()) {
    throw Error(ErrorKind::DegenerateInput, "path CSV has no samples");
  }
  if (with_time != 0 && with_time != points.size()) {
    throw Error(ErrorKind::ParseError, "t column must be filled on every row or on none");
  }
  std::optional<std::vector<double>> ts;
  if (with_time != 0) ts = std::move(times);
  return Path3(std::move(points), frame, std::move(ts));
}

std::string format_path_csv(const Path3& path) {
  std::string out = "t,x,y,z\n";
  const auto& ts = path.timestamps();
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (ts) out += format_number((*ts)[i]);
    const auto& p = path[i];
    out += ',' + format_number(p.x()) + ',' + format_number(p.y()) + ',' + format_number(p.z()) + '\n';
  }
  return out;
}

Path3 read_path_csv(const std::filesystem::path& file, Frame frame) {
  try {
    return parse_path_csv(read_text_file(file), frame);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IoError) throw;
    throw Error(e.kind(), file.string() + ": " + e.detail(), e.stage());
  }
}

void write_path_csv(const std::filesystem::path& file, const Path3& path) {
  write_text_file(file, format_path_csv(path));
}

std::string format_transform_json(const FramedTransform& transform) {
  return detail::transform_json(transform.transform, transform.from, transform.to).dump(2) + "\n";
}

FramedTransform parse_transform_json(std::string_view text) {
  detail::Json doc;
  try {
    doc = detail::Json::parse(text);
  } catch (const detail::Json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("transform JSON: ") + e.what());
  }
  // A registration result document nests the transform under "transform".
  if (doc.is_object() && doc.contains("transform") && doc["transform"].is_object()) doc = doc["transform"];
  FramedTransform out;
  try {
    const auto& rot = doc.at("rotation");
    const auto& tr = doc.at("translation");
    if (!rot.is_array() || rot.size() != 3 || !tr.is_array() || tr.size() != 3) {
      throw Error(ErrorKind::ParseError, "rotation must be 3x3 and translation a 3-vector");
    }
    for (int i = 0; i < 3; ++i) {
      if (!rot[i].is_array() || rot[i].size() != 3) {
        throw Error(ErrorKind::ParseError, "rotation must be 3x3");
      }
      for (int j = 0; j < 3; ++j) out.transform.rotation(i, j) = rot[i][j].get<double>();
      out.transform.translation[i] = tr[i].get<double>();
    }
    if (doc.contains("frame_from")) out.from = frame_from_string(doc["frame_from"].get<std::string>());
    if (doc.contains("frame_to")) out.to = frame_from_string(doc["frame_to"].get<std::string>());
  } catch (const detail::Json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("transform JSON: ") + e.what());
  }
  if (!out.transform.is_proper(1e-6)) {
    throw Error(ErrorKind::InvalidArgument, "transform rotation is not a proper rotation");
  }
  return out;
}

FramedTransform read_transform_json(const std::filesystem::path& file) {
  return parse_transform_json(read_text_file(file));
}

void write_transform_json(const std::filesystem::path& file, const FramedTransform& transform) {
  write_text_file(file, format_transform_json(transform));
}

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot open '" + file.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& file, std::string_view content) {
  std::error_code ec;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::IoError, "cannot open '" + file.string() + "' for writing");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw Error(ErrorKind::IoError, "write to '" + file.string() + "' failed");
  }
}

}  // namespace cathreg
