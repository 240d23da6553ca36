#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cathreg/geometry.hpp"

namespace cathreg {

// Path CSV: header `t,x,y,z` (an `x,y,z` header is also accepted), one row
// per sample. The t column is either filled on every row or empty on every
// row. Numbers are written in shortest round-trip form.

Path3 parse_path_csv(std::string_view text, Frame frame);
std::string format_path_csv(const Path3& path);
Path3 read_path_csv(const std::filesystem::path& file, Frame frame);
void write_path_csv(const std::filesystem::path& file, const Path3& path);

/// Transform plus the frames it maps between, as stored on disk.
struct FramedTransform {
  RigidTransform transform;
  Frame from = Frame::Em;
  Frame to = Frame::Intraop;
};

// Transform JSON: {"rotation": [[..],[..],[..]] (row-major),
// "translation": [tx,ty,tz], "frame_from": "...", "frame_to": "..."}.

std::string format_transform_json(const FramedTransform& transform);
/// Also accepts a registration result document and reads its "transform".
FramedTransform parse_transform_json(std::string_view text);
FramedTransform read_transform_json(const std::filesystem::path& file);
void write_transform_json(const std::filesystem::path& file, const FramedTransform& transform);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_number(double value);

std::string read_text_file(const std::filesystem::path& file);
/// Creates parent directories as needed; throws IoError on failure.
void write_text_file(const std::filesystem::path& file, std::string_view content);

}  // namespace cathreg
