#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cathreg {

enum class ErrorKind {
  InvalidArgument,
  DegenerateInput,
  DegenerateGeometry,
  InfeasibleBand,
  NonConvergence,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Library-wide exception. `stage()` names the pipeline step that failed
/// (empty when raised outside a pipeline).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string stage = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error, relabelled with the stage it surfaced from.
  Error with_stage(std::string stage) const;

 private:
  ErrorKind kind_;
  std::string stage_;
  std::string detail_;
};

}  // namespace cathreg
