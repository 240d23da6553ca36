#include "cathreg/error.hpp"

namespace cathreg {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::InfeasibleBand: return "InfeasibleBand";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose_message(ErrorKind kind, const std::string& message, const std::string& stage) {
  std::string out(to_string(kind));
  if (!stage.empty()) {
    out += " [" + stage + "]";
  }
  out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string stage)
    : std::runtime_error(compose_message(kind, message, stage)),
      kind_(kind),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::with_stage(std::string stage) const { return Error(kind_, detail_, std::move(stage)); }

}  // namespace cathreg
