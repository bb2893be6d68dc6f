#include "twloc/error.hpp"

namespace twloc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parameter: return "parameter";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::WindowOverflow: return "window-overflow";
    case ErrorCode::Window: return "window";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::AmbiguousSide: return "ambiguous-side";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& message, const std::string& step) {
  std::string out;
  if (!step.empty()) {
    out += "[" + step + "] ";
  }
  out += std::string(to_string(code)) + " error: " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string step)
    : std::runtime_error(compose(code, message, step)),
      code_(code),
      step_(std::move(step)),
      base_message_(message) {}

Error Error::with_step(std::string step) const {
  Error e(code_, base_message_, std::move(step));
  e.field_ = field_;
  return e;
}

Error Error::validation(std::string field, const std::string& message) {
  Error e(ErrorCode::Validation, field + ": " + message);
  e.field_ = std::move(field);
  return e;
}

}  // namespace twloc
