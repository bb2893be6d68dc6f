#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twloc {

enum class ErrorCode {
  Parameter,
  Domain,
  WindowOverflow,
  Window,
  InsufficientData,
  AmbiguousSide,
  Validation,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library. `step` names the processing stage
// (e.g. "V. side detection") when raised from the localization pipeline.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string step = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& step() const noexcept { return step_; }
  const std::string& field() const noexcept { return field_; }

  // Same error annotated with a pipeline step label.
  Error with_step(std::string step) const;

  static Error validation(std::string field, const std::string& message);

  // True for errors that mean "the method could not decide" rather than bad input.
  bool is_method_error() const noexcept {
    return code_ == ErrorCode::InsufficientData || code_ == ErrorCode::AmbiguousSide;
  }

 private:
  ErrorCode code_;
  std::string step_;
  std::string field_;
  std::string base_message_;
};

}  // namespace twloc
