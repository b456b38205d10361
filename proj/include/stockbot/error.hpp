#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stockbot {

enum class ErrorKind {
  dimension,
  config,
  domain,
  contract,
  format,
  data,
  insufficient_data,
  degenerate_series,
  non_finite,
  input_not_found,
  spec_mismatch,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::config: return "config";
    case ErrorKind::domain: return "domain";
    case ErrorKind::contract: return "contract";
    case ErrorKind::format: return "format";
    case ErrorKind::data: return "data";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::degenerate_series: return "degenerate-series";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::input_not_found: return "input-not-found";
    case ErrorKind::spec_mismatch: return "spec-mismatch";
  }
  return "unknown";
}

/// Every failure in the library is reported through this type. `module()`
/// names the component that raised it so the CLI can surface provenance.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace stockbot
