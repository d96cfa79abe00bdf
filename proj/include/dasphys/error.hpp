#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dasphys {

enum class ErrorKind {
  invalid_axis,
  dimension,
  rank,
  undefined_snr,
  invalid_class,
  degenerate_channel,
  insufficient_data,
  config,
  divergence,
  format,
  integrity,
  fingerprint,
  checksum,
  missing_class,
  usage,
  io,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; the CLI maps kind() to
// an exit code and a categorized JSON result line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dasphys
