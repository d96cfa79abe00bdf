#include "dasphys/error.hpp"

namespace dasphys {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_axis: return "invalid-axis";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::rank: return "rank";
    case ErrorKind::undefined_snr: return "undefined-snr";
    case ErrorKind::invalid_class: return "invalid-class";
    case ErrorKind::degenerate_channel: return "degenerate-channel";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::config: return "config";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::format: return "format";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::fingerprint: return "fingerprint";
    case ErrorKind::checksum: return "checksum";
    case ErrorKind::missing_class: return "missing-class";
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace dasphys
