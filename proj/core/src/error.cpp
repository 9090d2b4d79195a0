#include "mmt/error.hpp"

namespace mmt {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_config: return "invalid_config";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::out_of_range: return "out_of_range";
    case Errc::non_finite: return "non_finite";
    case Errc::not_on_tape: return "not_on_tape";
    case Errc::empty_segment: return "empty_segment";
    case Errc::empty_input: return "empty_input";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::truncated: return "truncated";
    case Errc::misaligned: return "misaligned";
    case Errc::io_failure: return "io_failure";
    case Errc::vocab_mismatch: return "vocab_mismatch";
    case Errc::missing_image: return "missing_image";
    case Errc::wrong_variant: return "wrong_variant";
  }
  return "unknown";
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::invalid_config:
    case Errc::invalid_argument:
    case Errc::wrong_variant:
    case Errc::missing_image:
      return 1;
    case Errc::empty_segment:
    case Errc::empty_input:
    case Errc::bad_magic:
    case Errc::bad_version:
    case Errc::truncated:
    case Errc::misaligned:
    case Errc::io_failure:
    case Errc::vocab_mismatch:
      return 2;
    case Errc::shape_mismatch:
    case Errc::out_of_range:
    case Errc::non_finite:
    case Errc::not_on_tape:
      return 3;
  }
  return 3;
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace mmt
