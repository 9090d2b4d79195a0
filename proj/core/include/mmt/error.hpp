#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmt {

enum class Errc {
  invalid_config,
  invalid_argument,
  shape_mismatch,
  out_of_range,
  non_finite,
  not_on_tape,
  empty_segment,
  empty_input,
  bad_magic,
  bad_version,
  truncated,
  misaligned,
  io_failure,
  vocab_mismatch,
  missing_image,
  wrong_variant,
};

std::string_view to_string(Errc code);

/// Process exit code for an error: 1 = configuration, 2 = data, 3 = numeric.
int exit_code(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmt
