#pragma once

#include <stdexcept>
#include <string>

namespace cover {

enum class Errc {
  invalid_spec,
  invalid_argument,
  precondition,
  degenerate_frame,
  rank_deficient,
  degenerate,
  dimension_mismatch,
  exhausted,
  io,
  format,
};

const char* to_string(Errc code);

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace cover
