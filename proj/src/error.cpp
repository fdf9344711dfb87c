#include "cover/error.hpp"

namespace cover {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_spec: return "invalid spec";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::precondition: return "precondition violated";
    case Errc::degenerate_frame: return "degenerate frame";
    case Errc::rank_deficient: return "rank deficient";
    case Errc::degenerate: return "degenerate input";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::exhausted: return "candidate pool exhausted";
    case Errc::io: return "i/o error";
    case Errc::format: return "format error";
  }
  return "unknown error";
}

}  // namespace cover
