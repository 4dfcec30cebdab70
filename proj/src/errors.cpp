#include "gibbsmpo/types.hpp"

namespace gibbsmpo {

void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::ResourceCap: return 3;
    case ErrorKind::Acceptance: return 4;
    case ErrorKind::Io: return 2;
  }
  return 1;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::ResourceCap: return "resource_cap";
    case ErrorKind::Acceptance: return "acceptance";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

std::int64_t ipow(std::int64_t d, int k) {
  std::int64_t r = 1;
  for (int i = 0; i < k; ++i) {
    if (r > (std::int64_t(1) << 62) / d) return -1;
    r *= d;
  }
  return r;
}

}  // namespace gibbsmpo
