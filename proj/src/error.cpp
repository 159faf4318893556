#include "ctxsched/error.hpp"

#include <cstring>

namespace ctxsched {

CgroupError::CgroupError(const std::string& path, int code, const std::string& what)
    : Error(what + ": " + path + " (errno " + std::to_string(code) +
            (code != 0 ? std::string(", ") + std::strerror(code) : std::string()) + ")"),
      path_(path),
      code_(code) {}

}  // namespace ctxsched
