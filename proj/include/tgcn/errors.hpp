#pragma once

#include <stdexcept>
#include <string>

namespace tgcn {

// Exit-code classes used by the CLI: config/usage -> 1, data -> 2,
// verification -> 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct VerifyError : std::runtime_error {
  explicit VerifyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tgcn
