#pragma once

#include <stdexcept>
#include <string>

namespace acsplit {

// Raised when a configuration file or flag is malformed or inconsistent.
// The CLI maps it to exit code 2.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a rate fit has fewer than three statistically significant
// rows. The CLI maps it to exit code 3.
struct insufficient_data_error : std::runtime_error {
  explicit insufficient_data_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Raised when a run violates an internal sanity check, e.g. too many
// diverged samples in one ladder cell. The CLI maps it to exit code 4.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace acsplit
