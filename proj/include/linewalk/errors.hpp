#pragma once

#include <stdexcept>
#include <string>

namespace linewalk {

/// Invalid numeric argument to a sampler or formula (nonpositive exponent, u outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Inconsistent or unknown configuration. `key` names the offending setting when known.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::invalid_argument(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Query outside the attained range of a clock, trajectory or sampled process.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A trajectory stopped (jump budget) before the time an operation needed.
class TruncatedError : public std::runtime_error {
 public:
  TruncatedError(const std::string& what, double attained)
      : std::runtime_error(what), attained_(attained) {}
  double attained_horizon() const noexcept { return attained_; }

 private:
  double attained_;
};

}  // namespace linewalk
