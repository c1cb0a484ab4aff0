#pragma once

#include <stdexcept>
#include <string>

namespace advisor {

/// Invalid user-supplied configuration: bad ids, malformed parameters,
/// dimension mismatches. The CLI maps this to exit code 2.
class config_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A well-formed request that cannot be carried out on the given data
/// (empty trajectory, empty population, inconsistent fixture). Exit code 3.
class domain_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advisor
