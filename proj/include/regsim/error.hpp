#pragma once

#include <stdexcept>
#include <string>

namespace regsim {

// Bad caller input: out-of-range probabilities, malformed schedules, wrong dimensions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A post-selected branch with zero probability was requested.
class ImpossibleBranch : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A solver target cannot be met within its search cap.
class Unreachable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidArgument(std::string(name) + " must lie in [0,1], got " + std::to_string(p));
}

}  // namespace detail
}  // namespace regsim
