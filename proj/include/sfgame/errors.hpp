#pragma once

#include <stdexcept>
#include <string>

namespace sfgame {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Table or game dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (e.g. stepping a finished episode).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Feature / weight vector lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Least-squares system without a unique solution.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or persistence failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfgame
