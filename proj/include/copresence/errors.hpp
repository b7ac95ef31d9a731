#pragma once

#include <stdexcept>
#include <string>

namespace copresence {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

/// Invalid numeric argument: NaN input, log of a non-positive value, bad range.
class DomainError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

class TrainingError : public Error {
  public:
    using Error::Error;
};

/// Two artifacts (checkpoint, dataset, run record) disagree on category lists or layout.
class CompatibilityError : public Error {
  public:
    using Error::Error;
};

}  // namespace copresence
