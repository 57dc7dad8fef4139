#pragma once

#include <stdexcept>
#include <string>

namespace radbar {

/// Base for every failure the engine reports. Callers map subclasses to exit
/// codes or HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (bad file, bad code, bad ROI, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A referenced id or file does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace radbar
