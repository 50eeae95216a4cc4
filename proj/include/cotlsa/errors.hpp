#pragma once

#include <stdexcept>
#include <string>

namespace cotlsa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotSPD : public Error {
 public:
  using Error::Error;
};

class NonSquare : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class StepOutOfRange : public Error {
 public:
  using Error::Error;
};

class BadSigma : public Error {
 public:
  using Error::Error;
};

class BadCheckpoint : public Error {
 public:
  using Error::Error;
};

class RankDeficientBasis : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a trajectory produces non-finite state. Carries the step index of
// the last finite state; the owner of that state is responsible for keeping it.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, long last_good_step)
      : Error(what), last_good_step_(last_good_step) {}
  long last_good_step() const noexcept { return last_good_step_; }

 private:
  long last_good_step_;
};

}  // namespace cotlsa
