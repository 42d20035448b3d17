#pragma once

#include <stdexcept>
#include <string>

namespace hyspec {

// Base of every error the toolkit throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Wrong dimensions or an operation asked to handle more than it supports.
class SizeError : public Error {
 public:
  using Error::Error;
};

// A value outside the valid domain, e.g. a wavelength the sensor does not cover.
class DomainError : public Error {
 public:
  using Error::Error;
};

class AnnotationConflict : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class MalformedAssignment : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class GradientCheckFailure : public Error {
 public:
  using Error::Error;
};

// An upstream pipeline artifact is missing.
class DependencyError : public Error {
 public:
  using Error::Error;
};

class InfeasibleSplit : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyspec
