#pragma once

#include <stdexcept>
#include <string>

namespace facelayers {

// Base of everything the library throws. Subclasses map onto the CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument values: even kernel sizes, sigma outside [0,1], negative weights.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Dimension / layout mismatches between textures, bases or parameter vectors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Loss became non-finite during an optimization.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace facelayers
