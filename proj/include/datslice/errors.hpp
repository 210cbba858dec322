#pragma once

#include <stdexcept>
#include <string>

namespace datslice {

// Error taxonomy mirrors the CLI exit codes: shape/numeric/validation map to
// exit 1, format/io to exit 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class NumericError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace datslice
