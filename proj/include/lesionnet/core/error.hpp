#pragma once

#include <stdexcept>
#include <string>

namespace lesionnet {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or layer configurations that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported on-disk data (volumes, weights, CSV files).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed data that violates a semantic precondition (label values,
/// value ranges, too few cases).
class DataError : public Error {
 public:
  using Error::Error;
};

/// AUC requested on a dataset that lacks one of the two classes.
class DegenerateLabels : public DataError {
 public:
  DegenerateLabels() : DataError("degenerate labels: both classes must be present") {}
  explicit DegenerateLabels(const std::string& what) : DataError("degenerate labels: " + what) {}
};

/// Non-finite values reached a place where they must not appear.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff tape.
class TapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace lesionnet
