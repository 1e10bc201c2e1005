// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace l2a {

/// Base class for all error conditions raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape disagreement; message names both shapes.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration (model sizes, schema violations, bad flags).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, datasets, labels).
class DataError : public Error {
public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline bool is_finite(double x) { return std::isfinite(x); }

}  // namespace l2a
