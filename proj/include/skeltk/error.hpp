#pragma once

#include <stdexcept>
#include <string>

namespace skeltk {

// Malformed input bytes or documents (skeleton files, JSON schemas, fixtures).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Contract violation on configs, manifests, or domain values.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatch in numeric code; message names the op and the shapes.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training aborted on a non-finite loss; message carries epoch/batch index.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skeltk
