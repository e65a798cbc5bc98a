#pragma once

#include <stdexcept>
#include <string>

namespace dapt {

struct InvalidWordError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptySequenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateEmbeddingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LabelsRequiredError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteGradientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dapt
