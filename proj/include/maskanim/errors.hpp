#pragma once

#include <stdexcept>
#include <string>

namespace maskanim {

/// Invalid or inconsistent configuration (unknown key, bad value, mismatch).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or decoding failure; the message names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric whose denominator is empty (e.g. no keypoint detected in truth).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training step produced a non-finite loss.
class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace maskanim
