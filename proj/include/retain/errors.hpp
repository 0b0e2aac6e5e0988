// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace retain {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Precondition violated by a caller-supplied value (empty input, NaN, bad label...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A trace or cached object does not belong to the parameters it is used with.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Absolute-normalized attribution requested for an all-zero contribution map.
class DegenerateAttributionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Objective or gradient became non-finite during optimisation.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A function under evaluation produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed raw data (bad CSV, duplicate timestamps, ...).
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Settings that cannot produce a usable pipeline or run.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required file or directory does not exist or cannot be read.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The requested operation is not supported by this kind of model.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace retain
