#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bodykit {

/// Base of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array dimensions disagree with the model or with each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, schedule, or generator spec.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its mathematical domain (s <= 0, empty stage list, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class MissingLayerError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class InsufficientEvidenceError : public Error {
 public:
  using Error::Error;
};

class EmptySubsetError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Objective evaluated to a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class IncompatibleModelsError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or dataset file. `field` names the offending field path.
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// One or more points have non-positive depth after translation.
class BehindCameraError : public Error {
 public:
  explicit BehindCameraError(std::vector<std::size_t> joints);

  const std::vector<std::size_t>& joints() const { return joints_; }

 private:
  std::vector<std::size_t> joints_;
};

}  // namespace bodykit
