#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace hdvplan {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// An input violated a type invariant. `index` names the offending sample
/// when the violation is local to one.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<std::size_t> index = std::nullopt)
      : Error(index ? what + " (at index " + std::to_string(*index) + ")" : what),
        index_(index) {}
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class ProjectionDiverged : public Error {
 public:
  using Error::Error;
};

/// The road-aligned model left its validity domain (|e_psi| >= pi/2,
/// |beta1| >= pi/2 or 1 - e_y*kappa_gamma <= 0).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what,
                       std::optional<std::size_t> step = std::nullopt)
      : Error(step ? what + " (at step " + std::to_string(*step) + ")" : what),
        step_(step) {}
  std::optional<std::size_t> step() const { return step_; }

 private:
  std::optional<std::size_t> step_;
};

class GeometryInfeasible : public Error {
 public:
  explicit GeometryInfeasible(const std::string& what,
                              std::optional<std::size_t> index = std::nullopt)
      : Error(index ? what + " (at sample " + std::to_string(*index) + ")" : what),
        index_(index) {}
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::optional<std::size_t> index_;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class LinearizationFailed : public Error {
 public:
  LinearizationFailed(const std::string& what, std::size_t step)
      : Error(what + " (while linearizing step " + std::to_string(step) + ")"),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class InfeasibleDetected : public Error {
 public:
  using Error::Error;
};

}  // namespace hdvplan
