#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (dimension mismatch, bad schedule, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its domain (e.g. base point not in the set).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine did not converge. Carries the best iterate found.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& what, std::vector<double> best)
      : Error(what), best_iterate_(std::move(best)) {}

  const std::vector<double>& best_iterate() const noexcept { return best_iterate_; }

 private:
  std::vector<double> best_iterate_;
};

/// The shifted sets intersect at the computed minimizer of rung `k`.
class ExtremalityViolated : public Error {
 public:
  ExtremalityViolated(const std::string& what, int k) : Error(what), rung_(k) {}

  int rung() const noexcept { return rung_; }

 private:
  int rung_;
};

}  // namespace epl
