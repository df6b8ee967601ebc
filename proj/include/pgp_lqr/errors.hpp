#pragma once

#include <stdexcept>
#include <string>

namespace pgp_lqr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be Hurwitz (or a gain that must stabilize) is not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  RankError(const std::string& what, double smallest_singular_value)
      : Error(what), smallest_singular_value_(smallest_singular_value) {}
  double smallest_singular_value() const noexcept { return smallest_singular_value_; }

 private:
  double smallest_singular_value_;
};

// A rollout left the divergence guard (state norm too large or non-finite).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(const std::string& what, long achieved_rank)
      : Error(what), achieved_rank_(achieved_rank) {}
  long achieved_rank() const noexcept { return achieved_rank_; }

 private:
  long achieved_rank_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgp_lqr
