#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epibound {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A first-order distribution violates its construction invariants.
class InvalidDistribution : public Error {
 public:
  using Error::Error;
};

class InvalidTaskDistribution : public Error {
 public:
  using Error::Error;
};

/// Event or distribution pair lives on a different sample space.
class EventMismatch : public Error {
 public:
  using Error::Error;
};

/// A density that must be positive vanished (e.g. log q(x) with q(x) = 0).
class SupportViolation : public Error {
 public:
  using Error::Error;
};

class InvalidModelClass : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class GenerationFailure : public Error {
 public:
  using Error::Error;
};

/// The hypothesis a bound statement requires that failed its check.
enum class Assumption {
  perfect_learning,
  no_shift,
  predictor_in_model,
  second_order_bounded_source,
  second_order_bounded_target,
  first_order_bounded_source,
  first_order_bounded_target,
  task_neighborhood,         // every target task within eps of some source task
  distribution_neighborhood, // tv between task distributions within eps
  bounded_predictor,
  finite_sample_space,
  parameter_distributions,
  missing_input,
};

std::string_view to_string(Assumption a);

class PreconditionViolated : public Error {
 public:
  PreconditionViolated(Assumption which, const std::string& detail)
      : Error(std::string(to_string(which)) + ": " + detail), which_(which) {}

  Assumption which() const noexcept { return which_; }

 private:
  Assumption which_;
};

}  // namespace epibound
