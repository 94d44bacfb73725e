#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bifrac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exponent tuple violates one of the admissibility hypotheses
/// (0 < alpha < 2n, 1 < p1, p2, alpha/n < 1/p1 + 1/p2, 1 < p, q < inf).
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// A computation would allocate more than the configured memory budget.
class BudgetError : public Error {
 public:
  BudgetError(std::size_t required, std::size_t budget)
      : Error("memory budget exceeded: requires " + std::to_string(required) +
              " bytes, budget is " + std::to_string(budget) + " bytes"),
        required_(required),
        budget_(budget) {}

  std::size_t required() const noexcept { return required_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t required_;
  std::size_t budget_;
};

}  // namespace bifrac
