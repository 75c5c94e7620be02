#pragma once

#include <stdexcept>
#include <string>

namespace hitl {

// Malformed input data: bad shapes, broken invariants, unreadable files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A feedback source failed to deliver labels (timeout, cancellation,
// transcript mismatch, unreachable label service).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by validated reward learning when the fitted response model puts
// some pool point too close to the decision boundary for the guessed margin.
class ValidationFailure : public std::runtime_error {
 public:
  ValidationFailure(std::size_t pool_index, double gap, double guessed_margin)
      : std::runtime_error("validation failed at pool index " +
                           std::to_string(pool_index) + ": |f - 1/2| = " +
                           std::to_string(gap) + " <= " +
                           std::to_string(guessed_margin / 2)),
        pool_index_(pool_index),
        gap_(gap) {}

  std::size_t pool_index() const { return pool_index_; }
  double gap() const { return gap_; }

 private:
  std::size_t pool_index_;
  double gap_;
};

}  // namespace hitl
