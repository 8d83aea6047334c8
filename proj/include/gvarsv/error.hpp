#ifndef GVARSV_ERROR_HPP
#define GVARSV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace gvarsv {

/// Bad input: malformed files, invalid configuration, violated preconditions.
/// The CLI maps these to exit code 1.
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown inside a sampler or filter. Maps to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public UserError {
 public:
  using UserError::UserError;
};

}  // namespace gvarsv

#endif  // GVARSV_ERROR_HPP
