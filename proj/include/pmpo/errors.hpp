#pragma once

#include <stdexcept>

namespace pmpo {

/// Bad caller-supplied data: empty vectors, non-finite entries, out-of-range config.
class invalid_input : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The bisection budget ran out. ESS is monotone in p, so a bracketed target
/// cannot legitimately escape the solver; hitting this means the inputs broke
/// an internal invariant.
class solver_failure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pmpo
