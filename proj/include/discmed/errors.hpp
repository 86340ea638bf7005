#pragma once

#include <stdexcept>
#include <string>

namespace discmed {

/// Violated precondition or numeric contract (bad parameters, non-finite input,
/// dimension mismatch). The CLI maps this to exit code 3.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated byte stream / file. The CLI maps this to exit code 2.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractError(what);
}

}  // namespace detail
}  // namespace discmed
