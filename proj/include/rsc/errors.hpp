#ifndef RSC_ERRORS_HPP
#define RSC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rsc {

// Invalid task documents, out-of-range values, contract violations.
// The CLI maps this to exit code 3.
class validation_error : public std::runtime_error {
  public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

// A configured search/enumeration budget was exhausted. Exit code 2.
class budget_error : public std::runtime_error {
  public:
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace rsc

#endif
