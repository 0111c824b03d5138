#ifndef GWIL_ERROR_HPP_
#define GWIL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace gwil {

// Malformed or inconsistent input: wrong shapes, negative masses, asymmetric
// distances beyond the repair tolerance.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

// Structurally valid input that admits no solution (disconnected maze,
// singular flow system, infeasible coupling).
class Infeasible : public std::runtime_error {
 public:
  explicit Infeasible(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gwil

#endif  // GWIL_ERROR_HPP_
