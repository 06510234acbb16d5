#pragma once
//
// Exception taxonomy shared across the library.
//
//   std::invalid_argument  — caller broke a precondition (bad flag value,
//                            non-positive operator, asymmetric input, ...)
//   numerical_error        — an algorithm ran but could not reach its
//                            accuracy target (quadrature non-convergence,
//                            tail tolerance unattainable, ...); the message
//                            carries diagnostics
//   resource_limit_error   — a requested computation exceeds a hard size
//                            cap; the message names the offending count
//
// The command-line driver maps these to exit codes (2, 1, 2 respectively).

#include <stdexcept>
#include <string>

namespace fermicorr {

class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

class resource_limit_error : public std::runtime_error {
 public:
  explicit resource_limit_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fermicorr
