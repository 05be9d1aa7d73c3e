#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace bifrb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a caller breaks an operation's preconditions (sizes, ranges).
class ContractViolation : public std::invalid_argument {
public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised on unrecoverable numerical failures (eigen-solver breakdown, etc.).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg)
{
  if (!cond) throw ContractViolation(msg);
}

inline void require_size(const Vector& v, Eigen::Index n, const char* what)
{
  if (v.size() != n) {
    throw ContractViolation(std::string(what) + ": expected length " + std::to_string(n) +
                            ", got " + std::to_string(v.size()));
  }
}

}  // namespace bifrb
