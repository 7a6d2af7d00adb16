#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scriptoria {

/// Row-major so that one row is one descriptor / one encoding.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorCode : int {
  InvalidArgument = 1,
  Io = 2,
  Format = 3,
  Dimension = 4,
  State = 5,
  Degenerate = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require_dim(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    fail(ErrorCode::Dimension, std::string(what) + ": dimension " + std::to_string(got) +
                                   " does not match expected " + std::to_string(expected));
  }
}

}  // namespace scriptoria
