#ifndef AGLD_TYPES_HPP
#define AGLD_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace agld {

using Index = std::int64_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;

enum class ErrorCode {
  kInvalidArgument = 1,
  kOutOfRange,
  kDimensionMismatch,
  kDiverged,
  kParse,
  kIo,
  kVerification,
};

/// Base class for every error the library throws. The code maps one-to-one
/// onto the status values of the C interface.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCode::kInvalidArgument, what) {}
};

class OutOfRange : public Error {
 public:
  explicit OutOfRange(const std::string& what)
      : Error(ErrorCode::kOutOfRange, what) {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& where, Index expected, Index got)
      : Error(ErrorCode::kDimensionMismatch,
              where + ": expected dimension " + std::to_string(expected) +
                  ", got " + std::to_string(got)) {}
};

/// Raised when an iterate leaves the finite region. Carries the iteration at
/// which the blow-up was observed.
class DivergenceError : public Error {
 public:
  DivergenceError(Index iteration, const std::string& what)
      : Error(ErrorCode::kDiverged, what), iteration_(iteration) {}
  Index iteration() const noexcept { return iteration_; }

 private:
  Index iteration_;
};

class ParseError : public Error {
 public:
  ParseError(Index line, Index column, const std::string& what)
      : Error(ErrorCode::kParse, "line " + std::to_string(line) + ", column " +
                                     std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  Index line() const noexcept { return line_; }
  Index column() const noexcept { return column_; }

 private:
  Index line_;
  Index column_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

inline void check_dim(const char* where, Index expected, Index got) {
  if (expected != got) throw DimensionMismatch(where, expected, got);
}

}  // namespace agld

#endif  // AGLD_TYPES_HPP
